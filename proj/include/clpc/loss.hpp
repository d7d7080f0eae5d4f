#pragma once

#include <Eigen/Dense>
#include <vector>

#include "clpc/geometry.hpp"
#include "clpc/kdtree.hpp"

namespace clpc {

struct LossWeights {
    double alpha = 0.1;       // completion -> partial term
    double beta = 0.9;        // partial -> completion term
    double lambda_cons = 10.0; // consistency weight in the total
};

struct LossBreakdown {
    double cons = 0.0;
    double wcd = 0.0;
    double total = 0.0;
};

// Mean squared deviation between each view completion and the target, with
// points paired by output slot: sum ||C_v[i]-target[i]||^2 / (N_c * N_s).
double consistency_mse(const std::vector<PointCloud>& completions,
                       const PointCloud& target);

// Alternate consistency: mean over views of the symmetric unsquared point-to-
// nearest distance (mean in each direction, summed).
double consistency_chamfer(const std::vector<PointCloud>& completions,
                           const PointCloud& target);

// alpha * mean_{p in completion} min-dist(p, partial)
//  + beta * mean_{q in partial} min-dist(q, completion).
double weighted_chamfer(const PointCloud& completion, const PointCloud& partial,
                        const LossWeights& w);

// As above with a prebuilt index over partial (must index `partial`).
double weighted_chamfer(const PointCloud& completion, const PointCloud& partial,
                        const NearestNeighborIndex& partial_index, const LossWeights& w);

// Gradient with respect to completion points, argmin correspondences held
// fixed; coincident pairs contribute a zero direction. d_completion is
// resized to N_c x 3 and overwritten. Returns the loss value.
double weighted_chamfer_grad(const PointCloud& completion, const PointCloud& partial,
                             const NearestNeighborIndex& partial_index,
                             const LossWeights& w, Eigen::MatrixXd& d_completion);

// Per-view symmetric chamfer gradient wrt the view completion (target fixed).
double consistency_chamfer_grad(const PointCloud& view_completion,
                                const PointCloud& target,
                                const NearestNeighborIndex& target_index,
                                Eigen::MatrixXd& d_view);

inline LossBreakdown total_loss(double cons, double wcd, const LossWeights& w) {
    return {cons, wcd, w.lambda_cons * cons + wcd};
}

} // namespace clpc
