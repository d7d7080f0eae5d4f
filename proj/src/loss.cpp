#include "clpc/loss.hpp"

#include <cmath>

#include "clpc/error.hpp"

namespace clpc {

namespace {

void check_nonempty(const std::vector<PointCloud>& completions, const PointCloud& target) {
    if (completions.empty()) throw ComputeError("consistency: no view completions");
    if (target.empty()) throw ComputeError("consistency: empty target");
    for (const PointCloud& c : completions)
        if (c.empty()) throw ComputeError("consistency: empty view completion");
}

// The MSE form pairs points by output slot, so sizes must line up; the
// chamfer form matches by nearest neighbor and has no such constraint.
void check_same_size(const std::vector<PointCloud>& completions, const PointCloud& target) {
    check_nonempty(completions, target);
    for (const PointCloud& c : completions)
        if (c.size() != target.size())
            throw ComputeError("consistency: completion/target size mismatch");
}

// Mean over cloud of the (unsquared) distance to the nearest indexed point.
double mean_nearest(const PointCloud& cloud, const NearestNeighborIndex& index) {
    double sum = 0.0;
    for (const Point3& p : cloud) sum += std::sqrt(index.nearest(p).squared_distance);
    return sum / static_cast<double>(cloud.size());
}

} // namespace

double consistency_mse(const std::vector<PointCloud>& completions,
                       const PointCloud& target) {
    check_same_size(completions, target);
    double sum = 0.0;
    for (const PointCloud& c : completions)
        for (std::size_t i = 0; i < target.size(); ++i)
            sum += squared_distance(c[i], target[i]);
    return sum / (static_cast<double>(target.size()) *
                  static_cast<double>(completions.size()));
}

double consistency_chamfer(const std::vector<PointCloud>& completions,
                           const PointCloud& target) {
    check_nonempty(completions, target);
    const NearestNeighborIndex target_index(target);
    double sum = 0.0;
    for (const PointCloud& c : completions) {
        const NearestNeighborIndex view_index(c);
        sum += mean_nearest(c, target_index) + mean_nearest(target, view_index);
    }
    return sum / static_cast<double>(completions.size());
}

double weighted_chamfer(const PointCloud& completion, const PointCloud& partial,
                        const NearestNeighborIndex& partial_index, const LossWeights& w) {
    if (completion.empty() || partial.empty())
        throw ComputeError("weighted_chamfer: empty cloud");
    const NearestNeighborIndex completion_index(completion);
    return w.alpha * mean_nearest(completion, partial_index) +
           w.beta * mean_nearest(partial, completion_index);
}

double weighted_chamfer(const PointCloud& completion, const PointCloud& partial,
                        const LossWeights& w) {
    const NearestNeighborIndex partial_index(partial);
    return weighted_chamfer(completion, partial, partial_index, w);
}

double weighted_chamfer_grad(const PointCloud& completion, const PointCloud& partial,
                             const NearestNeighborIndex& partial_index,
                             const LossWeights& w, Eigen::MatrixXd& d_completion) {
    if (completion.empty() || partial.empty())
        throw ComputeError("weighted_chamfer: empty cloud");
    const double nc = static_cast<double>(completion.size());
    const double np = static_cast<double>(partial.size());
    d_completion = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(completion.size()), 3);

    // Term 1: each completion point pulls toward its nearest partial point.
    double term1 = 0.0;
    for (std::size_t i = 0; i < completion.size(); ++i) {
        const Neighbor nb = partial_index.nearest(completion[i]);
        const double d = std::sqrt(nb.squared_distance);
        term1 += d;
        if (d > 0.0) {
            const Point3 diff = completion[i] - partial_index.points()[nb.index];
            const double s = w.alpha / (nc * d);
            d_completion(static_cast<Eigen::Index>(i), 0) += s * diff.x;
            d_completion(static_cast<Eigen::Index>(i), 1) += s * diff.y;
            d_completion(static_cast<Eigen::Index>(i), 2) += s * diff.z;
        }
    }

    // Term 2: each partial point pulls its nearest completion point toward it.
    const NearestNeighborIndex completion_index(completion);
    double term2 = 0.0;
    for (std::size_t j = 0; j < partial.size(); ++j) {
        const Point3& q = partial_index.points()[j];
        const Neighbor nb = completion_index.nearest(q);
        const double d = std::sqrt(nb.squared_distance);
        term2 += d;
        if (d > 0.0) {
            const Point3 diff = completion[nb.index] - q;
            const double s = w.beta / (np * d);
            d_completion(static_cast<Eigen::Index>(nb.index), 0) += s * diff.x;
            d_completion(static_cast<Eigen::Index>(nb.index), 1) += s * diff.y;
            d_completion(static_cast<Eigen::Index>(nb.index), 2) += s * diff.z;
        }
    }
    return w.alpha * (term1 / nc) + w.beta * (term2 / np);
}

double consistency_chamfer_grad(const PointCloud& view_completion,
                                const PointCloud& target,
                                const NearestNeighborIndex& target_index,
                                Eigen::MatrixXd& d_view) {
    if (view_completion.empty() || target.empty())
        throw ComputeError("consistency: empty cloud");
    const double nv = static_cast<double>(view_completion.size());
    const double nt = static_cast<double>(target.size());
    d_view = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(view_completion.size()), 3);

    double fwd = 0.0;
    for (std::size_t i = 0; i < view_completion.size(); ++i) {
        const Neighbor nb = target_index.nearest(view_completion[i]);
        const double d = std::sqrt(nb.squared_distance);
        fwd += d;
        if (d > 0.0) {
            const Point3 diff = view_completion[i] - target_index.points()[nb.index];
            const double s = 1.0 / (nv * d);
            d_view(static_cast<Eigen::Index>(i), 0) += s * diff.x;
            d_view(static_cast<Eigen::Index>(i), 1) += s * diff.y;
            d_view(static_cast<Eigen::Index>(i), 2) += s * diff.z;
        }
    }

    const NearestNeighborIndex view_index(view_completion);
    double bwd = 0.0;
    for (std::size_t j = 0; j < target.size(); ++j) {
        const Neighbor nb = view_index.nearest(target[j]);
        const double d = std::sqrt(nb.squared_distance);
        bwd += d;
        if (d > 0.0) {
            const Point3 diff = view_completion[nb.index] - target[j];
            const double s = 1.0 / (nt * d);
            d_view(static_cast<Eigen::Index>(nb.index), 0) += s * diff.x;
            d_view(static_cast<Eigen::Index>(nb.index), 1) += s * diff.y;
            d_view(static_cast<Eigen::Index>(nb.index), 2) += s * diff.z;
        }
    }
    return fwd / nv + bwd / nt;
}

} // namespace clpc
