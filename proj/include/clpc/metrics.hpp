#pragma once

#include <optional>
#include <string>
#include <vector>

#include "clpc/geometry.hpp"
#include "clpc/model.hpp"

namespace clpc {

// All distances below are unsquared Euclidean means (max for the Hausdorff
// term), multiplied by `scale` for reporting.
struct MetricsReport {
    std::optional<double> precision; // completion -> GT mean
    std::optional<double> coverage;  // GT -> completion mean
    std::optional<double> cd;        // precision + coverage
    std::optional<double> ucd;       // partial -> completion mean
    std::optional<double> uhd;       // partial -> completion max
    double scale = 1.0;
    std::size_t sample_count = 0;
};

// precision/coverage/cd of a completion against ground truth (scale = 1).
MetricsReport chamfer_eval(const PointCloud& completion, const PointCloud& ground_truth);

double unidirectional_chamfer(const PointCloud& partial, const PointCloud& completion);
double unidirectional_hausdorff(const PointCloud& partial, const PointCloud& completion);

struct EvalSample {
    std::string id;
    PointCloud partial;
    std::optional<PointCloud> ground_truth;
};

struct DatasetMetrics {
    std::vector<MetricsReport> samples;  // one per input, same order
    std::vector<std::string> ids;
    MetricsReport aggregate;             // means over samples carrying the field
};

// Runs the model on every partial; UCD/UHD always, precision/coverage/CD where
// ground truth is present. `scale` multiplies every reported distance.
DatasetMetrics evaluate_dataset(const ModelParams& params,
                                const std::vector<EvalSample>& samples,
                                double scale = 1.0);

// id,precision,coverage,cd,ucd,uhd rows (blank = absent), final "aggregate" row.
std::string metrics_csv(const DatasetMetrics& m);
std::string metrics_json(const DatasetMetrics& m);

} // namespace clpc
