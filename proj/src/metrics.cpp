#include "clpc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "clpc/error.hpp"
#include "clpc/kdtree.hpp"

namespace clpc {

namespace {

double mean_nearest(const PointCloud& from, const NearestNeighborIndex& to) {
    double sum = 0.0;
    for (const Point3& p : from) sum += std::sqrt(to.nearest(p).squared_distance);
    return sum / static_cast<double>(from.size());
}

double max_nearest(const PointCloud& from, const NearestNeighborIndex& to) {
    double mx = 0.0;
    for (const Point3& p : from)
        mx = std::max(mx, std::sqrt(to.nearest(p).squared_distance));
    return mx;
}

// 17 significant digits: doubles round-trip exactly.
std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

std::string cell(const std::optional<double>& v) { return v ? fmt(*v) : ""; }

} // namespace

MetricsReport chamfer_eval(const PointCloud& completion, const PointCloud& ground_truth) {
    if (completion.empty() || ground_truth.empty())
        throw ComputeError("chamfer_eval: empty cloud");
    const NearestNeighborIndex gt_index(ground_truth);
    const NearestNeighborIndex completion_index(completion);
    MetricsReport r;
    r.precision = mean_nearest(completion, gt_index);
    r.coverage = mean_nearest(ground_truth, completion_index);
    r.cd = *r.precision + *r.coverage;
    r.sample_count = 1;
    return r;
}

double unidirectional_chamfer(const PointCloud& partial, const PointCloud& completion) {
    if (partial.empty() || completion.empty()) throw ComputeError("ucd: empty cloud");
    return mean_nearest(partial, NearestNeighborIndex(completion));
}

double unidirectional_hausdorff(const PointCloud& partial, const PointCloud& completion) {
    if (partial.empty() || completion.empty()) throw ComputeError("uhd: empty cloud");
    return max_nearest(partial, NearestNeighborIndex(completion));
}

DatasetMetrics evaluate_dataset(const ModelParams& params,
                                const std::vector<EvalSample>& samples, double scale) {
    if (samples.empty()) throw ComputeError("evaluate: no samples");
    DatasetMetrics out;
    double sum_p = 0.0, sum_c = 0.0, sum_cd = 0.0, sum_ucd = 0.0, sum_uhd = 0.0;
    std::size_t n_gt = 0;
    for (const EvalSample& s : samples) {
        const PointCloud completion = forward_complete(params, s.partial);
        const NearestNeighborIndex completion_index(completion);
        MetricsReport r;
        r.scale = scale;
        r.sample_count = 1;
        r.ucd = scale * mean_nearest(s.partial, completion_index);
        r.uhd = scale * max_nearest(s.partial, completion_index);
        sum_ucd += *r.ucd;
        sum_uhd += *r.uhd;
        if (s.ground_truth) {
            const NearestNeighborIndex gt_index(*s.ground_truth);
            r.precision = scale * mean_nearest(completion, gt_index);
            r.coverage = scale * mean_nearest(*s.ground_truth, completion_index);
            r.cd = *r.precision + *r.coverage;
            sum_p += *r.precision;
            sum_c += *r.coverage;
            sum_cd += *r.cd;
            ++n_gt;
        }
        out.samples.push_back(r);
        out.ids.push_back(s.id);
    }
    const double n = static_cast<double>(samples.size());
    out.aggregate.scale = scale;
    out.aggregate.sample_count = samples.size();
    out.aggregate.ucd = sum_ucd / n;
    out.aggregate.uhd = sum_uhd / n;
    if (n_gt > 0) {
        out.aggregate.precision = sum_p / static_cast<double>(n_gt);
        out.aggregate.coverage = sum_c / static_cast<double>(n_gt);
        out.aggregate.cd = sum_cd / static_cast<double>(n_gt);
    }
    return out;
}

std::string metrics_csv(const DatasetMetrics& m) {
    std::ostringstream os;
    os << "id,precision,coverage,cd,ucd,uhd\n";
    for (std::size_t i = 0; i < m.samples.size(); ++i) {
        const MetricsReport& r = m.samples[i];
        os << m.ids[i] << ',' << cell(r.precision) << ',' << cell(r.coverage) << ','
           << cell(r.cd) << ',' << cell(r.ucd) << ',' << cell(r.uhd) << '\n';
    }
    const MetricsReport& a = m.aggregate;
    os << "aggregate," << cell(a.precision) << ',' << cell(a.coverage) << ','
       << cell(a.cd) << ',' << cell(a.ucd) << ',' << cell(a.uhd) << '\n';
    return os.str();
}

std::string metrics_json(const DatasetMetrics& m) {
    nlohmann::json j;
    auto fill = [](const MetricsReport& r) {
        nlohmann::json o;
        if (r.precision) o["precision"] = *r.precision;
        if (r.coverage) o["coverage"] = *r.coverage;
        if (r.cd) o["cd"] = *r.cd;
        if (r.ucd) o["ucd"] = *r.ucd;
        if (r.uhd) o["uhd"] = *r.uhd;
        return o;
    };
    j["samples"] = nlohmann::json::array();
    for (std::size_t i = 0; i < m.samples.size(); ++i) {
        nlohmann::json o = fill(m.samples[i]);
        o["id"] = m.ids[i];
        j["samples"].push_back(o);
    }
    j["aggregate"] = fill(m.aggregate);
    j["scale"] = m.aggregate.scale;
    j["count"] = m.aggregate.sample_count;
    return j.dump(2) + "\n";
}

} // namespace clpc
