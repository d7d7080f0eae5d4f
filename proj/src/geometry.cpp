#include "clpc/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "clpc/error.hpp"

namespace clpc {

std::vector<std::size_t> resample_indices(const PointCloud& cloud, std::size_t n_out,
                                          SeededRng& rng) {
    if (cloud.empty()) throw ComputeError("resample: empty cloud");
    std::vector<std::size_t> idx(n_out);
    for (std::size_t i = 0; i < n_out; ++i) idx[i] = rng.index(cloud.size());
    return idx;
}

PointCloud resample(const PointCloud& cloud, std::size_t n_out, SeededRng& rng) {
    const auto idx = resample_indices(cloud, n_out, rng);
    PointCloud out(n_out);
    for (std::size_t i = 0; i < n_out; ++i) out[i] = cloud[idx[i]];
    return out;
}

Point3 centroid(const PointCloud& cloud) {
    if (cloud.empty()) throw ComputeError("centroid: empty cloud");
    double sx = 0.0, sy = 0.0, sz = 0.0;
    for (const Point3& p : cloud) {
        sx += p.x;
        sy += p.y;
        sz += p.z;
    }
    const double n = static_cast<double>(cloud.size());
    return {sx / n, sy / n, sz / n};
}

PointCloud center_and_scale(const PointCloud& cloud) {
    const Point3 c = centroid(cloud);
    PointCloud out(cloud.size());
    double maxabs = 0.0;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        out[i] = cloud[i] - c;
        maxabs = std::max({maxabs, std::abs(out[i].x), std::abs(out[i].y),
                           std::abs(out[i].z)});
    }
    if (maxabs == 0.0) return out; // degenerate: all points identical
    // Divide by maxabs first: the extreme coordinate becomes exactly 1.0,
    // then exactly 0.5 after the halving, so the advertised bound is exact.
    for (Point3& p : out) {
        p.x = (p.x / maxabs) * 0.5;
        p.y = (p.y / maxabs) * 0.5;
        p.z = (p.z / maxabs) * 0.5;
    }
    return out;
}

} // namespace clpc
