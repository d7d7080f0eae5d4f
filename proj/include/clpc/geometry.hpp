#pragma once

#include <cstddef>
#include <vector>

#include "clpc/rng.hpp"

namespace clpc {

struct Point3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    friend Point3 operator+(const Point3& a, const Point3& b) {
        return {a.x + b.x, a.y + b.y, a.z + b.z};
    }
    friend Point3 operator-(const Point3& a, const Point3& b) {
        return {a.x - b.x, a.y - b.y, a.z - b.z};
    }
    friend Point3 operator*(const Point3& a, double s) {
        return {a.x * s, a.y * s, a.z * s};
    }
    friend bool operator==(const Point3& a, const Point3& b) {
        return a.x == b.x && a.y == b.y && a.z == b.z;
    }
};

using PointCloud = std::vector<Point3>;

inline double squared_distance(const Point3& a, const Point3& b) {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    const double dz = a.z - b.z;
    return dx * dx + dy * dy + dz * dz;
}

// Strict lexicographic (x, y, z) order; the canonical order used wherever an
// order-independent result is required.
inline bool lex_less(const Point3& a, const Point3& b) {
    if (a.x != b.x) return a.x < b.x;
    if (a.y != b.y) return a.y < b.y;
    return a.z < b.z;
}

// n_out independent uniform draws (with replacement) from cloud.
// Throws ComputeError on an empty cloud.
PointCloud resample(const PointCloud& cloud, std::size_t n_out, SeededRng& rng);

// Index-level variant: draws indices into cloud with identical generator
// consumption as resample().
std::vector<std::size_t> resample_indices(const PointCloud& cloud, std::size_t n_out,
                                          SeededRng& rng);

// Translate centroid to the origin, then scale so the maximum absolute
// coordinate is exactly 0.5. All-identical clouds are centered only (unit
// scale). Throws ComputeError on an empty cloud.
PointCloud center_and_scale(const PointCloud& cloud);

Point3 centroid(const PointCloud& cloud);

} // namespace clpc
