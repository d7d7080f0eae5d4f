#pragma once

#include <cstdint>
#include <vector>

#include "clpc/geometry.hpp"
#include "clpc/rng.hpp"

namespace clpc {

struct ViewParams {
    double azimuth_deg = 0.0;   // [0, 360)
    double elevation_deg = 0.0; // [-20, 40]
    int grid_resolution = 64;   // >= 2
};

// Draws azimuth then elevation, uniform over the ranges above.
ViewParams sample_view(SeededRng& rng, int grid_resolution = 64);

// Orthographic z-buffer over a square grid perpendicular to the view
// direction. Each cell keeps the point closest to the camera; depth ties keep
// the lowest point index. The grid square depends only on the cloud (not the
// resolution), so doubling the resolution splits each cell in four.
struct DepthGrid {
    int resolution = 0;
    std::vector<std::int32_t> point_index; // row-major, -1 = empty
    std::vector<double> depth;             // +inf = empty

    std::int32_t at(int row, int col) const { return point_index[row * resolution + col]; }
};

DepthGrid project_to_depth_grid(const PointCloud& cloud, const ViewParams& view);

// Visible subset = z-buffer winners in row-major cell order, then resampled
// to n_out points. Every output point is bit-identical to some input point.
PointCloud synthesize_partial(const PointCloud& cloud, const ViewParams& view,
                              std::size_t n_out, SeededRng& rng);

// Same draws as synthesize_partial, but returns indices into cloud.
std::vector<std::size_t> synthesize_partial_indices(const PointCloud& cloud,
                                                    const ViewParams& view,
                                                    std::size_t n_out, SeededRng& rng);

// Indices of z-buffer winners in row-major cell order (no resampling).
std::vector<std::size_t> visible_indices(const PointCloud& cloud, const ViewParams& view);

// Unit vector from the shape toward the camera, in world coordinates.
Point3 view_direction(const ViewParams& view);

} // namespace clpc
