#include "clpc/view.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "clpc/error.hpp"

namespace clpc {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

struct Rotated {
    double x, y, depth;
};

// Camera frame: first undo the azimuth (rotation about world y), then the
// elevation (rotation about camera x). The camera looks along +z, so depth is
// camera-space z and smaller is closer.
inline Rotated to_camera(const Point3& p, double az_rad, double el_rad) {
    const double ca = std::cos(az_rad), sa = std::sin(az_rad);
    const double ce = std::cos(el_rad), se = std::sin(el_rad);
    // R_y(-az)
    const double x1 = ca * p.x - sa * p.z;
    const double y1 = p.y;
    const double z1 = sa * p.x + ca * p.z;
    // R_x(-el)
    const double y2 = ce * y1 + se * z1;
    const double z2 = -se * y1 + ce * z1;
    return {x1, y2, z2};
}

void validate(const ViewParams& v) {
    if (!(v.azimuth_deg >= 0.0 && v.azimuth_deg < 360.0))
        throw ComputeError("view: azimuth out of range [0,360)");
    if (!(v.elevation_deg >= -20.0 && v.elevation_deg <= 40.0))
        throw ComputeError("view: elevation out of range [-20,40]");
    if (v.grid_resolution < 2) throw ComputeError("view: grid resolution < 2");
}

} // namespace

ViewParams sample_view(SeededRng& rng, int grid_resolution) {
    ViewParams v;
    v.azimuth_deg = rng.uniform(0.0, 360.0);
    v.elevation_deg = rng.uniform(-20.0, 40.0);
    v.grid_resolution = grid_resolution;
    return v;
}

Point3 view_direction(const ViewParams& view) {
    const double az = view.azimuth_deg * kDegToRad;
    const double el = view.elevation_deg * kDegToRad;
    // Inverse of to_camera applied to the camera's -z axis.
    const double ca = std::cos(az), sa = std::sin(az);
    const double ce = std::cos(el), se = std::sin(el);
    // R_x(el) * (0,0,-1)
    const double y1 = se;
    const double z1 = -ce;
    // R_y(az)
    return {sa * z1, y1, ca * z1};
}

DepthGrid project_to_depth_grid(const PointCloud& cloud, const ViewParams& view) {
    validate(view);
    if (cloud.empty()) throw ComputeError("project: empty cloud");

    const double az = view.azimuth_deg * kDegToRad;
    const double el = view.elevation_deg * kDegToRad;
    const int res = view.grid_resolution;

    std::vector<Rotated> rot(cloud.size());
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        rot[i] = to_camera(cloud[i], az, el);
        xmin = std::min(xmin, rot[i].x);
        xmax = std::max(xmax, rot[i].x);
        ymin = std::min(ymin, rot[i].y);
        ymax = std::max(ymax, rot[i].y);
    }

    // Square footprint with a 1% margin so boundary points land strictly
    // inside; resolution-independent by construction.
    double half = 0.5 * std::max(xmax - xmin, ymax - ymin) * 1.01;
    if (half <= 0.0) half = 1.0; // all points share an (x,y); one busy cell
    const double cx = 0.5 * (xmin + xmax);
    const double cy = 0.5 * (ymin + ymax);
    const double cell = 2.0 * half / res;

    DepthGrid grid;
    grid.resolution = res;
    grid.point_index.assign(static_cast<std::size_t>(res) * res, -1);
    grid.depth.assign(static_cast<std::size_t>(res) * res,
                      std::numeric_limits<double>::infinity());

    for (std::size_t i = 0; i < cloud.size(); ++i) {
        int col = static_cast<int>(std::floor((rot[i].x - (cx - half)) / cell));
        int row = static_cast<int>(std::floor((rot[i].y - (cy - half)) / cell));
        col = std::clamp(col, 0, res - 1);
        row = std::clamp(row, 0, res - 1);
        const std::size_t c = static_cast<std::size_t>(row) * res + col;
        // Strict < keeps the earliest (lowest-index) point on depth ties.
        if (rot[i].depth < grid.depth[c]) {
            grid.depth[c] = rot[i].depth;
            grid.point_index[c] = static_cast<std::int32_t>(i);
        }
    }
    return grid;
}

std::vector<std::size_t> visible_indices(const PointCloud& cloud, const ViewParams& view) {
    const DepthGrid grid = project_to_depth_grid(cloud, view);
    std::vector<std::size_t> vis;
    vis.reserve(grid.point_index.size() / 4);
    for (std::int32_t idx : grid.point_index)
        if (idx >= 0) vis.push_back(static_cast<std::size_t>(idx));
    return vis;
}

std::vector<std::size_t> synthesize_partial_indices(const PointCloud& cloud,
                                                    const ViewParams& view,
                                                    std::size_t n_out, SeededRng& rng) {
    const std::vector<std::size_t> vis = visible_indices(cloud, view);
    if (vis.empty()) throw ComputeError("synthesize: no visible points");
    std::vector<std::size_t> out(n_out);
    for (std::size_t i = 0; i < n_out; ++i) out[i] = vis[rng.index(vis.size())];
    return out;
}

PointCloud synthesize_partial(const PointCloud& cloud, const ViewParams& view,
                              std::size_t n_out, SeededRng& rng) {
    const auto idx = synthesize_partial_indices(cloud, view, n_out, rng);
    PointCloud out(n_out);
    for (std::size_t i = 0; i < n_out; ++i) out[i] = cloud[idx[i]];
    return out;
}

} // namespace clpc
