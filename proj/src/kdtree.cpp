#include "clpc/kdtree.hpp"

#include <algorithm>
#include <limits>

#include "clpc/error.hpp"

namespace clpc {

namespace {

inline double coord(const Point3& p, int axis) {
    return axis == 0 ? p.x : (axis == 1 ? p.y : p.z);
}

inline bool better(double d2, std::size_t idx, const Neighbor& best) {
    return d2 < best.squared_distance ||
           (d2 == best.squared_distance && idx < best.index);
}

} // namespace

Neighbor brute_force_nearest(const PointCloud& target, const Point3& query) {
    if (target.empty()) throw ComputeError("nearest: empty target cloud");
    Neighbor best{0, std::numeric_limits<double>::infinity()};
    for (std::size_t i = 0; i < target.size(); ++i) {
        const double d2 = squared_distance(target[i], query);
        if (d2 < best.squared_distance) best = {i, d2};
    }
    return best;
}

NearestNeighborIndex::NearestNeighborIndex(const PointCloud& target) : pts_(target) {
    if (pts_.empty()) throw ComputeError("nearest: empty target cloud");
    std::vector<std::size_t> perm(pts_.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    nodes_.reserve(pts_.size());
    root_ = build(perm, 0, pts_.size());
}

std::int32_t NearestNeighborIndex::build(std::vector<std::size_t>& perm, std::size_t lo,
                                         std::size_t hi) {
    if (lo >= hi) return -1;
    // Split along the widest extent of this subset; ties go to the lower axis.
    double mn[3], mx[3];
    for (int a = 0; a < 3; ++a) {
        mn[a] = std::numeric_limits<double>::infinity();
        mx[a] = -std::numeric_limits<double>::infinity();
    }
    for (std::size_t i = lo; i < hi; ++i) {
        const Point3& p = pts_[perm[i]];
        for (int a = 0; a < 3; ++a) {
            mn[a] = std::min(mn[a], coord(p, a));
            mx[a] = std::max(mx[a], coord(p, a));
        }
    }
    int axis = 0;
    for (int a = 1; a < 3; ++a)
        if (mx[a] - mn[a] > mx[axis] - mn[axis]) axis = a;

    const std::size_t mid = lo + (hi - lo) / 2;
    // Total order (coordinate, then original index): the median element is
    // unique, so the tree shape does not depend on nth_element internals.
    std::nth_element(perm.begin() + lo, perm.begin() + mid, perm.begin() + hi,
                     [&](std::size_t a, std::size_t b) {
                         const double ca = coord(pts_[a], axis);
                         const double cb = coord(pts_[b], axis);
                         if (ca != cb) return ca < cb;
                         return a < b;
                     });

    Node node;
    node.point = perm[mid];
    node.axis = axis;
    const std::int32_t self = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back(node);
    const std::int32_t left = build(perm, lo, mid);
    const std::int32_t right = build(perm, mid + 1, hi);
    nodes_[self].left = left;
    nodes_[self].right = right;
    return self;
}

void NearestNeighborIndex::search(std::int32_t ni, const Point3& q, Neighbor& best) const {
    const Node& node = nodes_[ni];
    const Point3& p = pts_[node.point];
    const double d2 = squared_distance(p, q);
    if (better(d2, node.point, best)) best = {node.point, d2};

    const double delta = coord(q, node.axis) - coord(p, node.axis);
    const std::int32_t near = delta < 0.0 ? node.left : node.right;
    const std::int32_t far = delta < 0.0 ? node.right : node.left;
    if (near >= 0) search(near, q, best);
    // <= keeps equal-distance candidates reachable so the index tie rule can
    // fire across the splitting plane.
    if (far >= 0 && delta * delta <= best.squared_distance) search(far, q, best);
}

Neighbor NearestNeighborIndex::nearest(const Point3& query) const {
    Neighbor best{pts_.size(), std::numeric_limits<double>::infinity()};
    search(root_, query, best);
    return best;
}

} // namespace clpc
