#pragma once

#include <cstddef>
#include <vector>

#include "clpc/geometry.hpp"

namespace clpc {

struct Neighbor {
    std::size_t index = 0;
    double squared_distance = 0.0;
};

// Reference implementation: linear scan, ties broken toward the lowest index.
Neighbor brute_force_nearest(const PointCloud& target, const Point3& query);

// Balanced kd-tree over a fixed target cloud. Axis-median splits (widest
// extent axis, median by nth_element with index tie-break so the build is
// fully deterministic). Queries return the same neighbor as
// brute_force_nearest, including the lowest-index tie rule, and compute
// distances with the same arithmetic expression so the values match bitwise.
class NearestNeighborIndex {
public:
    explicit NearestNeighborIndex(const PointCloud& target);

    Neighbor nearest(const Point3& query) const;

    std::size_t size() const { return pts_.size(); }
    const PointCloud& points() const { return pts_; }

private:
    struct Node {
        std::size_t point = 0;   // index into pts_
        int axis = -1;           // -1 on leaves
        std::int32_t left = -1;  // node indices
        std::int32_t right = -1;
    };

    std::int32_t build(std::vector<std::size_t>& perm, std::size_t lo, std::size_t hi);
    void search(std::int32_t node, const Point3& q, Neighbor& best) const;

    PointCloud pts_;
    std::vector<Node> nodes_;
    std::int32_t root_ = -1;
};

} // namespace clpc
