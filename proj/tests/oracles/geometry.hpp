#pragma once

// Lane strip geometry computed straight from the edge polylines, without the
// library's frame types.

#include <cmath>
#include <cstddef>

#include <Eigen/Dense>

#include "lanehmm/lanemap.hpp"

namespace oracle {

struct Strip {
    Eigen::Vector2d origin;  // right-edge point, (north, east)
    Eigen::Vector2d f_axis;  // unit normal toward the left edge
    double width = 0.0;
};

/// Segment of `lane` matching cross-section m of lane 1.
inline std::size_t own_segment(const lanehmm::RoadSegmentSet& set, std::size_t id, std::size_t m) {
    const auto& l1 = set.lane(1).right_edge;
    const auto& li = set.lane(id).right_edge;
    const bool against = (li[1] - li[0]).dot(l1[1] - l1[0]) < 0.0;
    return against ? li.size() - 2 - m : m;
}

inline Strip strip(const lanehmm::RoadSegmentSet& set, std::size_t id, std::size_t m) {
    const auto& lane = set.lane(id);
    const std::size_t seg = own_segment(set, id, m);
    const Eigen::Vector2d d = (lane.right_edge[seg + 1] - lane.right_edge[seg]).normalized();
    // (north, east) -> 90 degrees counter-clockwise seen from above
    const Eigen::Vector2d f(d.y(), -d.x());
    Strip s;
    s.origin = lane.right_edge[seg];
    s.f_axis = f;
    s.width = (lane.left_edge[seg] - lane.right_edge[seg]).dot(f);
    return s;
}

inline double lateral(const Strip& s, const Eigen::Vector2d& p) { return (p - s.origin).dot(s.f_axis); }
inline double lateral_sigma(const Strip& s, const Eigen::Matrix2d& c) { return std::sqrt(s.f_axis.dot(c * s.f_axis)); }

}  // namespace oracle
