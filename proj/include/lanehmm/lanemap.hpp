#pragma once

// Lane-level map model. Each road is a RoadSegmentSet of N lanes whose edge polylines
// share the same point count M, so segment m (points m and m+1, zero-based) refers to
// the same cross-section for every lane. Lanes flowing against lane 1 store their
// points in their own direction of travel; the set maps cross-section indices onto
// their reversed segment order. Off-road (index 0) has no geometry.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "lanehmm/error.hpp"
#include "lanehmm/geodesy.hpp"

namespace lanehmm {

inline constexpr double kMinSegmentLength = 0.01;  // m
inline constexpr double kMinLaneWidth = 0.5;       // m
inline constexpr double kMaxLaneWidth = 10.0;      // m

struct Lane {
    int id = 0;
    std::vector<Vec2> left_edge;   // (north, east), direction of travel
    std::vector<Vec2> right_edge;

    std::size_t point_count() const { return right_edge.size(); }
    std::size_t segment_count() const { return right_edge.empty() ? 0 : right_edge.size() - 1; }
    Vec2 segment_direction(std::size_t m) const { return right_edge[m + 1] - right_edge[m]; }
    double segment_length(std::size_t m) const { return segment_direction(m).norm(); }
};

/// Frame of segment m of a lane: origin at right-edge point m, s toward point m+1.
inline LaneFramePose lane_frame(const Lane& lane, std::size_t m) {
    if (m >= lane.segment_count()) {
        throw GeometryError("lane " + std::to_string(lane.id) + ": segment index " + std::to_string(m) +
                            " out of range");
    }
    return LaneFramePose::from_direction(lane.right_edge[m], lane.segment_direction(m));
}

/// Perpendicular distance from the right-edge line of segment m to left-edge point m.
inline double lane_width(const Lane& lane, std::size_t m) {
    return intersection_to_lane(lane.left_edge[m], lane_frame(lane, m)).y();
}

struct LateralBounds {
    double lo = 0.0;  // f of the lower edge in the reference frame
    double hi = 0.0;

    double width() const { return hi - lo; }
};

struct SegmentSelection {
    std::size_t m = 0;
    bool clamped = false;  // position fell before the first or after the last segment
};

class RoadSegmentSet {
public:
    RoadSegmentSet() = default;

    /// Lanes may arrive in any order; they are sorted by id. Throws GeometryError on
    /// any invariant violation.
    explicit RoadSegmentSet(std::vector<Lane> lanes, std::optional<bool> parallel_hint = std::nullopt,
                            std::string label = "road")
        : lanes_(std::move(lanes)) {
        std::sort(lanes_.begin(), lanes_.end(), [](const Lane& a, const Lane& b) { return a.id < b.id; });
        validate(label);
        reversed_.resize(lanes_.size());
        const Vec2 ref = lanes_.front().segment_direction(0);
        for (std::size_t i = 0; i < lanes_.size(); ++i) {
            reversed_[i] = lanes_[i].segment_direction(0).dot(ref) < 0.0;
        }
        parallel_ = compute_parallel();
        if (parallel_hint && *parallel_hint && !parallel_) {
            throw GeometryError(label + ": declared parallel but lane directions differ");
        }
    }

    std::size_t lane_count() const { return lanes_.size(); }
    std::size_t point_count() const { return lanes_.front().point_count(); }
    std::size_t segment_count() const { return point_count() - 1; }
    const std::vector<Lane>& lanes() const { return lanes_; }
    bool parallel() const { return parallel_; }

    /// Lane by 1-based id.
    const Lane& lane(std::size_t id) const { return lanes_.at(id - 1); }
    bool reversed(std::size_t id) const { return reversed_.at(id - 1); }

    /// Lane-local segment index matching cross-section m.
    std::size_t lane_segment(std::size_t id, std::size_t m) const {
        return reversed(id) ? segment_count() - 1 - m : m;
    }

    LaneFramePose frame(std::size_t id, std::size_t m) const { return lane_frame(lane(id), lane_segment(id, m)); }

    /// Bounds of lane `id` in its own frame at cross-section m: (0, width).
    LateralBounds own_bounds(std::size_t id, std::size_t m) const {
        return {0.0, lane_width(lane(id), lane_segment(id, m))};
    }

private:
    void validate(const std::string& label) const {
        if (lanes_.empty()) throw GeometryError(label + ": no lanes");
        const std::size_t points = lanes_.front().right_edge.size();
        for (std::size_t i = 0; i < lanes_.size(); ++i) {
            const Lane& lane = lanes_[i];
            const std::string name = label + " lane " + std::to_string(lane.id);
            if (lane.id != static_cast<int>(i + 1)) {
                throw GeometryError(label + ": lane ids must be contiguous 1..N (found " + std::to_string(lane.id) +
                                    ")");
            }
            if (lane.left_edge.size() != lane.right_edge.size()) {
                throw GeometryError(name + ": left/right edge point counts differ (" +
                                    std::to_string(lane.left_edge.size()) + " vs " +
                                    std::to_string(lane.right_edge.size()) + ")");
            }
            if (lane.right_edge.size() < 2) throw GeometryError(name + ": needs at least 2 points per edge");
            if (lane.right_edge.size() != points) {
                throw GeometryError(name + ": point count differs from lane 1 (segments must be aligned)");
            }
            for (const auto* edge : {&lane.left_edge, &lane.right_edge}) {
                for (const Vec2& p : *edge) {
                    if (!p.allFinite()) throw GeometryError(name + ": non-finite edge coordinate");
                }
            }
            for (std::size_t m = 0; m < lane.segment_count(); ++m) {
                const std::string seg = name + " segment " + std::to_string(m);
                if (lane.segment_length(m) <= kMinSegmentLength) {
                    throw GeometryError(seg + ": right-edge points coincide");
                }
                const LaneFramePose pose = lane_frame(lane, m);
                for (const Vec2& left : {lane.left_edge[m], lane.left_edge[m + 1]}) {
                    const double w = intersection_to_lane(left, pose).y();
                    if (!(w > kMinLaneWidth && w < kMaxLaneWidth)) {
                        std::ostringstream os;
                        os << seg << ": width " << w << " m outside (" << kMinLaneWidth << ", " << kMaxLaneWidth
                           << ")";
                        throw GeometryError(os.str());
                    }
                }
            }
        }
    }

    bool compute_parallel() const {
        for (std::size_t m = 0; m < segment_count(); ++m) {
            const double ref = frame(1, m).alpha;
            for (std::size_t id = 2; id <= lanes_.size(); ++id) {
                const double d = std::remainder(frame(id, m).alpha - ref, std::numbers::pi);
                if (std::abs(d) > 1e-9) return false;
            }
        }
        return true;
    }

    std::vector<Lane> lanes_;
    std::vector<bool> reversed_;
    bool parallel_ = true;
};

/// f-coordinates of lane `id`'s edges at cross-section m, expressed in `reference`.
inline LateralBounds lateral_bounds(const RoadSegmentSet& set, std::size_t id, std::size_t m,
                                    const LaneFramePose& reference) {
    const Lane& lane = set.lane(id);
    const std::size_t own = set.lane_segment(id, m);
    const double right = intersection_to_lane(lane.right_edge[own], reference).y();
    const double left = intersection_to_lane(lane_to_intersection(Vec2(0.0, lane_width(lane, own)),
                                                                  lane_frame(lane, own)),
                                             reference).y();
    return {std::min(right, left), std::max(right, left)};
}

/// Segment m such that s >= 0 in the frame of segment m and s < 0 relative to the
/// next waypoint, evaluated along lane 1. Out-of-extent positions clamp to the nearest
/// end segment and set the flag.
inline SegmentSelection select_segment(const RoadSegmentSet& set, const Vec2& p_g) {
    const Lane& lane = set.lane(1);
    const std::size_t segments = lane.segment_count();
    auto s_at = [&](std::size_t point) {
        const std::size_t dir_seg = std::min(point, segments - 1);
        const Vec2 dir = lane.segment_direction(dir_seg).normalized();
        return dir.dot(p_g - lane.right_edge[point]);
    };
    double s_here = s_at(0);
    const bool before_start = s_here < 0.0;
    for (std::size_t m = 0; m < segments; ++m) {
        const double s_next = s_at(m + 1);
        if (s_here >= 0.0 && s_next < 0.0) return {m, false};
        s_here = s_next;
    }
    return {before_start ? 0 : segments - 1, true};
}

struct RoadLocation {
    std::size_t road = 0;
    SegmentSelection segment;
};

struct LaneMap {
    GeodeticCoord origin;
    IntersectionFrame frame;
    std::vector<RoadSegmentSet> roads;

    /// First road whose extent contains p_g; otherwise the road with the closest lane-1
    /// waypoint, clamped.
    RoadLocation locate(const Vec2& p_g) const {
        if (roads.empty()) throw GeometryError("map has no roads");
        for (std::size_t r = 0; r < roads.size(); ++r) {
            const SegmentSelection sel = select_segment(roads[r], p_g);
            if (!sel.clamped) return {r, sel};
        }
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t r = 0; r < roads.size(); ++r) {
            for (const Vec2& q : roads[r].lane(1).right_edge) {
                const double d = (q - p_g).squaredNorm();
                if (d < best_d) {
                    best_d = d;
                    best = r;
                }
            }
        }
        return {best, select_segment(roads[best], p_g)};
    }
};

namespace detail {

inline const nlohmann::json& require(const nlohmann::json& obj, const char* key, const std::string& path) {
    if (!obj.is_object()) throw SchemaError(path + ": expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) throw SchemaError(path + "." + key + ": missing field");
    return *it;
}

inline double require_number(const nlohmann::json& obj, const char* key, const std::string& path) {
    const auto& v = require(obj, key, path);
    if (!v.is_number()) throw SchemaError(path + "." + key + ": expected a number");
    return v.get<double>();
}

inline std::vector<Vec2> parse_polyline(const nlohmann::json& v, const std::string& path) {
    if (!v.is_array()) throw SchemaError(path + ": expected an array of [n, e] pairs");
    std::vector<Vec2> out;
    out.reserve(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const auto& p = v[i];
        if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
            throw SchemaError(path + "[" + std::to_string(i) + "]: expected [n, e] numbers");
        }
        out.emplace_back(p[0].get<double>(), p[1].get<double>());
    }
    return out;
}

}  // namespace detail

/// Parses and validates the map JSON document:
/// { "origin": {"lat_deg","lon_deg","alt_m"},
///   "roads": [ { "lanes": [ { "id", "left_edge": [[n,e],...], "right_edge": [[n,e],...] } ],
///                "parallel": optional bool } ] }
inline LaneMap load_map(std::string_view text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError(std::string("map: invalid JSON: ") + e.what());
    }
    LaneMap map;
    const auto& origin = detail::require(doc, "origin", "map");
    map.origin = GeodeticCoord::from_degrees(detail::require_number(origin, "lat_deg", "map.origin"),
                                             detail::require_number(origin, "lon_deg", "map.origin"),
                                             detail::require_number(origin, "alt_m", "map.origin"));
    map.frame = IntersectionFrame::from_geodetic(map.origin);
    const auto& roads = detail::require(doc, "roads", "map");
    if (!roads.is_array() || roads.empty()) throw SchemaError("map.roads: expected a non-empty array");
    for (std::size_t r = 0; r < roads.size(); ++r) {
        const std::string rpath = "map.roads[" + std::to_string(r) + "]";
        const auto& lanes_json = detail::require(roads[r], "lanes", rpath);
        if (!lanes_json.is_array() || lanes_json.empty()) {
            throw SchemaError(rpath + ".lanes: expected a non-empty array");
        }
        std::vector<Lane> lanes;
        for (std::size_t i = 0; i < lanes_json.size(); ++i) {
            const std::string lpath = rpath + ".lanes[" + std::to_string(i) + "]";
            const auto& id = detail::require(lanes_json[i], "id", lpath);
            if (!id.is_number_integer() || id.get<long long>() < 1) {
                throw SchemaError(lpath + ".id: expected a positive integer");
            }
            Lane lane;
            lane.id = id.get<int>();
            lane.left_edge = detail::parse_polyline(detail::require(lanes_json[i], "left_edge", lpath),
                                                    lpath + ".left_edge");
            lane.right_edge = detail::parse_polyline(detail::require(lanes_json[i], "right_edge", lpath),
                                                     lpath + ".right_edge");
            lanes.push_back(std::move(lane));
        }
        std::optional<bool> hint;
        if (auto it = roads[r].find("parallel"); it != roads[r].end()) {
            if (!it->is_boolean()) throw SchemaError(rpath + ".parallel: expected a boolean");
            hint = it->get<bool>();
        }
        map.roads.emplace_back(std::move(lanes), hint, "road " + std::to_string(r));
    }
    return map;
}

inline LaneMap load_map_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open map file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return load_map(ss.str());
}

inline nlohmann::json map_to_json(const LaneMap& map) {
    constexpr double r2d = 180.0 / std::numbers::pi;
    nlohmann::json doc;
    doc["origin"] = {{"lat_deg", map.origin.latitude * r2d},
                     {"lon_deg", map.origin.longitude * r2d},
                     {"alt_m", map.origin.altitude}};
    doc["roads"] = nlohmann::json::array();
    for (const auto& road : map.roads) {
        nlohmann::json lanes = nlohmann::json::array();
        for (const auto& lane : road.lanes()) {
            auto poly = [](const std::vector<Vec2>& pts) {
                nlohmann::json a = nlohmann::json::array();
                for (const Vec2& p : pts) a.push_back({p.x(), p.y()});
                return a;
            };
            lanes.push_back({{"id", lane.id}, {"left_edge", poly(lane.left_edge)}, {"right_edge", poly(lane.right_edge)}});
        }
        doc["roads"].push_back({{"lanes", lanes}});
    }
    return doc;
}

}  // namespace lanehmm
