#include <cmath>
#include <numbers>
#include <string>

#include <gtest/gtest.h>

#include "lanehmm/lanemap.hpp"
#include "lanehmm/simulate.hpp"
#include "test_util.hpp"

using namespace lanehmm;

namespace {

const char* kOneLane = R"({
  "origin": {"lat_deg": 34.0, "lon_deg": -117.36, "alt_m": 300.0},
  "roads": [ { "lanes": [ { "id": 1,
      "right_edge": [[0, 0], [0, 30]],
      "left_edge": [[3.5, 0], [3.5, 30]] } ] } ]
})";

std::string error_of(const std::string& text) {
    try {
        load_map(text);
    } catch (const Error& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST(LoadMap, MinimalOneLane) {
    const LaneMap map = load_map(kOneLane);
    ASSERT_EQ(map.roads.size(), 1u);
    EXPECT_EQ(map.roads[0].lane_count(), 1u);
    EXPECT_EQ(map.roads[0].segment_count(), 1u);
    EXPECT_NEAR(lane_width(map.roads[0].lane(1), 0), 3.5, 1e-12);
}

TEST(LoadMap, EdgeLengthMismatchNamesLane) {
    const std::string text = R"({"origin": {"lat_deg": 0, "lon_deg": 0, "alt_m": 0},
      "roads": [{"lanes": [{"id": 1, "right_edge": [[0,0],[0,30]], "left_edge": [[3.5,0],[3.5,30],[3.5,60]]}]}]})";
    const std::string msg = error_of(text);
    EXPECT_NE(msg.find("lane 1"), std::string::npos) << msg;
}

TEST(LoadMap, SchemaErrorsNamePath) {
    EXPECT_NE(error_of(R"({"roads": []})").find("map.origin"), std::string::npos);
    const std::string bad_point = R"({"origin": {"lat_deg": 0, "lon_deg": 0, "alt_m": 0},
      "roads": [{"lanes": [{"id": 1, "right_edge": [[0,0],[0]], "left_edge": [[3.5,0],[3.5,30]]}]}]})";
    EXPECT_NE(error_of(bad_point).find("map.roads[0].lanes[0].right_edge[1]"), std::string::npos);
    EXPECT_NE(error_of("{not json").find("invalid JSON"), std::string::npos);
}

TEST(LoadMap, GeometryErrorsNameSegment) {
    const std::string narrow = R"({"origin": {"lat_deg": 0, "lon_deg": 0, "alt_m": 0},
      "roads": [{"lanes": [{"id": 1, "right_edge": [[0,0],[0,30],[0,60]], "left_edge": [[3.5,0],[0.2,30],[3.5,60]]}]}]})";
    const std::string msg = error_of(narrow);
    EXPECT_NE(msg.find("segment"), std::string::npos) << msg;
    EXPECT_NE(msg.find("width"), std::string::npos) << msg;

    const std::string gap_ids = R"({"origin": {"lat_deg": 0, "lon_deg": 0, "alt_m": 0},
      "roads": [{"lanes": [{"id": 2, "right_edge": [[0,0],[0,30]], "left_edge": [[3.5,0],[3.5,30]]}]}]})";
    EXPECT_NE(error_of(gap_ids).find("contiguous"), std::string::npos);
}

TEST(LoadMap, ParallelHintMustHold) {
    nlohmann::json doc = map_to_json(make_exit_ramp_map());
    doc["roads"][0]["parallel"] = true;
    EXPECT_THROW(load_map(doc.dump()), GeometryError);
    doc["roads"][0]["parallel"] = false;
    EXPECT_NO_THROW(load_map(doc.dump()));
}

TEST(LoadMap, JsonRoundTrip) {
    const LaneMap a = make_four_lane_map();
    const LaneMap b = load_map(map_to_json(a).dump());
    ASSERT_EQ(b.roads[0].lane_count(), 4u);
    for (std::size_t id = 1; id <= 4; ++id) {
        for (std::size_t p = 0; p < a.roads[0].point_count(); ++p) {
            EXPECT_LT((a.roads[0].lane(id).left_edge[p] - b.roads[0].lane(id).left_edge[p]).norm(), 1e-9);
        }
    }
}

TEST(FourLaneMap, LayoutAndMedian) {
    const LaneMap map = make_four_lane_map();
    const RoadSegmentSet& set = map.roads[0];
    ASSERT_EQ(set.lane_count(), 4u);
    EXPECT_TRUE(set.parallel());
    EXPECT_FALSE(set.reversed(1));
    EXPECT_FALSE(set.reversed(2));
    EXPECT_TRUE(set.reversed(3));
    EXPECT_TRUE(set.reversed(4));
    const auto ref = set.frame(1, 10);
    const LateralBounds b1 = lateral_bounds(set, 1, 10, ref);
    const LateralBounds b2 = lateral_bounds(set, 2, 10, ref);
    const LateralBounds b3 = lateral_bounds(set, 3, 10, ref);
    EXPECT_NEAR(b1.lo, 0.0, 1e-9);
    EXPECT_NEAR(b1.hi, 3.6, 1e-9);
    EXPECT_NEAR(b2.lo, 3.6, 1e-9);
    EXPECT_NEAR(b2.hi, 7.2, 1e-9);
    EXPECT_GT(b3.lo, b2.hi + 1.0);
}

TEST(LateralBounds, ContiguousAndMatchWidth) {
    const auto set = testutil::parallel_set(0.4, {3.2, 3.5, 3.7}, {0.0, 0.0});
    for (std::size_t m = 0; m < set.segment_count(); ++m) {
        const auto ref = set.frame(1, m);
        for (std::size_t id = 2; id <= 3; ++id) {
            EXPECT_NEAR(lateral_bounds(set, id, m, ref).lo, lateral_bounds(set, id - 1, m, ref).hi, 1e-9);
        }
        EXPECT_NEAR(lateral_bounds(set, 2, m, ref).width(), 3.5, 1e-6);
        EXPECT_NEAR(lateral_bounds(set, 1, m, set.frame(1, m)).lo, 0.0, 1e-12);
    }
}

TEST(LaneFrameOfLane, Orientation) {
    const auto set = testutil::parallel_set(0.0, {3.6}, {});
    EXPECT_NEAR(set.frame(1, 0).alpha, 0.0, 1e-12);
    const auto diag = testutil::parallel_set(std::numbers::pi / 4.0, {3.6}, {});
    EXPECT_NEAR(diag.frame(1, 2).alpha, std::numbers::pi / 4.0, 1e-12);
    EXPECT_THROW(lane_frame(set.lane(1), set.segment_count()), GeometryError);
}

TEST(SelectSegment, BoundariesAndClamp) {
    const auto set = testutil::parallel_set(0.3, {3.6, 3.6}, {0.0}, 6, 20.0);
    const auto& right = set.lane(1).right_edge;
    EXPECT_EQ(select_segment(set, right[2]).m, 2u);
    EXPECT_FALSE(select_segment(set, right[2]).clamped);
    const Vec2 mid = 0.5 * (right[3] + right[4]) + set.frame(1, 3).f_axis() * 1.8;
    EXPECT_EQ(select_segment(set, mid).m, 3u);
    const Vec2 beyond = right.back() + (right.back() - right[4]);
    const auto sel = select_segment(set, beyond);
    EXPECT_EQ(sel.m, set.segment_count() - 1);
    EXPECT_TRUE(sel.clamped);
    const auto before = select_segment(set, right[0] - (right[1] - right[0]));
    EXPECT_EQ(before.m, 0u);
    EXPECT_TRUE(before.clamped);
}

TEST(SelectSegment, UniqueOverDenseSweep) {
    const LaneMap map = make_four_lane_map();
    const RoadSegmentSet& set = map.roads[0];
    const auto ref = set.frame(1, 0);
    const auto& lane = set.lane(1);
    for (double x = 0.5; x < 1999.9; x += 3.7) {
        for (double y : {-2.0, 1.0, 9.0, 17.0}) {
            const Vec2 p = lane_to_intersection({x, y}, ref);
            int hits = 0;
            for (std::size_t m = 0; m < set.segment_count(); ++m) {
                const double s0 = intersection_to_lane(p, lane_frame(lane, m)).x();
                const double s1 = lane.segment_direction(m).normalized().dot(p - lane.right_edge[m + 1]);
                if (s0 >= 0.0 && s1 < 0.0) ++hits;
            }
            EXPECT_EQ(hits, 1) << x;
            const auto sel = select_segment(set, p);
            EXPECT_FALSE(sel.clamped) << x << "," << y;
            EXPECT_EQ(sel.m, static_cast<std::size_t>(std::floor(x / 20.0)));
        }
    }
}

TEST(LaneMapLocate, PicksContainingRoad) {
    LaneMap map = make_four_lane_map();
    const auto shifted = testutil::parallel_set(0.0, {3.6}, {}, 5, 20.0);
    map.roads.push_back(shifted);
    const Vec2 on_second = shifted.lane(1).right_edge[1] + Vec2(1.0, 5.0);
    const RoadLocation loc = map.locate(on_second);
    EXPECT_FALSE(loc.segment.clamped);
}
