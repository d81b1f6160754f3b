#pragma once

// Center-line distance baseline: over each window of the last d observations, pick
// the lane whose center line is closest on average and assign it to every epoch of
// the window. Later windows overwrite earlier ones. The baseline has no off-road
// state, so it always reports some lane.

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "lanehmm/error.hpp"
#include "lanehmm/io.hpp"
#include "lanehmm/lanemap.hpp"

namespace lanehmm {

/// |f - w/2| in the lane's own frame at the cross-section containing p_g.
inline double centerline_distance(const RoadSegmentSet& set, std::size_t id, std::size_t m, const Vec2& p_g) {
    const double f = intersection_to_lane(p_g, set.frame(id, m)).y();
    return std::abs(f - 0.5 * set.own_bounds(id, m).width());
}

inline std::vector<int> centerline_baseline(const std::vector<Observation>& obs, const LaneMap& map, std::size_t d) {
    if (d < 1) throw ModelError("centerline_baseline: d must be >= 1");
    const std::size_t n = obs.size();
    std::vector<RoadLocation> loc(n);
    for (std::size_t k = 0; k < n; ++k) loc[k] = map.locate(obs[k].est.p_hat);

    std::vector<int> lanes(n, 0);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t first = k + 1 >= d ? k + 1 - d : 0;
        // the candidate lanes are those of the newest epoch's road
        const RoadSegmentSet& set = map.roads[loc[k].road];
        int best = 1;
        double best_err = std::numeric_limits<double>::infinity();
        for (std::size_t id = 1; id <= set.lane_count(); ++id) {
            double err = 0.0;
            for (std::size_t s = first; s <= k; ++s) {
                const RoadSegmentSet& here = map.roads[loc[s].road];
                const std::size_t lane_id = std::min(id, here.lane_count());
                err += centerline_distance(here, lane_id, loc[s].segment.m, obs[s].est.p_hat);
            }
            err /= static_cast<double>(k - first + 1);
            if (err < best_err) {
                best_err = err;
                best = static_cast<int>(id);
            }
        }
        for (std::size_t s = first; s <= k; ++s) lanes[s] = best;
    }
    return lanes;
}

}  // namespace lanehmm
