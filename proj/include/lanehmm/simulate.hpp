#pragma once

// Synthetic trips over a straight multi-lane road.
//
// Motion is generated in lane 1's frame at segment 0: x along the road, y lateral.
// The vehicle follows lane centers of the through lanes (lanes parallel to lane 1
// over the whole road), changes lanes with a sinusoidal lateral blend, and turns
// around through the median when asked to or when it approaches the end of the road.
// Randomness is drawn from per-epoch generators seeded from (seed, stream, epoch), so
// any epoch can be regenerated independently of how many draws earlier epochs used.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "lanehmm/error.hpp"
#include "lanehmm/geodesy.hpp"
#include "lanehmm/io.hpp"
#include "lanehmm/lanemap.hpp"

namespace lanehmm {

struct OffroadEpisode {
    long start = 0;     // epoch at which the turn-around is requested
    long duration = 4;  // epochs spent in the median
};

struct SimConfig {
    std::uint64_t seed = 1;
    long epochs = 2000;
    double sample_period = 1.0;  // s
    double speed_min = 12.0;     // m/s
    double speed_max = 20.0;
    double speed_walk_sigma = 0.5;  // m/s per sqrt(s)
    double lane_change_rate = 2.0;  // events per minute
    double lane_change_duration = 3.0;  // s
    double uturn_transition = 3.0;      // s for entering and for leaving the median
    double uturn_speed = 4.0;           // m/s while in the median
    long auto_uturn_duration = 4;       // median epochs of automatic turn-arounds
    bool auto_uturn = true;
    std::vector<OffroadEpisode> offroad_episodes;
    double noise_sigma_pos = 0.55;  // m, target mean horizontal error
    double noise_sigma_vel = 0.1;   // m/s per axis
    double sigma_jitter = 0.2;      // per-epoch sigma scale drawn from [1-j, 1+j]
    double start_x = 100.0;         // m along lane 1
    int start_lane = 1;

    void validate() const {
        auto fail = [](const std::string& what) { throw SchemaError("sim config: " + what); };
        if (epochs < 1) fail("epochs must be positive");
        if (!(sample_period > 0.0)) fail("sample_period_s must be positive");
        if (!(speed_min > 0.0) || speed_max < speed_min) fail("speed bounds must satisfy 0 < min <= max");
        if (speed_walk_sigma < 0.0 || lane_change_rate < 0.0) fail("rates must be nonnegative");
        if (!(lane_change_duration > 0.0) || !(uturn_transition > 0.0) || !(uturn_speed > 0.0)) {
            fail("maneuver durations and speeds must be positive");
        }
        if (auto_uturn_duration < 1) fail("auto_uturn_duration must be >= 1");
        if (noise_sigma_pos < 0.0 || noise_sigma_vel < 0.0) fail("noise sigmas must be nonnegative");
        if (sigma_jitter < 0.0 || sigma_jitter >= 1.0) fail("sigma_jitter must be in [0, 1)");
        for (const auto& e : offroad_episodes) {
            if (e.start < 0 || e.start >= epochs || e.duration < 1) fail("off-road episode outside the epoch range");
        }
    }

    static SimConfig from_json(const nlohmann::json& j) {
        if (!j.is_object()) throw SchemaError("sim config: expected an object");
        SimConfig c;
        auto num = [&](const char* key, double& dst) {
            if (!j.contains(key)) return;
            if (!j[key].is_number()) throw SchemaError(std::string("sim config.") + key + ": expected a number");
            dst = j[key].get<double>();
        };
        auto integer = [&](const char* key, auto& dst) {
            if (!j.contains(key)) return;
            if (!j[key].is_number_integer()) throw SchemaError(std::string("sim config.") + key + ": expected an integer");
            dst = j[key].get<std::remove_reference_t<decltype(dst)>>();
        };
        integer("seed", c.seed);
        integer("epochs", c.epochs);
        num("sample_period_s", c.sample_period);
        if (j.contains("speed_profile")) {
            const auto& s = j["speed_profile"];
            if (!s.is_array() || s.size() != 2 || !s[0].is_number() || !s[1].is_number()) {
                throw SchemaError("sim config.speed_profile: expected [min, max]");
            }
            c.speed_min = s[0].get<double>();
            c.speed_max = s[1].get<double>();
        }
        num("speed_walk_sigma", c.speed_walk_sigma);
        num("lane_change_rate_per_min", c.lane_change_rate);
        num("lane_change_duration_s", c.lane_change_duration);
        num("uturn_transition_s", c.uturn_transition);
        num("uturn_speed_mps", c.uturn_speed);
        integer("auto_uturn_duration", c.auto_uturn_duration);
        if (j.contains("auto_uturn")) {
            if (!j["auto_uturn"].is_boolean()) throw SchemaError("sim config.auto_uturn: expected a boolean");
            c.auto_uturn = j["auto_uturn"].get<bool>();
        }
        if (j.contains("offroad_episodes")) {
            const auto& eps = j["offroad_episodes"];
            if (!eps.is_array()) throw SchemaError("sim config.offroad_episodes: expected an array");
            for (const auto& e : eps) {
                if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number_integer()) {
                    throw SchemaError("sim config.offroad_episodes: entries must be [start, duration]");
                }
                c.offroad_episodes.push_back({e[0].get<long>(), e[1].get<long>()});
            }
        }
        num("noise_sigma_pos", c.noise_sigma_pos);
        num("noise_sigma_vel", c.noise_sigma_vel);
        num("sigma_jitter", c.sigma_jitter);
        num("start_x_m", c.start_x);
        integer("start_lane", c.start_lane);
        c.validate();
        return c;
    }

    nlohmann::json to_json() const {
        nlohmann::json eps = nlohmann::json::array();
        for (const auto& e : offroad_episodes) eps.push_back({e.start, e.duration});
        return {{"seed", seed},
                {"epochs", epochs},
                {"sample_period_s", sample_period},
                {"speed_profile", {speed_min, speed_max}},
                {"speed_walk_sigma", speed_walk_sigma},
                {"lane_change_rate_per_min", lane_change_rate},
                {"lane_change_duration_s", lane_change_duration},
                {"uturn_transition_s", uturn_transition},
                {"uturn_speed_mps", uturn_speed},
                {"auto_uturn_duration", auto_uturn_duration},
                {"auto_uturn", auto_uturn},
                {"offroad_episodes", eps},
                {"noise_sigma_pos", noise_sigma_pos},
                {"noise_sigma_vel", noise_sigma_vel},
                {"sigma_jitter", sigma_jitter},
                {"start_x_m", start_x},
                {"start_lane", start_lane}};
    }
};

struct SimResult {
    TruthSequence truth;
    std::vector<Observation> observations;
    double mean_horizontal_error = 0.0;
    std::size_t offroad_episodes = 0;  // maximal runs of consecutive off-road truth epochs
};

// ---------------------------------------------------------------------------
// map builders

struct RoadLayout {
    double bearing_alpha = std::numbers::pi / 6.0;  // s-axis angle from east, CCW
    Vec2 start_g = Vec2::Zero();
    double lane_width = 3.6;
    double median_width = 4.0;
    double length = 2000.0;
    double segment_length = 20.0;
    bool exit_ramp = false;
    double ramp_start = 800.0;                            // m along the road
    double ramp_angle = 6.0 * std::numbers::pi / 180.0;  // divergence to the right
};

namespace detail {

inline Lane straight_lane(const RoadLayout& L, int id, double y_right, double y_left, bool reversed) {
    const LaneFramePose ref = LaneFramePose::from_alpha(L.start_g, L.bearing_alpha);
    const auto points = static_cast<std::size_t>(std::llround(L.length / L.segment_length)) + 1;
    Lane lane;
    lane.id = id;
    for (std::size_t p = 0; p < points; ++p) {
        const std::size_t q = reversed ? points - 1 - p : p;
        const double x = static_cast<double>(q) * L.segment_length;
        lane.right_edge.push_back(lane_to_intersection({x, y_right}, ref));
        lane.left_edge.push_back(lane_to_intersection({x, y_left}, ref));
    }
    return lane;
}

inline Lane ramp_lane(const RoadLayout& L, int id) {
    const LaneFramePose ref = LaneFramePose::from_alpha(L.start_g, L.bearing_alpha);
    const auto points = static_cast<std::size_t>(std::llround(L.length / L.segment_length)) + 1;
    const double t = std::tan(L.ramp_angle);
    const double w = L.lane_width;
    Lane lane;
    lane.id = id;
    for (std::size_t p = 0; p < points; ++p) {
        const double x = static_cast<double>(p) * L.segment_length;
        const double shift = x > L.ramp_start ? (x - L.ramp_start) * t : 0.0;
        lane.right_edge.push_back(lane_to_intersection({x, -w - shift}, ref));
        lane.left_edge.push_back(lane_to_intersection({x, -shift}, ref));
    }
    return lane;
}

}  // namespace detail

/// Two lanes per direction around a median. Lanes 1 and 2 run along +s (lane 1 on the
/// right), lanes 3 and 4 run against it with lane 3 next to the median. The exit-ramp
/// variant adds lane 5 to the right of lane 1, diverging after ramp_start.
inline LaneMap make_road_map(const RoadLayout& L) {
    const double w = L.lane_width;
    const double y_med = 2.0 * w + L.median_width;
    std::vector<Lane> lanes;
    lanes.push_back(detail::straight_lane(L, 1, 0.0, w, false));
    lanes.push_back(detail::straight_lane(L, 2, w, 2.0 * w, false));
    lanes.push_back(detail::straight_lane(L, 3, y_med + w, y_med, true));
    lanes.push_back(detail::straight_lane(L, 4, y_med + 2.0 * w, y_med + w, true));
    if (L.exit_ramp) lanes.push_back(detail::ramp_lane(L, 5));
    LaneMap map;
    map.origin = GeodeticCoord::from_degrees(34.0, -117.36, 300.0);
    map.frame = IntersectionFrame::from_geodetic(map.origin);
    map.roads.emplace_back(std::move(lanes), std::nullopt, L.exit_ramp ? "exit-ramp road" : "four-lane road");
    return map;
}

inline LaneMap make_four_lane_map() { return make_road_map(RoadLayout{}); }

inline LaneMap make_exit_ramp_map() {
    RoadLayout L;
    L.exit_ramp = true;
    return make_road_map(L);
}

// ---------------------------------------------------------------------------
// random streams

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

enum class Stream : std::uint64_t { Kinematics = 1, Noise = 2 };

inline std::mt19937_64 epoch_rng(std::uint64_t seed, Stream stream, long k) {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ static_cast<std::uint64_t>(stream));
    h = splitmix64(h ^ static_cast<std::uint64_t>(k));
    return std::mt19937_64(h);
}

struct ThroughLane {
    int id = 0;
    double lo = 0.0, hi = 0.0;  // lateral bounds in the reference frame
    bool reversed = false;
    double center() const { return 0.5 * (lo + hi); }
};

struct RoadModel {
    LaneFramePose ref;
    double length = 0.0;
    std::vector<ThroughLane> forward, backward;  // ordered by increasing y
    const RoadSegmentSet* set = nullptr;

    const ThroughLane& lane(int id) const {
        for (const auto* group : {&forward, &backward}) {
            for (const auto& l : *group) {
                if (l.id == id) return l;
            }
        }
        throw SchemaError("sim config: start_lane " + std::to_string(id) + " is not a through lane");
    }
    /// the through lane of each direction that borders the median
    const ThroughLane* median_lane(bool reversed) const {
        if (reversed) return backward.empty() ? nullptr : &backward.front();
        return forward.empty() ? nullptr : &forward.back();
    }
};

inline RoadModel road_model(const LaneMap& map) {
    if (map.roads.empty()) throw GeometryError("simulate: map has no roads");
    const RoadSegmentSet& set = map.roads.front();
    RoadModel rm;
    rm.set = &set;
    rm.ref = set.frame(1, 0);
    const std::size_t segs = set.segment_count();
    for (std::size_t m = 0; m < segs; ++m) {
        if (std::abs(std::remainder(set.frame(1, m).alpha - rm.ref.alpha, 2.0 * std::numbers::pi)) > 1e-9) {
            throw GeometryError("simulate: lane 1 must be straight");
        }
    }
    rm.length = intersection_to_lane(set.lane(1).right_edge.back(), rm.ref).x();
    for (std::size_t id = 1; id <= set.lane_count(); ++id) {
        bool through = true;
        for (std::size_t m = 0; m < segs && through; ++m) {
            through = std::abs(std::remainder(set.frame(id, m).alpha - rm.ref.alpha, std::numbers::pi)) <= 1e-9;
        }
        if (!through) continue;
        const LateralBounds b = lateral_bounds(set, id, 0, rm.ref);
        ThroughLane tl{static_cast<int>(id), b.lo, b.hi, set.reversed(id)};
        (tl.reversed ? rm.backward : rm.forward).push_back(tl);
    }
    auto by_y = [](const ThroughLane& a, const ThroughLane& b) { return a.lo < b.lo; };
    std::sort(rm.forward.begin(), rm.forward.end(), by_y);
    std::sort(rm.backward.begin(), rm.backward.end(), by_y);
    if (rm.forward.empty()) throw GeometryError("simulate: no through lane runs along lane 1");
    return rm;
}

/// Lane containing p in that lane's own frame at the selected cross-section; 0 if none.
inline int containing_lane(const RoadSegmentSet& set, const Vec2& p_g) {
    const std::size_t m = select_segment(set, p_g).m;
    for (std::size_t id = 1; id <= set.lane_count(); ++id) {
        const double f = intersection_to_lane(p_g, set.frame(id, m)).y();
        const LateralBounds b = set.own_bounds(id, m);
        if (f >= b.lo && f <= b.hi) return static_cast<int>(id);
    }
    return 0;
}

inline double smooth_blend(double tau) { return 0.5 * (1.0 - std::cos(std::numbers::pi * tau)); }
inline double smooth_blend_rate(double tau) { return 0.5 * std::numbers::pi * std::sin(std::numbers::pi * tau); }

}  // namespace detail

/// Generates truth and noisy observations. Deterministic in (map, cfg).
inline SimResult simulate(const LaneMap& map, const SimConfig& cfg) {
    cfg.validate();
    using namespace detail;
    const RoadModel rm = road_model(map);
    const double T = cfg.sample_period;
    const long n_lc = std::max(1L, std::lround(cfg.lane_change_duration / T));
    const long n_ut = std::max(1L, std::lround(cfg.uturn_transition / T));

    enum class Phase { Cruise, LaneChange, UturnEntry, UturnMedian, UturnExit };
    Phase phase = Phase::Cruise;
    const ThroughLane* current = &rm.lane(cfg.start_lane);
    const ThroughLane* target = current;
    long phase_start = 0, phase_len = 0;
    double x = cfg.start_x;
    double speed = 0.5 * (cfg.speed_min + cfg.speed_max);
    double dir = current->reversed ? -1.0 : 1.0;
    double y_from = current->center(), y_to = y_from;
    double v_from = speed, v_to = speed, v_resume = speed;
    long median_len = cfg.auto_uturn_duration;
    bool uturn_pending = false;
    std::vector<OffroadEpisode> requests = cfg.offroad_episodes;
    std::sort(requests.begin(), requests.end(), [](auto& a, auto& b) { return a.start < b.start; });
    std::size_t next_request = 0;

    const double y_median = [&] {
        const ThroughLane* f = rm.median_lane(false);
        const ThroughLane* b = rm.median_lane(true);
        return b ? 0.5 * (f->hi + b->lo) : f->hi;
    }();
    // along-road distance needed to complete a turn-around including one epoch of delay
    auto uturn_distance = [&](long median_epochs) {
        return speed * T + n_ut * T * 0.5 * (speed + cfg.uturn_speed) +
               cfg.uturn_speed * static_cast<double>(median_epochs) * T / std::numbers::pi + 20.0;
    };
    auto remaining = [&] { return dir > 0 ? rm.length - x : x; };
    auto neighbors = [&](const ThroughLane* l) {
        const auto& group = l->reversed ? rm.backward : rm.forward;
        std::vector<const ThroughLane*> out;
        for (std::size_t i = 0; i < group.size(); ++i) {
            if (group[i].id != l->id) continue;
            if (i > 0) out.push_back(&group[i - 1]);
            if (i + 1 < group.size()) out.push_back(&group[i + 1]);
        }
        return out;
    };
    auto start_lane_change = [&](long k, const ThroughLane* to) {
        phase = Phase::LaneChange;
        phase_start = k;
        phase_len = n_lc;
        y_from = current->center();
        y_to = to->center();
        target = to;
    };
    auto start_uturn = [&](long k, long median_epochs) {
        const ThroughLane* opposite = rm.median_lane(!current->reversed);
        if (!opposite) {
            throw GeometryError("simulate: infeasible configuration, no opposing lane to turn into at epoch " +
                                std::to_string(k));
        }
        phase = Phase::UturnEntry;
        phase_start = k;
        phase_len = n_ut;
        y_from = current->center();
        y_to = y_median;
        v_from = speed;
        v_to = cfg.uturn_speed;
        v_resume = speed;
        median_len = median_epochs;
        target = opposite;
        uturn_pending = false;
    };

    // along-road and lateral rates at fractional epoch time t within the current phase
    auto rates = [&](double t) -> Vec2 {
        const double tau = phase_len > 0 ? std::clamp((t - static_cast<double>(phase_start)) / phase_len, 0.0, 1.0) : 0.0;
        const double span_s = static_cast<double>(phase_len) * T;
        switch (phase) {
            case Phase::Cruise: return {dir * speed, 0.0};
            case Phase::LaneChange: return {dir * speed, (y_to - y_from) * smooth_blend_rate(tau) / span_s};
            case Phase::UturnEntry:
            case Phase::UturnExit:
                return {dir * (v_from + (v_to - v_from) * tau), (y_to - y_from) * smooth_blend_rate(tau) / span_s};
            case Phase::UturnMedian: return {dir * cfg.uturn_speed * std::cos(std::numbers::pi * tau), 0.0};
        }
        return {0.0, 0.0};
    };
    auto lateral = [&](double t) {
        if (phase == Phase::Cruise) return current->center();
        if (phase == Phase::UturnMedian) return y_median;
        const double tau = std::clamp((t - static_cast<double>(phase_start)) / phase_len, 0.0, 1.0);
        return y_from + (y_to - y_from) * smooth_blend(tau);
    };

    SimResult res;
    res.truth.reserve(static_cast<std::size_t>(cfg.epochs));
    res.observations.reserve(static_cast<std::size_t>(cfg.epochs));
    const double sigma_axis = cfg.noise_sigma_pos / std::sqrt(std::numbers::pi / 2.0);
    double err_sum = 0.0;
    bool prev_off = false;

    for (long k = 0; k < cfg.epochs; ++k) {
        auto kin = epoch_rng(cfg.seed, Stream::Kinematics, k);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        std::normal_distribution<double> gauss(0.0, 1.0);

        // phase bookkeeping at the epoch boundary
        if (phase != Phase::Cruise && k >= phase_start + phase_len) {
            switch (phase) {
                case Phase::LaneChange:
                    current = target;
                    phase = Phase::Cruise;
                    break;
                case Phase::UturnEntry:
                    phase = Phase::UturnMedian;
                    phase_start = k;
                    phase_len = median_len;
                    break;
                case Phase::UturnMedian:
                    dir = -dir;
                    current = target;
                    phase = Phase::UturnExit;
                    phase_start = k;
                    phase_len = n_ut;
                    y_from = y_median;
                    y_to = current->center();
                    v_from = cfg.uturn_speed;
                    v_to = v_resume;
                    break;
                case Phase::UturnExit:
                    speed = v_resume;
                    phase = Phase::Cruise;
                    break;
                default: break;
            }
        }
        if (phase == Phase::Cruise) {
            while (next_request < requests.size() && requests[next_request].start <= k) {
                median_len = requests[next_request].duration;
                uturn_pending = true;
                ++next_request;
            }
            const ThroughLane* mlane = rm.median_lane(current->reversed);
            const double lc_distance = cfg.speed_max * n_lc * T + 40.0;
            const bool near_end = cfg.auto_uturn && remaining() < uturn_distance(cfg.auto_uturn_duration) + lc_distance;
            if (near_end && !uturn_pending) {
                uturn_pending = true;
                median_len = cfg.auto_uturn_duration;
            }
            if (uturn_pending) {
                if (current != mlane && mlane) {
                    start_lane_change(k, mlane);
                } else if (!near_end || remaining() < uturn_distance(median_len)) {
                    start_uturn(k, median_len);
                }
            } else if (cfg.lane_change_rate > 0.0) {
                const double p = 1.0 - std::exp(-cfg.lane_change_rate / 60.0 * T);
                const double u = unif(kin);
                const auto options = neighbors(current);
                if (u < p && !options.empty()) {
                    const std::size_t pick = options.size() == 1 ? 0 : (unif(kin) < 0.5 ? 0 : 1);
                    start_lane_change(k, options[pick]);
                }
            }
        }

        // truth at epoch k
        const double t_k = static_cast<double>(k);
        const Vec2 r = rates(t_k);
        const double y = lateral(t_k);
        if (x < 0.0 || x > rm.length) {
            throw GeometryError("simulate: infeasible configuration, vehicle leaves the map extent at epoch " +
                                std::to_string(k));
        }
        TruthEpoch te;
        te.k = k;
        te.p = lane_to_intersection({x, y}, rm.ref);
        te.v = rm.ref.rotation_gl.transpose() * r;
        te.lane = containing_lane(*rm.set, te.p);
        res.truth.push_back(te);
        const bool off = te.lane == 0;
        if (off && !prev_off) ++res.offroad_episodes;
        prev_off = off;

        // observation
        auto noise = epoch_rng(cfg.seed, Stream::Noise, k);
        std::uniform_real_distribution<double> jitter(1.0 - cfg.sigma_jitter, 1.0 + cfg.sigma_jitter);
        const double sn = sigma_axis * jitter(noise);
        const double se = sigma_axis * jitter(noise);
        Observation o;
        o.k = k;
        o.t = static_cast<double>(k) * T;
        o.est.epoch = k;
        o.est.kind = EstimateKind::Posterior;
        o.est.p_hat = te.p + Vec2(sn * gauss(noise), se * gauss(noise));
        o.est.v_hat = te.v + cfg.noise_sigma_vel * Vec2(gauss(noise), gauss(noise));
        o.est.C_pp = Vec2(sn * sn, se * se).asDiagonal();
        o.est.C_vv = (cfg.noise_sigma_vel * cfg.noise_sigma_vel) * Mat2::Identity();
        err_sum += (o.est.p_hat - te.p).norm();
        res.observations.push_back(o);

        // advance along-road position to the next epoch (midpoint rule on substeps)
        constexpr int substeps = 20;
        for (int s = 0; s < substeps; ++s) {
            const double tm = t_k + (s + 0.5) / substeps;
            x += rates(tm).x() * T / substeps;
        }
        if (phase == Phase::Cruise || phase == Phase::LaneChange) {
            speed = std::clamp(speed + cfg.speed_walk_sigma * std::sqrt(T) * gauss(kin), cfg.speed_min, cfg.speed_max);
        }
    }
    res.mean_horizontal_error = err_sum / static_cast<double>(cfg.epochs);
    return res;
}

}  // namespace lanehmm
