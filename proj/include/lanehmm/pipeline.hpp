#pragma once

// Observations + map -> per-epoch HMM models -> decoded lane sequence.

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "json.hpp"
#include "lanehmm/hmm_prob.hpp"
#include "lanehmm/io.hpp"
#include "lanehmm/lanemap.hpp"
#include "lanehmm/statespace.hpp"
#include "lanehmm/viterbi.hpp"
#include "lanehmm/window.hpp"

namespace lanehmm {

struct ModelConfig {
    double q_pos = 0.0625;            // m^2/s, position random-walk intensity
    double q_vel = 0.25;              // m^2/s^3
    double initial_prior_sigma = 10.0;  // m and m/s added to the first posterior to form its prior
    double min_position_sigma = 1e-3;   // m, covariance floor applied at ingestion
    double min_velocity_sigma = 1e-3;   // m/s
    FrameMode frames = FrameMode::Automatic;

    static ModelConfig from_json(const nlohmann::json& j) {
        ModelConfig c;
        auto get = [&](const char* key, double& dst) {
            if (j.contains(key)) {
                if (!j[key].is_number()) throw SchemaError(std::string("model config: '") + key + "' must be a number");
                dst = j[key].get<double>();
            }
        };
        get("q_pos", c.q_pos);
        get("q_vel", c.q_vel);
        get("initial_prior_sigma", c.initial_prior_sigma);
        get("min_position_sigma", c.min_position_sigma);
        get("min_velocity_sigma", c.min_velocity_sigma);
        if (j.contains("frames")) {
            if (!j["frames"].is_string()) throw SchemaError("model config: frames must be auto|single|per-lane");
            const std::string f = j["frames"].get<std::string>();
            if (f == "auto") c.frames = FrameMode::Automatic;
            else if (f == "single") c.frames = FrameMode::SingleFrame;
            else if (f == "per-lane") c.frames = FrameMode::PerLane;
            else throw SchemaError("model config: frames must be auto|single|per-lane");
        }
        if (c.q_pos < 0 || c.q_vel < 0 || c.initial_prior_sigma <= 0 || c.min_position_sigma < 0 ||
            c.min_velocity_sigma < 0) {
            throw SchemaError("model config: values out of range");
        }
        return c;
    }
};

struct EpochContext {
    std::size_t road = 0;
    std::size_t m = 0;
    bool clamped = false;
};

struct ModelSequence {
    InitialDistribution pi;
    std::vector<EmissionVector> emissions;
    std::vector<TransitionMatrix> transitions;
    std::vector<EpochContext> context;
    std::vector<StateEstimate> posteriors;
};

/// Raises the smallest eigenvalue of a 2x2 covariance to at least floor^2.
inline Mat2 floor_covariance(const Mat2& c, double floor) {
    const double f2 = floor * floor;
    Eigen::SelfAdjointEigenSolver<Mat2> es(c);
    const double lo = es.eigenvalues().minCoeff();
    if (lo >= f2) return c;
    return c + (f2 - lo) * Mat2::Identity();
}

inline StateEstimate regularize(StateEstimate e, const ModelConfig& cfg) {
    e.C_pp = floor_covariance(e.C_pp, cfg.min_position_sigma);
    e.C_vv = floor_covariance(e.C_vv, cfg.min_velocity_sigma);
    return e;
}

inline ModelSequence build_models(const LaneMap& map, const std::vector<Observation>& obs, const ModelConfig& cfg) {
    if (obs.empty()) throw ModelError("build_models: no observations");
    ModelSequence seq;
    const std::size_t n = obs.size();
    seq.posteriors.reserve(n);
    seq.context.reserve(n);
    for (const auto& o : obs) {
        seq.posteriors.push_back(regularize(o.est, cfg));
        const RoadLocation loc = map.locate(o.est.p_hat);
        seq.context.push_back({loc.road, loc.segment.m, loc.segment.clamped});
    }

    seq.emissions.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        const StateEstimate& post = seq.posteriors[k];
        StateEstimate prior;
        if (k == 0) {
            prior = post;
            const double s2 = cfg.initial_prior_sigma * cfg.initial_prior_sigma;
            prior.C_pp += s2 * Mat2::Identity();
            prior.C_vv += s2 * Mat2::Identity();
            prior.kind = EstimateKind::Prior;
        } else {
            const double T = obs[k].t - obs[k - 1].t;
            prior = propagate(seq.posteriors[k - 1], T, ProcessNoise::from_intensity(cfg.q_pos, cfg.q_vel, T).Q_d);
        }
        const auto& ctx = seq.context[k];
        EmissionVector b = emission_vector(prior, post, map.roads[ctx.road], ctx.m);
        b.epoch = obs[k].k;
        seq.emissions.push_back(std::move(b));
    }

    seq.transitions.reserve(n - 1);
    for (std::size_t k = 0; k + 1 < n; ++k) {
        const double T = obs[k + 1].t - obs[k].t;
        const Mat2 q_pp = ProcessNoise::from_intensity(cfg.q_pos, cfg.q_vel, T).Q_pp();
        const RoadSegmentSet& from = map.roads[seq.context[k].road];
        const RoadSegmentSet& to = map.roads[seq.context[k + 1].road];
        TransitionMatrix a = transition_matrix(seq.posteriors[k], from, to, T, q_pp, {cfg.frames});
        a.epoch = obs[k].k;
        seq.transitions.push_back(std::move(a));
    }
    seq.pi = initial_distribution(map.roads[seq.context[0].road].lane_count());
    return seq;
}

enum class DecodeMode { Batch, Window };

struct DecodeOptions {
    DecodeMode mode = DecodeMode::Batch;
    WindowConfig window;
};

struct LaneDecoding {
    std::vector<int> lanes;
    std::vector<std::size_t> breaks;
};

inline LaneDecoding decode_models(const ModelSequence& seq, const DecodeOptions& opts) {
    if (opts.mode == DecodeMode::Batch) {
        DecodeResult r = viterbi_batch(seq.pi, seq.emissions, seq.transitions);
        return {std::move(r.lanes), std::move(r.breaks)};
    }
    WindowResult r = viterbi_window(seq.pi, seq.emissions, seq.transitions, opts.window);
    return {std::move(r.lanes), std::move(r.breaks)};
}

inline std::vector<Prediction> to_predictions(const std::vector<Observation>& obs, const LaneDecoding& dec,
                                              const ModelSequence* seq = nullptr) {
    std::vector<Prediction> out(obs.size());
    for (std::size_t k = 0; k < obs.size(); ++k) {
        out[k] = {obs[k].k, dec.lanes[k], PredictionFlag::Ok};
        if (seq && (seq->context[k].clamped || seq->emissions[k].denominator_floored)) {
            out[k].flag = PredictionFlag::Clamped;
        }
    }
    for (std::size_t b : dec.breaks) out[b].flag = PredictionFlag::Break;
    return out;
}

}  // namespace lanehmm
