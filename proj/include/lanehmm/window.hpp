#pragma once

// Bounded-latency Viterbi over the most recent n+1 epochs.
//
// Until n+1 epochs have arrived the decoder cannot publish anything; at epoch n it
// decodes 0..n in batch and publishes all of them. From then on each new epoch k
// triggers a decode of the window [k-n, k] and publishes the window's final decision.

#include <cstddef>
#include <deque>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "lanehmm/error.hpp"
#include "lanehmm/hmm_prob.hpp"
#include "lanehmm/viterbi.hpp"

namespace lanehmm {

enum class WindowInit { Uniform, Propagated };

struct WindowConfig {
    std::size_t n = 4;
    WindowInit init_mode = WindowInit::Uniform;

    void validate() const {
        if (n < 1) throw ModelError("window length n must be >= 1");
    }
};

struct WindowDecision {
    std::size_t epoch = 0;
    int lane = 0;
    bool is_break = false;
};

class SlidingWindowDecoder {
public:
    SlidingWindowDecoder(WindowConfig cfg, InitialDistribution pi) : cfg_(cfg), pi_(std::move(pi)) { cfg_.validate(); }

    /// Feeds epoch k. `transition` is A_{k-1} and must be null only for the first epoch.
    std::vector<WindowDecision> push(const EmissionVector& emission, const TransitionMatrix* transition) {
        if ((count_ == 0) != (transition == nullptr)) {
            throw ModelError("SlidingWindowDecoder: transition required for every epoch after the first");
        }
        if (count_ == 0) {
            if (pi_.size() != emission.size()) throw ModelError("SlidingWindowDecoder: initial distribution mismatch");
            forward_ = normalized_or_uniform(pi_.values.cwiseProduct(emission.values));
        }
        emissions_.push_back(emission);
        if (transition) transitions_.push_back(*transition);
        ++count_;

        std::vector<WindowDecision> out;
        if (count_ < cfg_.n + 1) return out;
        if (count_ == cfg_.n + 1) {
            const DecodeResult r = viterbi_batch(pi_, window_emissions(), window_transitions());
            for (std::size_t k = 0; k < count_; ++k) out.push_back({k, r.lanes[k], is_break_at(r, k)});
            published_ = count_;
            return out;
        }

        // window [s, k] with s = k - n; buffer holds s-1..k
        const std::size_t k = count_ - 1;
        const EmissionVector& b_start = emissions_[1];
        Eigen::VectorXd dm;
        if (cfg_.init_mode == WindowInit::Uniform) {
            const auto n = static_cast<Eigen::Index>(b_start.size());
            dm = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
        } else {
            // pi-_s = A_{s-1}^T pi+_{s-1}; pi+_s = normalize(pi-_s . B_s)
            dm = transitions_.front().values.transpose() * forward_;
            const double total = dm.sum();
            if (total > 0.0) dm /= total;
            forward_ = normalized_or_uniform(dm.cwiseProduct(b_start.values));
        }
        emissions_.pop_front();
        transitions_.pop_front();
        const DecodeResult r = viterbi_from(dm, dm.cwiseProduct(emissions_.front().values), window_emissions(),
                                            window_transitions());
        out.push_back({k, r.lanes.back(), is_break_at(r, r.lanes.size() - 1)});
        published_ = count_;
        return out;
    }

    /// Decisions for a stream shorter than n+1 epochs, decoded in batch. Empty if
    /// everything has already been published.
    std::vector<WindowDecision> finish() {
        std::vector<WindowDecision> out;
        if (published_ == count_ || count_ == 0) return out;
        const DecodeResult r = viterbi_batch(pi_, window_emissions(), window_transitions());
        for (std::size_t k = 0; k < count_; ++k) out.push_back({k, r.lanes[k], is_break_at(r, k)});
        published_ = count_;
        return out;
    }

    std::size_t epochs_seen() const { return count_; }

private:
    static Eigen::VectorXd normalized_or_uniform(Eigen::VectorXd v) {
        const double total = v.sum();
        if (total >= kBreakThreshold) return v / total;
        return Eigen::VectorXd::Constant(v.size(), 1.0 / static_cast<double>(v.size()));
    }

    static bool is_break_at(const DecodeResult& r, std::size_t k) {
        return r.diagnostics[k] == EpochFlag::Break;
    }

    std::span<const EmissionVector> window_emissions() {
        scratch_e_.assign(emissions_.begin(), emissions_.end());
        return scratch_e_;
    }
    std::span<const TransitionMatrix> window_transitions() {
        scratch_a_.assign(transitions_.begin(), transitions_.end());
        return scratch_a_;
    }

    WindowConfig cfg_;
    InitialDistribution pi_;
    std::deque<EmissionVector> emissions_;
    std::deque<TransitionMatrix> transitions_;
    std::vector<EmissionVector> scratch_e_;
    std::vector<TransitionMatrix> scratch_a_;
    Eigen::VectorXd forward_;  // normalized pi+ at the epoch before the current window start
    std::size_t count_ = 0;
    std::size_t published_ = 0;
};

struct WindowResult {
    std::vector<int> lanes;
    std::vector<std::size_t> breaks;
};

inline WindowResult viterbi_window(const InitialDistribution& pi, std::span<const EmissionVector> emissions,
                                   std::span<const TransitionMatrix> transitions, WindowConfig cfg) {
    detail::check_chain(emissions, transitions);
    SlidingWindowDecoder dec(cfg, pi);
    WindowResult res;
    res.lanes.assign(emissions.size(), 0);
    auto take = [&](const std::vector<WindowDecision>& ds) {
        for (const auto& d : ds) {
            res.lanes[d.epoch] = d.lane;
            if (d.is_break) res.breaks.push_back(d.epoch);
        }
    };
    for (std::size_t k = 0; k < emissions.size(); ++k) {
        take(dec.push(emissions[k], k == 0 ? nullptr : &transitions[k - 1]));
    }
    take(dec.finish());
    return res;
}

inline WindowResult viterbi_window_uniform(const InitialDistribution& pi, std::span<const EmissionVector> emissions,
                                           std::span<const TransitionMatrix> transitions, std::size_t n) {
    return viterbi_window(pi, emissions, transitions, {n, WindowInit::Uniform});
}

inline WindowResult viterbi_window_propagated(const InitialDistribution& pi,
                                              std::span<const EmissionVector> emissions,
                                              std::span<const TransitionMatrix> transitions, std::size_t n) {
    return viterbi_window(pi, emissions, transitions, {n, WindowInit::Propagated});
}

}  // namespace lanehmm
