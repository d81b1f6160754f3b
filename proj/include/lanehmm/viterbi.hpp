#pragma once

// Batch Viterbi over a data-dependent HMM whose state count may change between
// epochs. Probabilities stay in the linear domain; delta_plus is renormalized to unit
// 1-norm every epoch and the factors are accumulated in log form.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lanehmm/error.hpp"
#include "lanehmm/hmm_prob.hpp"

namespace lanehmm {

inline constexpr double kBreakThreshold = 1e-300;

/// True when every path probability has collapsed.
inline bool detect_break(const Eigen::VectorXd& delta_plus) {
    return delta_plus.size() == 0 || !(delta_plus.maxCoeff() >= kBreakThreshold);
}

struct Trellis {
    std::vector<Eigen::VectorXd> delta_minus;
    std::vector<Eigen::VectorXd> delta_plus;  // normalized
    std::vector<std::vector<int>> psi;         // psi[k][j]: best predecessor of j at k (empty at trip starts)
    std::vector<double> scale_log;              // cumulative log normalization, reset at breaks
};

enum class EpochFlag { Ok, Break };

struct DecodeResult {
    std::vector<int> lanes;
    double log_p_star = 0.0;  // of the last trip
    std::vector<std::size_t> breaks;
    std::vector<EpochFlag> diagnostics;
    Trellis trellis;
};

namespace detail {

inline int argmax_lowest(const Eigen::VectorXd& v) {
    int best = 0;
    for (Eigen::Index i = 1; i < v.size(); ++i) {
        if (v(i) > v(best)) best = static_cast<int>(i);
    }
    return best;
}

inline void check_chain(std::span<const EmissionVector> emissions, std::span<const TransitionMatrix> transitions) {
    if (emissions.empty()) throw ModelError("viterbi: no emissions");
    if (transitions.size() + 1 != emissions.size()) {
        throw ModelError("viterbi: expected " + std::to_string(emissions.size() - 1) + " transitions, got " +
                         std::to_string(transitions.size()));
    }
    for (std::size_t k = 0; k < transitions.size(); ++k) {
        if (transitions[k].rows() != emissions[k].size() || transitions[k].cols() != emissions[k + 1].size()) {
            throw ModelError("viterbi: transition " + std::to_string(k) + " shape does not chain with emissions");
        }
    }
}

}  // namespace detail

/// Viterbi from an explicit starting pair (delta_minus_0, delta_plus_0). delta_plus_0
/// need not be normalized. After a break the decoder restarts from a uniform prior
/// times the current emission vector.
inline DecodeResult viterbi_from(const Eigen::VectorXd& delta_minus0, const Eigen::VectorXd& delta_plus0,
                                 std::span<const EmissionVector> emissions,
                                 std::span<const TransitionMatrix> transitions) {
    detail::check_chain(emissions, transitions);
    if (static_cast<std::size_t>(delta_plus0.size()) != emissions[0].size() ||
        delta_minus0.size() != delta_plus0.size()) {
        throw ModelError("viterbi: initial vector dimension does not match the first emission");
    }
    const std::size_t epochs = emissions.size();
    DecodeResult res;
    Trellis& tr = res.trellis;
    tr.delta_minus.resize(epochs);
    tr.delta_plus.resize(epochs);
    tr.psi.resize(epochs);
    tr.scale_log.resize(epochs);
    res.diagnostics.assign(epochs, EpochFlag::Ok);

    auto restart = [&](std::size_t k) {
        const auto n = static_cast<Eigen::Index>(emissions[k].size());
        tr.delta_minus[k] = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
        tr.delta_plus[k] = tr.delta_minus[k].cwiseProduct(emissions[k].values);
        tr.psi[k].clear();
        res.breaks.push_back(k);
        res.diagnostics[k] = EpochFlag::Break;
    };
    auto normalize = [&](std::size_t k, double prev_log) {
        const double s = tr.delta_plus[k].sum();
        tr.delta_plus[k] /= s;
        tr.scale_log[k] = prev_log + std::log(s);
    };

    tr.delta_minus[0] = delta_minus0;
    tr.delta_plus[0] = delta_plus0;
    if (detect_break(tr.delta_plus[0])) restart(0);
    normalize(0, 0.0);

    for (std::size_t k = 1; k < epochs; ++k) {
        const Eigen::MatrixXd& a = transitions[k - 1].values;
        const Eigen::VectorXd& prev = tr.delta_plus[k - 1];
        const Eigen::Index n = a.cols();
        Eigen::VectorXd dm(n);
        std::vector<int> psi(static_cast<std::size_t>(n));
        for (Eigen::Index j = 0; j < n; ++j) {
            double best = -1.0;
            int arg = 0;
            for (Eigen::Index i = 0; i < a.rows(); ++i) {
                const double v = a(i, j) * prev(i);
                if (v > best) {
                    best = v;
                    arg = static_cast<int>(i);
                }
            }
            dm(j) = best;
            psi[static_cast<std::size_t>(j)] = arg;
        }
        tr.delta_minus[k] = std::move(dm);
        tr.delta_plus[k] = tr.delta_minus[k].cwiseProduct(emissions[k].values);
        tr.psi[k] = std::move(psi);
        double prev_log = tr.scale_log[k - 1];
        if (detect_break(tr.delta_plus[k])) {
            restart(k);
            prev_log = 0.0;
        }
        normalize(k, prev_log);
    }

    // backtrace each trip separately; a break at epoch 0 leaves an empty leading trip
    res.lanes.assign(epochs, 0);
    std::size_t end = epochs;
    for (std::size_t b = res.breaks.size() + 1; b-- > 0;) {
        const std::size_t start = b == 0 ? 0 : res.breaks[b - 1];
        if (start >= end) continue;
        std::size_t k = end - 1;
        res.lanes[k] = detail::argmax_lowest(tr.delta_plus[k]);
        if (end == epochs) {
            res.log_p_star = std::log(tr.delta_plus[k](res.lanes[k])) + tr.scale_log[k];
        }
        while (k > start) {
            res.lanes[k - 1] = tr.psi[k][static_cast<std::size_t>(res.lanes[k])];
            --k;
        }
        end = start;
    }
    return res;
}

inline DecodeResult viterbi_batch(const InitialDistribution& pi, std::span<const EmissionVector> emissions,
                                  std::span<const TransitionMatrix> transitions) {
    if (emissions.empty()) throw ModelError("viterbi: no emissions");
    if (pi.size() != emissions[0].size()) throw ModelError("viterbi: initial distribution dimension mismatch");
    return viterbi_from(pi.values, pi.values.cwiseProduct(emissions[0].values), emissions, transitions);
}

}  // namespace lanehmm
