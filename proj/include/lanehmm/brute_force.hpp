#pragma once

// Exhaustive maximization of pi(q0) b(q0) prod_k a(q_k, q_k+1) b(q_k+1) over every
// state sequence. Exponential; meant as a reference for small instances.

#include <cstddef>
#include <span>
#include <vector>

#include "lanehmm/error.hpp"
#include "lanehmm/hmm_prob.hpp"
#include "lanehmm/viterbi.hpp"

namespace lanehmm {

inline constexpr double kBruteForceLimit = 1e7;

/// Ties keep the lexicographically smallest sequence.
inline std::vector<int> brute_force_decode(const InitialDistribution& pi, std::span<const EmissionVector> emissions,
                                           std::span<const TransitionMatrix> transitions) {
    detail::check_chain(emissions, transitions);
    if (pi.size() != emissions[0].size()) throw ModelError("brute_force_decode: initial distribution mismatch");
    double count = 1.0;
    for (const auto& b : emissions) {
        count *= static_cast<double>(b.size());
        if (count > kBruteForceLimit) throw ModelError("brute_force_decode: instance too large");
    }
    const std::size_t epochs = emissions.size();
    std::vector<int> seq(epochs, 0), best(epochs, 0);
    double best_p = -1.0;
    while (true) {
        double p = pi.values(seq[0]) * emissions[0].values(seq[0]);
        for (std::size_t k = 1; k < epochs && p > 0.0; ++k) {
            p *= transitions[k - 1].values(seq[k - 1], seq[k]) * emissions[k].values(seq[k]);
        }
        if (p > best_p) {
            best_p = p;
            best = seq;
        }
        // odometer increment, last epoch fastest, so sequences come in lexicographic order
        std::size_t k = epochs;
        while (k > 0) {
            --k;
            if (++seq[k] < static_cast<int>(emissions[k].size())) break;
            seq[k] = 0;
            if (k == 0) return best;
        }
    }
}

}  // namespace lanehmm
