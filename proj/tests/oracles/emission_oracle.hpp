#pragma once

// Emission vector by quadrature. The off-road mass integrates the lateral density over
// the gaps between lanes and the two outer tails in lane 1's frame, so it only applies
// to parallel, non-overlapping lane sets.

#include <algorithm>
#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "lanehmm/lanemap.hpp"
#include "lanehmm/statespace.hpp"
#include "oracles/geometry.hpp"
#include "oracles/quadrature.hpp"

namespace oracle {

inline std::vector<std::pair<double, double>> intervals_in(const lanehmm::RoadSegmentSet& set, std::size_t m,
                                                           const Strip& ref) {
    std::vector<std::pair<double, double>> out;
    for (std::size_t id = 1; id <= set.lane_count(); ++id) {
        const Strip s = strip(set, id, m);
        const double a = lateral(ref, s.origin);
        const double b = lateral(ref, s.origin + s.width * s.f_axis);
        out.emplace_back(std::min(a, b), std::max(a, b));
    }
    std::sort(out.begin(), out.end());
    return out;
}

inline double offroad_mass(double mu, double sigma, std::vector<std::pair<double, double>> iv) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    double mass = gaussian_mass(mu, sigma, -inf, iv.front().first);
    double reach = iv.front().second;
    for (std::size_t i = 1; i < iv.size(); ++i) {
        // edges within 1e-9 m are the same edge up to rounding of the polyline points
        if (iv[i].first > reach + 1e-9) mass += gaussian_mass(mu, sigma, reach, iv[i].first);
        reach = std::max(reach, iv[i].second);
    }
    return mass + gaussian_mass(mu, sigma, reach, inf);
}

inline Eigen::VectorXd emission(const lanehmm::StateEstimate& prior, const lanehmm::StateEstimate& post,
                                const lanehmm::RoadSegmentSet& set, std::size_t m) {
    const std::size_t n = set.lane_count();
    Eigen::VectorXd b(static_cast<Eigen::Index>(n + 1));
    for (std::size_t id = 1; id <= n; ++id) {
        const Strip s = strip(set, id, m);
        const double num = gaussian_mass(lateral(s, post.p_hat), lateral_sigma(s, post.C_pp), 0.0, s.width);
        const double den = gaussian_mass(lateral(s, prior.p_hat), lateral_sigma(s, prior.C_pp), 0.0, s.width);
        b(static_cast<Eigen::Index>(id)) = num / den;
    }
    const Strip ref = strip(set, 1, m);
    const auto iv = intervals_in(set, m, ref);
    b(0) = offroad_mass(lateral(ref, post.p_hat), lateral_sigma(ref, post.C_pp), iv) /
           offroad_mass(lateral(ref, prior.p_hat), lateral_sigma(ref, prior.C_pp), iv);
    return b / b.sum();
}

}  // namespace oracle
