#pragma once

// Univariate and bivariate normal probabilities.
//
// The bivariate CDF follows Genz's BVNU (Drezner-Wesolowsky reduction of Plackett's
// formula integrated with Gauss-Legendre rules of 6, 12 or 20 points depending on
// |rho|), accurate to about 1e-15 absolute.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include "lanehmm/error.hpp"

namespace lanehmm {

inline constexpr double kMaxAbsCorrelation = 1.0 - 1e-12;

/// P(Z <= x) for a standard normal Z.
inline double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// P(Z > x), accurate in the upper tail.
inline double std_normal_sf(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

/// P(lo <= Z <= hi) without cancellation in either tail. Infinite bounds allowed.
inline double std_normal_interval(double lo, double hi) {
    if (!(hi > lo)) return 0.0;
    if (lo >= 0.0) return std::max(0.0, std_normal_sf(lo) - std_normal_sf(hi));
    if (hi <= 0.0) return std::max(0.0, std_normal_cdf(hi) - std_normal_cdf(lo));
    return std::max(0.0, 1.0 - std_normal_cdf(lo) - std_normal_sf(hi));
}

namespace detail {

template <std::size_t N>
struct GaussLegendre {
    std::array<double, N> nodes{};    // positive half, ascending index = descending node
    std::array<double, N> weights{};  // weights of the full 2N-point rule
};

/// Positive nodes of the 2N-point Gauss-Legendre rule on [-1, 1], by Newton iteration.
template <std::size_t N>
GaussLegendre<N> make_gauss_legendre() {
    constexpr std::size_t n = 2 * N;
    GaussLegendre<N> gl;
    for (std::size_t i = 0; i < N; ++i) {
        double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (static_cast<double>(n) + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = x;
            for (std::size_t k = 2; k <= n; ++k) {
                const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / static_cast<double>(k);
                p0 = p1;
                p1 = pk;
            }
            dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        gl.nodes[i] = x;
        gl.weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    return gl;
}

inline const GaussLegendre<3>& gl6() {
    static const auto r = make_gauss_legendre<3>();
    return r;
}
inline const GaussLegendre<6>& gl12() {
    static const auto r = make_gauss_legendre<6>();
    return r;
}
inline const GaussLegendre<10>& gl20() {
    static const auto r = make_gauss_legendre<10>();
    return r;
}

template <std::size_t N, class F>
void for_each_node(const GaussLegendre<N>& gl, F&& f) {
    for (std::size_t i = 0; i < N; ++i) f(gl.nodes[i], gl.weights[i]);
}

template <class F>
void with_rule(double abs_r, F&& f) {
    if (abs_r < 0.3) {
        for_each_node(gl6(), f);
    } else if (abs_r < 0.75) {
        for_each_node(gl12(), f);
    } else {
        for_each_node(gl20(), f);
    }
}

}  // namespace detail

/// P(Z1 > h, Z2 > k) for standard normals with correlation r, |r| < 1.
inline double bvn_upper(double h, double k, double r) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    if (h == inf || k == inf) return 0.0;
    if (h == -inf) return k == -inf ? 1.0 : std_normal_sf(k);
    if (k == -inf) return std_normal_sf(h);
    if (!(std::abs(r) < 1.0)) throw ModelError("bvn: |rho| must be < 1");

    constexpr double two_pi = 2.0 * std::numbers::pi;
    double hk = h * k;
    double bvn = 0.0;
    if (std::abs(r) < 0.925) {
        const double hs = 0.5 * (h * h + k * k);
        const double asr = std::asin(r);
        detail::with_rule(std::abs(r), [&](double x, double w) {
            for (double sgn : {-1.0, 1.0}) {
                const double sn = std::sin(asr * (1.0 + sgn * x) * 0.5);
                bvn += w * std::exp((sn * hk - hs) / (1.0 - sn * sn));
            }
        });
        return std::clamp(bvn * asr / (2.0 * two_pi) + std_normal_sf(h) * std_normal_sf(k), 0.0, 1.0);
    }

    if (r < 0.0) {
        k = -k;
        hk = -hk;
    }
    const double as = (1.0 - r) * (1.0 + r);
    double a = std::sqrt(as);
    const double bs = (h - k) * (h - k);
    const double c = (4.0 - hk) / 8.0;
    const double d = (12.0 - hk) / 16.0;
    double asr = -(bs / as + hk) * 0.5;
    if (asr > -700.0) {
        bvn = a * std::exp(asr) * (1.0 - c * (bs - as) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as * as / 5.0);
    }
    if (hk > -700.0) {
        const double b = std::sqrt(bs);
        bvn -= std::exp(-hk * 0.5) * std::sqrt(two_pi) * std_normal_cdf(-b / a) * b *
               (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
    }
    a *= 0.5;
    detail::with_rule(std::abs(r), [&](double x, double w) {
        for (double sgn : {-1.0, 1.0}) {
            const double xs = (a * (sgn * x + 1.0)) * (a * (sgn * x + 1.0));
            const double rs = std::sqrt(1.0 - xs);
            const double e = -(bs / xs + hk) * 0.5;
            if (e > -700.0) {
                bvn += a * w * std::exp(e) *
                       (std::exp(-hk * (1.0 - rs) / (2.0 * (1.0 + rs))) / rs - (1.0 + c * xs * (1.0 + d * xs)));
            }
        }
    });
    bvn = -bvn / two_pi;
    if (r > 0.0) {
        bvn += std_normal_sf(std::max(h, k));
    } else if (h >= k) {
        bvn = -bvn;
    } else {
        const double l = h < 0.0 ? std_normal_cdf(k) - std_normal_cdf(h) : std_normal_sf(h) - std_normal_sf(k);
        bvn = l - bvn;
    }
    return std::clamp(bvn, 0.0, 1.0);
}

/// P(Z1 <= h, Z2 <= k) for standard normals with correlation rho, |rho| < 1.
inline double bvn_cdf(double h, double k, double rho) { return bvn_upper(-h, -k, rho); }

/// P(a1 <= Z1 <= b1, a2 <= Z2 <= b2) for a standard bivariate normal.
///
/// Each axis is reflected so the rectangle sits on the nonnegative side, which keeps
/// the four orthant terms small when the rectangle lies in a tail.
inline double bvn_rectangle(double a1, double b1, double a2, double b2, double rho) {
    if (!(b1 > a1) || !(b2 > a2)) return 0.0;
    auto centered = [](double& a, double& b) {
        // midpoint sign; infinite bounds decide directly
        const double mid = std::isinf(a) || std::isinf(b) ? (std::isinf(a) ? b : a) : 0.5 * (a + b);
        if ((std::isinf(a) && std::isinf(b)) || mid >= 0.0) return 1.0;
        const double na = -b, nb = -a;
        a = na;
        b = nb;
        return -1.0;
    };
    const double s1 = centered(a1, b1);
    const double s2 = centered(a2, b2);
    const double r = s1 * s2 * rho;
    const double p = bvn_upper(a1, a2, r) - bvn_upper(a1, b2, r) - bvn_upper(b1, a2, r) + bvn_upper(b1, b2, r);
    return std::clamp(p, 0.0, 1.0);
}

}  // namespace lanehmm
