#pragma once

// Data-dependent HMM probability models: emission vectors, transition matrices and
// initial distributions. Index 0 of every vector and matrix is the off-road state;
// physical lanes use their 1-based ids.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "lanehmm/error.hpp"
#include "lanehmm/geodesy.hpp"
#include "lanehmm/lanemap.hpp"
#include "lanehmm/normal.hpp"
#include "lanehmm/statespace.hpp"

namespace lanehmm {

inline constexpr double kProbabilityFloor = 1e-300;
inline constexpr double kNegativeTolerance = 1e-9;
// Below this denominator the ratio of rectangle masses is limited by the absolute
// accuracy of the bivariate CDF rather than by the model.
inline constexpr double kTailDenominator = 1e-6;
inline constexpr double kCurvatureSigmas = 5.0;

struct EmissionVector {
    Eigen::VectorXd values;  // length N+1, sums to 1
    long epoch = 0;
    bool denominator_floored = false;
    bool complement_clamped = false;  // off-road complement went negative (non-parallel overlap)
    bool curvature_warning = false;   // segment shorter than kCurvatureSigmas * sigma_s

    std::size_t size() const { return static_cast<std::size_t>(values.size()); }
};

struct TransitionMatrix {
    Eigen::MatrixXd values;  // (N_from+1) x (N_to+1), row-stochastic
    long epoch = 0;
    std::size_t floored_rows = 0;    // rows replaced by the next-epoch marginal
    std::size_t clamped_entries = 0;  // negative complements set to zero
    double max_row_residual = 0.0;    // |row sum - 1| before renormalization, rows with mass >= kTailDenominator

    std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
    std::size_t cols() const { return static_cast<std::size_t>(values.cols()); }
};

struct InitialDistribution {
    Eigen::VectorXd values;

    std::size_t size() const { return static_cast<std::size_t>(values.size()); }
};

/// Lateral positions (f_k, f_{k+1}) and their covariance.
struct JointLateralGaussian {
    Vec2 z_hat = Vec2::Zero();
    Mat2 C_z = Mat2::Identity();

    double sigma_k() const { return std::sqrt(C_z(0, 0)); }
    double sigma_next() const { return std::sqrt(C_z(1, 1)); }
    double rho() const { return C_z(0, 1) / (sigma_k() * sigma_next()); }
};

/// Probability that a lateral Gaussian N(f_hat, sigma^2) falls inside the bounds.
/// Bounds may be infinite.
inline double lane_membership_prob(double f_hat, double sigma_f, const LateralBounds& bounds) {
    if (!(sigma_f > 0.0) || !std::isfinite(sigma_f)) {
        throw ModelError("lane_membership_prob: degenerate lateral standard deviation");
    }
    return std_normal_interval((bounds.lo - f_hat) / sigma_f, (bounds.hi - f_hat) / sigma_f);
}

/// Probability mass outside the bounds, computed from both tails directly.
inline double lane_complement_prob(double f_hat, double sigma_f, const LateralBounds& bounds) {
    if (!(sigma_f > 0.0)) throw ModelError("lane_complement_prob: degenerate lateral standard deviation");
    return std_normal_cdf((bounds.lo - f_hat) / sigma_f) + std_normal_sf((bounds.hi - f_hat) / sigma_f);
}

struct LateralMarginal {
    double f_hat = 0.0;
    double sigma = 0.0;
    double sigma_s = 0.0;
};

inline LateralMarginal lateral_marginal(const Vec2& p_g, const Mat2& cov_g, const LaneFramePose& pose) {
    const Vec2 p_l = intersection_to_lane(p_g, pose);
    const Mat2 c_l = rotate_cov(cov_g, pose.rotation_gl);
    if (!(c_l(1, 1) > 0.0)) throw ModelError("lateral variance is not positive");
    return {p_l.y(), std::sqrt(c_l(1, 1)), std::sqrt(std::max(0.0, c_l(0, 0)))};
}

namespace detail {

constexpr double kInf = std::numeric_limits<double>::infinity();
// lanes closer than this are treated as touching
constexpr double kEdgeTolerance = 1e-9;

/// 1 - sum(masses), evaluated as the complement of the dominant lane minus the other
/// lanes so the result keeps its relative accuracy when it is small. Used where the
/// off-road region has no common lateral axis.
template <class ComplementOf>
double offroad_mass(const std::vector<double>& masses, ComplementOf&& complement_of, bool& clamped) {
    const auto it = std::max_element(masses.begin(), masses.end());
    const std::size_t c = static_cast<std::size_t>(it - masses.begin());
    double p0 = complement_of(c);
    for (std::size_t i = 0; i < masses.size(); ++i) {
        if (i != c) p0 -= masses[i];
    }
    if (p0 < 0.0) {
        if (p0 < -kNegativeTolerance) clamped = true;
        p0 = 0.0;
    }
    return p0;
}

/// Off-road part of the f-axis of `ref` for a parallel set at cross-section m: the two
/// outer half-lines plus any gaps between lanes.
inline std::vector<LateralBounds> offroad_intervals(const RoadSegmentSet& set, std::size_t m,
                                                    const LaneFramePose& ref) {
    std::vector<LateralBounds> lanes;
    for (std::size_t id = 1; id <= set.lane_count(); ++id) lanes.push_back(lateral_bounds(set, id, m, ref));
    std::sort(lanes.begin(), lanes.end(), [](const LateralBounds& a, const LateralBounds& b) { return a.lo < b.lo; });
    std::vector<LateralBounds> out;
    double edge = -kInf;
    for (const auto& b : lanes) {
        if (b.lo > edge + kEdgeTolerance) out.push_back({edge, b.lo});
        edge = std::max(edge, b.hi);
    }
    out.push_back({edge, kInf});
    return out;
}

inline double interval_mass(const LateralMarginal& g, const std::vector<LateralBounds>& intervals) {
    double p = 0.0;
    for (const auto& b : intervals) p += lane_membership_prob(g.f_hat, g.sigma, b);
    return p;
}

}  // namespace detail

/// Emission vector b_i(O_k) for cross-section m of a segment set.
///
/// For each lane the posterior and prior lateral masses are computed in that lane's
/// frame. On parallel sets the off-road masses are summed over the off-road intervals;
/// otherwise they are complements of the lane masses. The ratios are normalized to sum
/// 1, which removes the unknown observation probability.
inline EmissionVector emission_vector(const StateEstimate& prior, const StateEstimate& posterior,
                                      const RoadSegmentSet& set, std::size_t m) {
    const std::size_t n = set.lane_count();
    std::vector<double> post(n), pri(n);
    std::vector<LateralMarginal> post_marg(n), pri_marg(n);
    std::vector<LateralBounds> bounds(n);
    EmissionVector out;
    out.epoch = posterior.epoch;
    for (std::size_t i = 0; i < n; ++i) {
        const LaneFramePose pose = set.frame(i + 1, m);
        bounds[i] = set.own_bounds(i + 1, m);
        post_marg[i] = lateral_marginal(posterior.p_hat, posterior.C_pp, pose);
        pri_marg[i] = lateral_marginal(prior.p_hat, prior.C_pp, pose);
        post[i] = lane_membership_prob(post_marg[i].f_hat, post_marg[i].sigma, bounds[i]);
        pri[i] = lane_membership_prob(pri_marg[i].f_hat, pri_marg[i].sigma, bounds[i]);
        const double seg_len = set.lane(i + 1).segment_length(set.lane_segment(i + 1, m));
        if (seg_len < kCurvatureSigmas * post_marg[i].sigma_s) out.curvature_warning = true;
    }
    double post0 = 0.0, pri0 = 0.0;
    if (set.parallel()) {
        const LaneFramePose ref = set.frame(1, m);
        const auto off = detail::offroad_intervals(set, m, ref);
        post0 = detail::interval_mass(lateral_marginal(posterior.p_hat, posterior.C_pp, ref), off);
        pri0 = detail::interval_mass(lateral_marginal(prior.p_hat, prior.C_pp, ref), off);
    } else {
        post0 = detail::offroad_mass(
            post, [&](std::size_t c) { return lane_complement_prob(post_marg[c].f_hat, post_marg[c].sigma, bounds[c]); },
            out.complement_clamped);
        pri0 = detail::offroad_mass(
            pri, [&](std::size_t c) { return lane_complement_prob(pri_marg[c].f_hat, pri_marg[c].sigma, bounds[c]); },
            out.complement_clamped);
    }

    out.values.resize(static_cast<Eigen::Index>(n + 1));
    auto ratio = [&](double num, double den) {
        if (den < kProbabilityFloor) {
            out.denominator_floored = true;
            den = kProbabilityFloor;
        }
        return num / den;
    };
    out.values(0) = ratio(post0, pri0);
    for (std::size_t i = 0; i < n; ++i) out.values(static_cast<Eigen::Index>(i + 1)) = ratio(post[i], pri[i]);
    const double total = out.values.sum();
    if (!(total > 0.0) || !std::isfinite(total)) throw ModelError("emission_vector: ratios do not normalize");
    out.values /= total;
    return out;
}

/// Joint Gaussian of the lateral position at t_k in frame i and the predicted lateral
/// position at t_{k+1} in frame j.
inline JointLateralGaussian build_joint_lateral(const StateEstimate& est, double T, const Mat2& Q_pp,
                                                const LaneFramePose& pose_i, const LaneFramePose& pose_j) {
    const Vec2 next = predicted_position(est, T);
    const Mat2 c_next = next_position_cov(est, T, Q_pp);
    const Mat2 c_cross = cross_cov_position(est, T);

    JointLateralGaussian jg;
    jg.z_hat = {intersection_to_lane(est.p_hat, pose_i).y(), intersection_to_lane(next, pose_j).y()};
    const double var_k = rotate_cov(est.C_pp, pose_i.rotation_gl)(1, 1);
    const double var_n = rotate_cov(c_next, pose_j.rotation_gl)(1, 1);
    const double cov = (pose_i.rotation_gl * c_cross * pose_j.rotation_gl.transpose())(1, 1);
    if (!(var_k > 0.0) || !(var_n > 0.0)) throw ModelError("build_joint_lateral: degenerate lateral variance");
    const double s = std::sqrt(var_k * var_n);
    double rho = cov / s;
    if (!std::isfinite(rho) || std::abs(rho) > 1.0 + 1e-9) {
        throw ModelError("build_joint_lateral: assembled covariance is not PSD");
    }
    rho = std::clamp(rho, -kMaxAbsCorrelation, kMaxAbsCorrelation);
    jg.C_z << var_k, rho * s, rho * s, var_n;
    return jg;
}

/// P(f_k in bounds_i, f_{k+1} in bounds_j) under the joint lateral Gaussian (the
/// four-term rectangle rule on the standardized joint CDF). Bounds may be infinite.
inline double joint_lane_pair_prob(const JointLateralGaussian& jg, const LateralBounds& bounds_i,
                                   const LateralBounds& bounds_j) {
    const double s1 = jg.sigma_k(), s2 = jg.sigma_next();
    return bvn_rectangle((bounds_i.lo - jg.z_hat(0)) / s1, (bounds_i.hi - jg.z_hat(0)) / s1,
                         (bounds_j.lo - jg.z_hat(1)) / s2, (bounds_j.hi - jg.z_hat(1)) / s2, jg.rho());
}

enum class FrameMode {
    Automatic,    // SingleFrame for one parallel set, PerLane otherwise
    SingleFrame,  // every lateral coordinate in the frame of lane 1 at t_k
    PerLane,      // t_k quantities in frame i, t_{k+1} quantities in frame j
};

struct TransitionOptions {
    FrameMode frames = FrameMode::Automatic;
};

namespace detail {

/// Rectangle masses for one (from, to) pair of segment sets. State index 0 is off-road
/// and i >= 1 is lane i. On a parallel set the off-road state is a list of intervals in
/// the frame of lane 1; elsewhere only lane states have regions and the off-road terms
/// must come from complements.
class LanePairModel {
public:
    LanePairModel(const StateEstimate& est, const RoadSegmentSet& from, const RoadSegmentSet& to, double T,
                  const Mat2& Q_pp, FrameMode mode)
        : nf_(from.lane_count()), nt_(to.lane_count()), direct_k_(from.parallel()), direct_n_(to.parallel()) {
        const std::size_t m_k = select_segment(from, est.p_hat).m;
        const std::size_t m_n = select_segment(to, predicted_position(est, T)).m;
        std::vector<LaneFramePose> pose_k(nf_ + 1), pose_n(nt_ + 1);
        region_k_.resize(nf_ + 1);
        region_n_.resize(nt_ + 1);
        if (mode == FrameMode::SingleFrame) {
            const LaneFramePose ref = from.frame(1, m_k);
            auto check = [&](const RoadSegmentSet& set, std::size_t m) {
                for (std::size_t id = 1; id <= set.lane_count(); ++id) {
                    const double d = std::remainder(set.frame(id, m).alpha - ref.alpha, std::numbers::pi);
                    if (std::abs(d) > 1e-9) throw ModelError("single-frame transition requires parallel lanes");
                }
            };
            check(from, m_k);
            check(to, m_n);
            joints_.assign(1, build_joint_lateral(est, T, Q_pp, ref, ref));
            for (std::size_t i = 1; i <= nf_; ++i) region_k_[i] = {lateral_bounds(from, i, m_k, ref)};
            for (std::size_t j = 1; j <= nt_; ++j) region_n_[j] = {lateral_bounds(to, j, m_n, ref)};
            if (direct_k_) region_k_[0] = offroad_intervals(from, m_k, ref);
            if (direct_n_) region_n_[0] = offroad_intervals(to, m_n, ref);
            return;
        }
        pose_k[0] = from.frame(1, m_k);
        pose_n[0] = to.frame(1, m_n);
        for (std::size_t i = 1; i <= nf_; ++i) {
            pose_k[i] = from.frame(i, m_k);
            region_k_[i] = {from.own_bounds(i, m_k)};
        }
        for (std::size_t j = 1; j <= nt_; ++j) {
            pose_n[j] = to.frame(j, m_n);
            region_n_[j] = {to.own_bounds(j, m_n)};
        }
        if (direct_k_) region_k_[0] = offroad_intervals(from, m_k, pose_k[0]);
        if (direct_n_) region_n_[0] = offroad_intervals(to, m_n, pose_n[0]);
        joints_.reserve((nf_ + 1) * (nt_ + 1));
        for (std::size_t i = 0; i <= nf_; ++i) {
            for (std::size_t j = 0; j <= nt_; ++j) joints_.push_back(build_joint_lateral(est, T, Q_pp, pose_k[i], pose_n[j]));
        }
    }

    std::size_t from_lanes() const { return nf_; }
    std::size_t to_lanes() const { return nt_; }
    /// Whether the off-road state has explicit intervals at t_k / t_{k+1}.
    bool direct_offroad_k() const { return direct_k_; }
    bool direct_offroad_next() const { return direct_n_; }

    const JointLateralGaussian& joint(std::size_t i, std::size_t j) const {
        return joints_.size() == 1 ? joints_.front() : joints_[i * (nt_ + 1) + j];
    }
    const LateralBounds& bounds_k(std::size_t i) const { return region_k_.at(i).front(); }
    const LateralBounds& bounds_next(std::size_t j) const { return region_n_.at(j).front(); }

    double mass_k(std::size_t i) const {
        const auto& jg = joint(i, 0);
        double p = 0.0;
        for (const auto& b : region_k_[i]) p += lane_membership_prob(jg.z_hat(0), jg.sigma_k(), b);
        return p;
    }
    double mass_next(std::size_t j) const {
        const auto& jg = joint(0, j);
        double p = 0.0;
        for (const auto& b : region_n_[j]) p += lane_membership_prob(jg.z_hat(1), jg.sigma_next(), b);
        return p;
    }
    /// Lanes only.
    double complement_k(std::size_t i) const {
        const auto& jg = joint(i, 0);
        return lane_complement_prob(jg.z_hat(0), jg.sigma_k(), bounds_k(i));
    }
    double complement_next(std::size_t j) const {
        const auto& jg = joint(0, j);
        return lane_complement_prob(jg.z_hat(1), jg.sigma_next(), bounds_next(j));
    }
    /// P(state i at t_k, state j at t_{k+1}); off-road indices need explicit intervals.
    double pair(std::size_t i, std::size_t j) const {
        double p = 0.0;
        for (const auto& bi : region_k_.at(i)) {
            for (const auto& bj : region_n_.at(j)) p += joint_lane_pair_prob(joint(i, j), bi, bj);
        }
        return p;
    }
    /// P(f_k in lane i, f_{k+1} outside lane j)
    double pair_outside_next(std::size_t i, std::size_t j) const {
        const auto& b = bounds_next(j);
        return joint_lane_pair_prob(joint(i, j), bounds_k(i), {-kInf, b.lo}) +
               joint_lane_pair_prob(joint(i, j), bounds_k(i), {b.hi, kInf});
    }
    /// P(f_k outside lane i, f_{k+1} in lane j)
    double pair_outside_k(std::size_t i, std::size_t j) const {
        const auto& b = bounds_k(i);
        return joint_lane_pair_prob(joint(i, j), {-kInf, b.lo}, bounds_next(j)) +
               joint_lane_pair_prob(joint(i, j), {b.hi, kInf}, bounds_next(j));
    }

private:
    std::size_t nf_, nt_;
    bool direct_k_, direct_n_;
    std::vector<JointLateralGaussian> joints_;
    std::vector<std::vector<LateralBounds>> region_k_, region_n_;
};

}  // namespace detail

/// Transition matrix a_ij^k conditioned on the posterior estimate at t_k.
///
/// In-lane entries are joint rectangle masses divided by the lane membership mass.
/// Entries involving the off-road state are summed over the off-road intervals when
/// the set is parallel. On other sets they are complements: the row marginal minus the
/// in-lane joints for column 0, the column marginal minus the in-lane joints for row
/// 0, and a_00 closes row 0, each evaluated around its dominant term. Rows whose
/// denominator underflows are replaced by the predicted next-epoch marginal and
/// counted in floored_rows.
inline TransitionMatrix transition_matrix(const StateEstimate& est, const RoadSegmentSet& from,
                                          const RoadSegmentSet& to, double T, const Mat2& Q_pp,
                                          TransitionOptions opts = {}) {
    if (est.kind != EstimateKind::Posterior) throw ModelError("transition_matrix: expects a posterior estimate");
    FrameMode mode = opts.frames;
    if (mode == FrameMode::Automatic) {
        mode = (&from == &to && from.parallel()) ? FrameMode::SingleFrame : FrameMode::PerLane;
    }
    const bool parallel_geometry = from.parallel() && to.parallel();
    const detail::LanePairModel model(est, from, to, T, Q_pp, mode);
    const std::size_t nf = model.from_lanes(), nt = model.to_lanes();
    const bool direct_k = model.direct_offroad_k(), direct_n = model.direct_offroad_next();

    Eigen::MatrixXd joint(nf, nt);
    std::vector<double> p_k(nf), p_next(nt);
    for (std::size_t i = 0; i < nf; ++i) p_k[i] = model.mass_k(i + 1);
    for (std::size_t j = 0; j < nt; ++j) p_next[j] = model.mass_next(j + 1);
    for (std::size_t i = 0; i < nf; ++i) {
        for (std::size_t j = 0; j < nt; ++j) joint(i, j) = model.pair(i + 1, j + 1);
    }

    TransitionMatrix out;
    out.epoch = est.epoch;
    out.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(nf + 1), static_cast<Eigen::Index>(nt + 1));

    bool clamped = false;
    const double p0_k = direct_k ? model.mass_k(0)
                                 : detail::offroad_mass(p_k, [&](std::size_t c) { return model.complement_k(c + 1); },
                                                        clamped);
    const double p0_next =
        direct_n ? model.mass_next(0)
                 : detail::offroad_mass(p_next, [&](std::size_t c) { return model.complement_next(c + 1); }, clamped);

    auto fallback_row = [&](Eigen::Index row) {
        out.values(row, 0) = p0_next;
        for (std::size_t j = 0; j < nt; ++j) out.values(row, static_cast<Eigen::Index>(j + 1)) = p_next[j];
        ++out.floored_rows;
    };
    auto settle = [&](double value, double denominator) {
        if (value >= 0.0) return value;
        if (value >= -kNegativeTolerance || denominator < kTailDenominator || !parallel_geometry) {
            ++out.clamped_entries;
            return 0.0;
        }
        throw ModelError("transition_matrix: negative off-road complement (model inconsistency)");
    };

    for (std::size_t i = 0; i < nf; ++i) {
        const auto row = static_cast<Eigen::Index>(i + 1);
        if (p_k[i] < kProbabilityFloor) {
            fallback_row(row);
            continue;
        }
        double to_offroad = 0.0;
        if (direct_n) {
            to_offroad = model.pair(i + 1, 0);
        } else {
            // P(lane i, off-road next) = P(lane i) - sum_j P(lane i, lane j)
            std::size_t d = 0;
            for (std::size_t j = 1; j < nt; ++j) {
                if (joint(i, j) > joint(i, d)) d = j;
            }
            to_offroad = model.pair_outside_next(i + 1, d + 1);
            for (std::size_t j = 0; j < nt; ++j) {
                if (j != d) to_offroad -= joint(i, j);
            }
        }
        out.values(row, 0) = settle(to_offroad / p_k[i], p_k[i]);
        for (std::size_t j = 0; j < nt; ++j) {
            out.values(row, static_cast<Eigen::Index>(j + 1)) = joint(i, j) / p_k[i];
        }
    }

    if (p0_k < kProbabilityFloor) {
        fallback_row(0);
    } else {
        double lane_sum = 0.0;
        for (std::size_t j = 0; j < nt; ++j) {
            double from_offroad = 0.0;
            if (direct_k) {
                from_offroad = model.pair(0, j + 1);
            } else {
                // P(off-road, lane j next) = P(lane j next) - sum_i P(lane i, lane j)
                std::size_t c = 0;
                for (std::size_t i = 1; i < nf; ++i) {
                    if (joint(i, j) > joint(c, j)) c = i;
                }
                from_offroad = model.pair_outside_k(c + 1, j + 1);
                for (std::size_t i = 0; i < nf; ++i) {
                    if (i != c) from_offroad -= joint(i, j);
                }
            }
            const double a = settle(from_offroad / p0_k, p0_k);
            out.values(0, static_cast<Eigen::Index>(j + 1)) = a;
            lane_sum += a;
        }
        out.values(0, 0) = direct_k && direct_n ? model.pair(0, 0) / p0_k : settle(1.0 - lane_sum, p0_k);
    }
    if (clamped) ++out.clamped_entries;

    for (Eigen::Index r = 0; r < out.values.rows(); ++r) {
        const double sum = out.values.row(r).sum();
        if (!(sum > 0.0) || !std::isfinite(sum)) throw ModelError("transition_matrix: row does not normalize");
        // far-tail rows lose relative accuracy in the rectangle masses; they are still renormalized
        const double mass = r == 0 ? p0_k : p_k[static_cast<std::size_t>(r - 1)];
        if (mass >= kTailDenominator) out.max_row_residual = std::max(out.max_row_residual, std::abs(sum - 1.0));
        out.values.row(r) /= sum;
    }
    return out;
}

inline InitialDistribution initial_distribution(std::size_t n_lanes) {
    InitialDistribution pi;
    pi.values = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n_lanes + 1), 1.0 / static_cast<double>(n_lanes + 1));
    return pi;
}

/// Elementwise product with the first emission vector, normalized.
inline InitialDistribution posterior_initial(const InitialDistribution& prior, const EmissionVector& b0) {
    if (prior.size() != b0.size()) throw ModelError("posterior_initial: dimension mismatch");
    InitialDistribution post;
    post.values = prior.values.cwiseProduct(b0.values);
    const double total = post.values.sum();
    if (!(total > 0.0)) throw ModelError("posterior_initial: product is identically zero");
    post.values /= total;
    return post;
}

}  // namespace lanehmm
