#pragma once

// Position/velocity estimates from the navigation system and the constant-velocity
// propagation the transition model relies on. Units: m, m/s, m^2, m^2/s^2, s.

#include <Eigen/Eigenvalues>

#include "lanehmm/error.hpp"
#include "lanehmm/geodesy.hpp"

namespace lanehmm {

inline constexpr double kPsdTolerance = 1e-9;

enum class EstimateKind { Prior, Posterior };

struct StateEstimate {
    Vec2 p_hat = Vec2::Zero();
    Vec2 v_hat = Vec2::Zero();
    Mat2 C_pp = Mat2::Zero();
    Mat2 C_pv = Mat2::Zero();  // E[(p - p_hat)(v - v_hat)^T]
    Mat2 C_vv = Mat2::Zero();
    long epoch = 0;
    EstimateKind kind = EstimateKind::Posterior;

    Vec4 state() const {
        Vec4 x;
        x << p_hat, v_hat;
        return x;
    }

    Mat4 covariance() const {
        Mat4 c;
        c << C_pp, C_pv, C_pv.transpose(), C_vv;
        return c;
    }

    static StateEstimate from_state(const Vec4& x, const Mat4& c, long epoch, EstimateKind kind) {
        StateEstimate e;
        e.p_hat = x.head<2>();
        e.v_hat = x.tail<2>();
        e.C_pp = c.topLeftCorner<2, 2>();
        e.C_pv = c.topRightCorner<2, 2>();
        e.C_vv = c.bottomRightCorner<2, 2>();
        e.epoch = epoch;
        e.kind = kind;
        return e;
    }
};

template <int Dim>
bool is_psd(const Eigen::Matrix<double, Dim, Dim>& c, double tol = kPsdTolerance) {
    if (!c.allFinite()) return false;
    const double scale = std::max(1.0, c.cwiseAbs().maxCoeff());
    if ((c - c.transpose()).cwiseAbs().maxCoeff() > tol * scale) return false;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, Dim, Dim>> es(0.5 * (c + c.transpose()),
                                                                     Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff() >= -tol * scale;
}

inline void validate(const StateEstimate& e) {
    if (!e.p_hat.allFinite() || !e.v_hat.allFinite()) throw ModelError("state estimate: non-finite mean");
    if (!is_psd<4>(e.covariance())) {
        throw ModelError("state estimate at epoch " + std::to_string(e.epoch) + ": covariance is not PSD");
    }
}

/// Process noise for one propagation step. Q_pp is the position block of Q_d.
struct ProcessNoise {
    Mat4 Q_d = Mat4::Zero();

    Mat2 Q_pp() const { return Q_d.topLeftCorner<2, 2>(); }

    /// Isotropic white-noise intensities (m^2/s and m^2/s^3) integrated over T.
    static ProcessNoise from_intensity(double q_pos, double q_vel, double T) {
        if (!(T > 0.0)) throw ModelError("sample period must be positive");
        if (q_pos < 0.0 || q_vel < 0.0) throw ModelError("process noise intensities must be nonnegative");
        ProcessNoise q;
        q.Q_d.topLeftCorner<2, 2>() = q_pos * T * Mat2::Identity();
        q.Q_d.bottomRightCorner<2, 2>() = q_vel * T * Mat2::Identity();
        return q;
    }
};

/// Transition matrix of the constant-velocity model: [[I, T I], [0, I]].
inline Mat4 state_transition(double T) {
    Mat4 phi = Mat4::Identity();
    phi.topRightCorner<2, 2>() = T * Mat2::Identity();
    return phi;
}

inline StateEstimate propagate(const StateEstimate& est, double T, const Mat4& Q_d) {
    if (est.kind != EstimateKind::Posterior) throw ModelError("propagate: expects a posterior estimate");
    if (!(T >= 0.0)) throw ModelError("propagate: negative sample period");
    const Mat4 phi = state_transition(T);
    Mat4 c = phi * est.covariance() * phi.transpose() + Q_d;
    c = 0.5 * (c + c.transpose());
    return StateEstimate::from_state(phi * est.state(), c, est.epoch + 1, EstimateKind::Prior);
}

inline Vec2 predicted_position(const StateEstimate& est, double T) { return est.p_hat + est.v_hat * T; }

/// Covariance between the errors of p_hat_k and the predicted p_hat_{k+1}.
inline Mat2 cross_cov_position(const StateEstimate& est, double T) { return est.C_pp + est.C_pv * T; }

/// Covariance of the predicted position one step ahead. C_pv enters through its
/// symmetric part, which is what the full propagation produces.
inline Mat2 next_position_cov(const StateEstimate& est, double T, const Mat2& Q_pp) {
    Mat2 c = est.C_pp + T * (est.C_pv + est.C_pv.transpose()) + T * T * est.C_vv + Q_pp;
    c = 0.5 * (c + c.transpose());
    if (!is_psd<2>(c)) {
        throw ModelError("next_position_cov: result is not PSD (inconsistent covariance blocks)");
    }
    return c;
}

}  // namespace lanehmm
