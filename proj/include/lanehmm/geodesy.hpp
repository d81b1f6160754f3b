#pragma once

// Coordinate frames used throughout the library:
//   e - Earth-centered Earth-fixed (WGS-84), meters
//   g - intersection frame: local north/east/down anchored at a known ECEF point;
//       2-D quantities are (north, east)
//   l - per-segment lane frame: (s, f) with s along the right edge in the direction
//       of travel and f 90 degrees counter-clockwise from s (seen from above), so f
//       points toward the lane's left edge.

#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "lanehmm/error.hpp"

namespace lanehmm {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

namespace wgs84 {
inline constexpr double kSemiMajorAxis = 6378137.0;
inline constexpr double kFlattening = 1.0 / 298.257223563;
inline constexpr double kSemiMinorAxis = kSemiMajorAxis * (1.0 - kFlattening);
inline constexpr double kEccentricitySq = kFlattening * (2.0 - kFlattening);
}  // namespace wgs84

struct GeodeticCoord {
    double latitude = 0.0;   // rad
    double longitude = 0.0;  // rad
    double altitude = 0.0;   // m above the ellipsoid

    static GeodeticCoord from_degrees(double lat_deg, double lon_deg, double alt_m) {
        constexpr double d2r = std::numbers::pi / 180.0;
        GeodeticCoord g{lat_deg * d2r, lon_deg * d2r, alt_m};
        g.validate();
        return g;
    }

    void validate() const {
        if (!std::isfinite(latitude) || !std::isfinite(longitude) || !std::isfinite(altitude) ||
            std::abs(latitude) > std::numbers::pi / 2.0 || std::abs(longitude) > std::numbers::pi) {
            throw GeometryError("geodetic coordinate out of range");
        }
    }
};

struct EcefPoint {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    Vec3 vector() const { return {x, y, z}; }
    static EcefPoint from_vector(const Vec3& v) { return {v.x(), v.y(), v.z()}; }
};

inline EcefPoint geodetic_to_ecef(const GeodeticCoord& g) {
    using namespace wgs84;
    const double sin_lat = std::sin(g.latitude);
    const double cos_lat = std::cos(g.latitude);
    // prime vertical radius of curvature
    const double n = kSemiMajorAxis / std::sqrt(1.0 - kEccentricitySq * sin_lat * sin_lat);
    return {(n + g.altitude) * cos_lat * std::cos(g.longitude),
            (n + g.altitude) * cos_lat * std::sin(g.longitude),
            (n * (1.0 - kEccentricitySq) + g.altitude) * sin_lat};
}

/// Local north-east-down frame anchored at an ECEF origin.
class IntersectionFrame {
public:
    IntersectionFrame() : origin_{}, rotation_eg_(Mat3::Identity()) {}

    static IntersectionFrame from_geodetic(const GeodeticCoord& origin) {
        origin.validate();
        const double sl = std::sin(origin.latitude), cl = std::cos(origin.latitude);
        const double so = std::sin(origin.longitude), co = std::cos(origin.longitude);
        Mat3 r;
        r << -sl * co, -sl * so, cl,
             -so, co, 0.0,
             -cl * co, -cl * so, -sl;
        return IntersectionFrame(geodetic_to_ecef(origin), r);
    }

    const EcefPoint& origin_ecef() const { return origin_; }
    /// Rotates vectors from the e-frame into the g-frame.
    const Mat3& rotation_eg() const { return rotation_eg_; }

    Vec3 to_ned(const EcefPoint& p) const { return rotation_eg_ * (p.vector() - origin_.vector()); }
    EcefPoint from_ned(const Vec3& ned) const {
        return EcefPoint::from_vector(origin_.vector() + rotation_eg_.transpose() * ned);
    }

private:
    IntersectionFrame(EcefPoint origin, Mat3 r) : origin_(origin), rotation_eg_(std::move(r)) {}

    EcefPoint origin_;
    Mat3 rotation_eg_;
};

/// (north, east) of an ECEF point; the down component is dropped after rotation.
inline Vec2 ecef_to_intersection(const EcefPoint& p, const IntersectionFrame& frame) {
    const Vec3 ned = frame.to_ned(p);
    return {ned.x(), ned.y()};
}

/// Pose of one lane segment frame inside the g-frame.
///
/// alpha is the angle from the east axis to the s-axis, counter-clockwise seen from
/// above. Rows of rotation_gl are the s and f unit vectors written in (north, east)
/// components. Because (north, east) is a clockwise pair seen from above while (s, f)
/// is counter-clockwise, the matrix is orthonormal with determinant -1.
struct LaneFramePose {
    Vec2 origin_g = Vec2::Zero();
    double alpha = 0.0;
    Mat2 rotation_gl = Mat2::Identity();

    static LaneFramePose from_alpha(const Vec2& origin, double alpha) {
        const double sa = std::sin(alpha), ca = std::cos(alpha);
        LaneFramePose pose;
        pose.origin_g = origin;
        pose.alpha = alpha;
        pose.rotation_gl << sa, ca,
                            ca, -sa;
        return pose;
    }

    /// direction is a (north, east) vector along the s-axis; it need not be normalized.
    static LaneFramePose from_direction(const Vec2& origin, const Vec2& direction) {
        return from_alpha(origin, std::atan2(direction.x(), direction.y()));
    }

    Vec2 s_axis() const { return rotation_gl.row(0).transpose(); }
    Vec2 f_axis() const { return rotation_gl.row(1).transpose(); }
};

inline Vec2 intersection_to_lane(const Vec2& p_g, const LaneFramePose& pose) {
    return pose.rotation_gl * (p_g - pose.origin_g);
}

inline Vec2 lane_to_intersection(const Vec2& p_l, const LaneFramePose& pose) {
    return pose.origin_g + pose.rotation_gl.transpose() * p_l;
}

/// R C R^T for an orthonormal R. Rejects covariances that are not symmetric.
inline Mat2 rotate_cov(const Mat2& c, const Mat2& r) {
    const double scale = std::max(1.0, c.cwiseAbs().maxCoeff());
    if (std::abs(c(0, 1) - c(1, 0)) > 1e-9 * scale || !c.allFinite()) {
        throw ModelError("rotate_cov: covariance is not symmetric");
    }
    Mat2 out = r * c * r.transpose();
    const double off = 0.5 * (out(0, 1) + out(1, 0));
    out(0, 1) = off;
    out(1, 0) = off;
    return out;
}

}  // namespace lanehmm
