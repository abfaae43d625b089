// Copyright Contributors to the voxworld Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace voxworld {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;
using Rigid = Eigen::Isometry3d;

/// Axis-aligned box [min, max] in world meters.
struct Aabb {
    Vec3 min = Vec3::Zero();
    Vec3 max = Vec3::Zero();

    [[nodiscard]] bool empty() const { return (max.array() <= min.array()).any(); }

    /// Half-open containment: min <= p < max on every axis.
    [[nodiscard]] bool contains_half_open(const Vec3 &p) const {
        return (p.array() >= min.array()).all() && (p.array() < max.array()).all();
    }
};

inline bool all_finite(const Vec3 &v) { return v.allFinite(); }

/// Rotation about +z by `yaw` radians.
inline Mat3 yaw_rotation(double yaw) { return Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix(); }

/// Rigid transform with rotation `yaw` about +z followed by translation `t`.
inline Rigid yaw_pose(const Vec3 &t, double yaw) {
    Rigid pose = Rigid::Identity();
    pose.linear() = yaw_rotation(yaw);
    pose.translation() = t;
    return pose;
}

/// Wrap an angle to (-pi, pi].
inline double wrap_angle(double a) {
    if (a > -M_PI && a <= M_PI) return a;
    const double two_pi = 2.0 * M_PI;
    a = std::fmod(a + M_PI, two_pi);
    if (a <= 0.0) a += two_pi;
    return a - M_PI;
}

/// Ray parameter interval where the ray o + t d overlaps the closed box [lo, hi].
/// Returns nullopt when the ray line misses the box.
inline std::optional<std::pair<double, double>> ray_box_interval(const Vec3 &o, const Vec3 &d, const Vec3 &lo,
                                                                  const Vec3 &hi) {
    double t0 = -std::numeric_limits<double>::infinity();
    double t1 = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
        if (d[a] == 0.0) {
            if (o[a] < lo[a] || o[a] > hi[a]) return std::nullopt;
            continue;
        }
        const double inv = 1.0 / d[a];
        double ta = (lo[a] - o[a]) * inv;
        double tb = (hi[a] - o[a]) * inv;
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
        if (t0 > t1) return std::nullopt;
    }
    return std::make_pair(t0, t1);
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

} // namespace voxworld
