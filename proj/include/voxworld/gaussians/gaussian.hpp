// Copyright Contributors to the voxworld Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "voxworld/core/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <span>

namespace voxworld::gaussians {

struct Gaussian3D {
    Vec3 position = Vec3::Zero();
    Quat rotation = Quat::Identity();
    /// Per-axis standard deviations in meters.
    Vec3 scale = Vec3::Constant(0.1);
    double opacity = 1.0;
    Vec3 color = Vec3::Constant(0.5);

    [[nodiscard]] Mat3 covariance() const {
        const Mat3 r = rotation.toRotationMatrix();
        return r * scale.cwiseAbs2().asDiagonal() * r.transpose();
    }

    [[nodiscard]] Gaussian3D transformed(const Rigid &pose) const {
        Gaussian3D g = *this;
        g.position = pose * position;
        g.rotation = Quat(pose.linear()) * rotation;
        g.rotation.normalize();
        return g;
    }
};

inline constexpr double kScaleMin = 1e-4;
inline constexpr double kScaleMax = 50.0;
inline constexpr double kZNear = 0.5;
inline constexpr double kZFar = 300.0;

// Raw channel layouts.
//   voxel branch, per Gaussian: rgb(3) rotation wxyz(4) scale(3) opacity(1) offset(3)
//   pixel branch, per Gaussian: rgb(3) rotation wxyz(4) scale(3) opacity(1) depth(1)
inline constexpr int kGaussiansPerVoxel = 4;
inline constexpr int kVoxelGaussianChannels = 14;
inline constexpr int kVoxelParamCount = kGaussiansPerVoxel * kVoxelGaussianChannels;  // 56
inline constexpr int kGaussiansPerPixel = 2;
inline constexpr int kPixelGaussianChannels = 12;
inline constexpr int kPixelParamCount = kGaussiansPerPixel * kPixelGaussianChannels;  // 24

inline constexpr int kRawColor = 0;
inline constexpr int kRawRotation = 3;
inline constexpr int kRawScale = 7;
inline constexpr int kRawOpacity = 10;
inline constexpr int kRawOffset = 11;
inline constexpr int kRawDepth = 11;

inline Vec3 activate_color(std::span<const double> raw) { return {sigmoid(raw[0]), sigmoid(raw[1]), sigmoid(raw[2])}; }
inline double activate_opacity(double raw) { return sigmoid(raw); }

inline Vec3 activate_scale(std::span<const double> raw) {
    Vec3 s;
    for (int a = 0; a < 3; ++a) s[a] = std::clamp(std::exp(raw[a]), kScaleMin, kScaleMax);
    return s;
}

/// Normalized (w, x, y, z) quaternion; a zero vector maps to the identity.
inline Quat activate_rotation(std::span<const double> raw) {
    Quat q(raw[0], raw[1], raw[2], raw[3]);
    const double n = q.norm();
    if (!(n > 0.0) || !std::isfinite(n)) return Quat::Identity();
    q.coeffs() /= n;
    return q;
}

/// Depth parameterization: omega = sigmoid(raw), z = (1 - omega) z_near + omega z_far.
inline double depth_from_raw(double raw, double z_near = kZNear, double z_far = kZFar) {
    const double w = sigmoid(raw);
    return (1.0 - w) * z_near + w * z_far;
}

/// Inverse of depth_from_raw for z in (z_near, z_far).
inline double raw_from_depth(double z, double z_near = kZNear, double z_far = kZFar) {
    return logit((z - z_near) / (z_far - z_near));
}

inline double inverse_sigmoid(double p) { return logit(std::clamp(p, 1e-6, 1.0 - 1e-6)); }

} // namespace voxworld::gaussians
