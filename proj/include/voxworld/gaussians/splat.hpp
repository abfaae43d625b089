// Copyright Contributors to the voxworld Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "voxworld/buffers/camera.hpp"
#include "voxworld/buffers/image.hpp"
#include "voxworld/gaussians/scene.hpp"

#include <algorithm>
#include <numeric>

namespace voxworld::gaussians {

inline constexpr double kSplatNearClip = 0.2;
inline constexpr double kSplatDilation = 0.3;
inline constexpr double kSplatMinAlpha = 1.0 / 255.0;
inline constexpr double kSplatMaxAlpha = 0.99;

/// Screen-space footprint of one Gaussian (EWA, local affine approximation of the projection).
struct ProjectedSplat {
    double mu_u = 0.0, mu_v = 0.0;            // continuous pixel coordinates of the center
    double conic_a = 0.0, conic_b = 0.0, conic_c = 0.0;  // inverse 2D covariance [a b; b c]
    double radius = 0.0;                      // pixels beyond this radius have alpha < 1/255
    double depth = 0.0;                       // camera z of the center
    double opacity = 0.0;
    Vec3 color = Vec3::Zero();
};

inline std::optional<ProjectedSplat> project_gaussian(const Gaussian3D &g, const buffers::Camera &cam) {
    if (!(g.opacity >= kSplatMinAlpha)) return std::nullopt;
    const Rigid cam_from_world = cam.pose.inverse();
    const Vec3 p = cam_from_world * g.position;
    if (!(p.z() > kSplatNearClip)) return std::nullopt;
    Eigen::Matrix<double, 2, 3> J;
    J << cam.fx / p.z(), 0.0, -cam.fx * p.x() / (p.z() * p.z()), 0.0, cam.fy / p.z(), -cam.fy * p.y() / (p.z() * p.z());
    const Mat3 W = cam_from_world.linear();
    Eigen::Matrix2d cov = J * W * g.covariance() * W.transpose() * J.transpose();
    cov(0, 0) += kSplatDilation;
    cov(1, 1) += kSplatDilation;
    const double det = cov.determinant();
    if (!(det > 0.0)) return std::nullopt;
    ProjectedSplat s;
    s.mu_u = cam.fx * p.x() / p.z() + cam.cx;
    s.mu_v = cam.fy * p.y() / p.z() + cam.cy;
    s.conic_a = cov(1, 1) / det;
    s.conic_b = -cov(0, 1) / det;
    s.conic_c = cov(0, 0) / det;
    const double mid = 0.5 * (cov(0, 0) + cov(1, 1));
    const double lambda_max = mid + std::sqrt(std::max(0.0, mid * mid - det));
    s.radius = std::sqrt(2.0 * lambda_max * std::log(255.0 * g.opacity));
    s.depth = p.z();
    s.opacity = g.opacity;
    s.color = g.color;
    return s;
}

/// Alpha of a splat at a pixel center, or 0 below the 1/255 cutoff.
inline double splat_alpha(const ProjectedSplat &s, double px, double py) {
    const double dx = px - s.mu_u, dy = py - s.mu_v;
    const double power = -0.5 * (s.conic_a * dx * dx + 2.0 * s.conic_b * dx * dy + s.conic_c * dy * dy);
    const double alpha = std::min(kSplatMaxAlpha, s.opacity * std::exp(power));
    return alpha >= kSplatMinAlpha ? alpha : 0.0;
}

struct SplatImage {
    buffers::Image<double> rgb;
    buffers::Image<double> alpha;
    /// Alpha-normalized expected camera z of the composited splats; 0 where alpha is 0.
    buffers::Image<double> depth;
};

/// Front-to-back alpha compositing of Gaussians sorted by (camera z, input index);
/// the sky fills the transmittance left at each pixel.
inline SplatImage render_gaussians(std::span<const Gaussian3D> gaussians, const buffers::Camera &cam, const SkyState &sky) {
    std::vector<std::pair<ProjectedSplat, std::size_t>> splats;
    for (std::size_t n = 0; n < gaussians.size(); ++n)
        if (auto s = project_gaussian(gaussians[n], cam)) splats.emplace_back(*s, n);
    std::sort(splats.begin(), splats.end(), [](const auto &a, const auto &b) {
        return a.first.depth != b.first.depth ? a.first.depth < b.first.depth : a.second < b.second;
    });

    const int W = cam.width, H = cam.height;
    buffers::Image<double> color(W, H, 3, 0.0), trans(W, H, 1, 1.0), depth(W, H, 1, 0.0);
    for (const auto &[s, index] : splats) {
        const int u0 = std::max(0, static_cast<int>(std::ceil(s.mu_u - s.radius - 0.5)));
        const int u1 = std::min(W - 1, static_cast<int>(std::floor(s.mu_u + s.radius - 0.5)));
        const int v0 = std::max(0, static_cast<int>(std::ceil(s.mu_v - s.radius - 0.5)));
        const int v1 = std::min(H - 1, static_cast<int>(std::floor(s.mu_v + s.radius - 0.5)));
        for (int v = v0; v <= v1; ++v)
            for (int u = u0; u <= u1; ++u) {
                const double a = splat_alpha(s, u + 0.5, v + 0.5);
                if (a == 0.0) continue;
                double &T = trans.at(u, v);
                const double w = T * a;
                for (int c = 0; c < 3; ++c) color.at(u, v, c) += w * s.color[c];
                depth.at(u, v) += w * s.depth;
                T *= 1.0 - a;
            }
    }
    SplatImage out{buffers::Image<double>(W, H, 3), buffers::Image<double>(W, H, 1), buffers::Image<double>(W, H, 1)};
    for (int v = 0; v < H; ++v)
        for (int u = 0; u < W; ++u) {
            const double T = trans.at(u, v);
            const Vec3 bg = sky.color(cam.ray_direction(u, v));
            for (int c = 0; c < 3; ++c) out.rgb.at(u, v, c) = color.at(u, v, c) + T * bg[c];
            out.alpha.at(u, v) = 1.0 - T;
            out.depth.at(u, v) = T < 1.0 ? depth.at(u, v) / (1.0 - T) : 0.0;
        }
    return out;
}

inline SplatImage render_splats(const GaussianScene &scene, const buffers::Camera &cam, double t) {
    const auto posed = posed_gaussians(scene, t);
    std::vector<Gaussian3D> gs;
    gs.reserve(posed.size());
    for (const auto &p : posed) gs.push_back(p.gaussian);
    return render_gaussians(gs, cam, scene.sky);
}

} // namespace voxworld::gaussians
