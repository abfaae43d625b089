// Copyright Contributors to the voxworld Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "voxworld/buffers/camera.hpp"
#include "voxworld/buffers/image.hpp"
#include "voxworld/gaussians/gaussian.hpp"
#include "voxworld/grid/sparse_grid.hpp"

#include <stdexcept>
#include <vector>

namespace voxworld::gaussians {

/// Raw voxel-branch output: kVoxelParamCount values per voxel, voxels in grid iteration order.
struct VoxelGaussianParams {
    std::vector<double> values;
};

/// Raw pixel-branch output: an H x W image with kPixelParamCount channels.
using PixelGaussianParams = buffers::Image<double>;

inline Gaussian3D decode_common(std::span<const double> g) {
    Gaussian3D out;
    out.color = activate_color(g.subspan(kRawColor, 3));
    out.rotation = activate_rotation(g.subspan(kRawRotation, 4));
    out.scale = activate_scale(g.subspan(kRawScale, 3));
    out.opacity = activate_opacity(g[kRawOpacity]);
    return out;
}

/// Four Gaussians per voxel at center + tanh(raw offset) * voxel_size, in grid iteration order.
inline std::vector<Gaussian3D> decode_voxel_gaussians(const SparseVoxelGrid &grid, const VoxelGaussianParams &params) {
    if (params.values.size() != grid.size() * kVoxelParamCount) {
        throw std::invalid_argument("voxel params must hold 56 values per voxel");
    }
    std::vector<Gaussian3D> out;
    out.reserve(grid.size() * kGaussiansPerVoxel);
    std::size_t n = 0;
    for (const auto &[c, v] : grid) {
        const Vec3 center = grid.cell_center(c);
        for (int k = 0; k < kGaussiansPerVoxel; ++k) {
            const std::span<const double> g(&params.values[(n * kGaussiansPerVoxel + k) * kVoxelGaussianChannels],
                                            kVoxelGaussianChannels);
            Gaussian3D gs = decode_common(g);
            const Vec3 off(std::tanh(g[kRawOffset]), std::tanh(g[kRawOffset + 1]), std::tanh(g[kRawOffset + 2]));
            gs.position = center + off * grid.voxel_size();
            out.push_back(gs);
        }
        ++n;
    }
    return out;
}

/// World position of a pixel Gaussian: depth z along the look-at axis, so the distance along the
/// unit ray is t = z / cos(ray, look-at).
inline Vec3 pixel_gaussian_position(const buffers::Camera &cam, int u, int v, double z) {
    const Vec3 d_cam = cam.camera_direction(u, v);  // z component 1
    const double cos_angle = 1.0 / d_cam.norm();
    const double t = z / cos_angle;
    return cam.position() + t * cam.ray_direction(u, v);
}

/// Two Gaussians per pixel, pixel-major in row-major pixel order.
inline std::vector<Gaussian3D> decode_pixel_gaussians(const PixelGaussianParams &params, const buffers::Camera &cam,
                                                      double z_near = kZNear, double z_far = kZFar) {
    if (params.channels() != kPixelParamCount) throw std::invalid_argument("pixel params must have 24 channels");
    if (!params.same_shape(cam.width, cam.height)) throw std::invalid_argument("pixel params do not match the camera");
    std::vector<Gaussian3D> out;
    out.reserve(params.pixel_count() * kGaussiansPerPixel);
    for (int v = 0; v < cam.height; ++v)
        for (int u = 0; u < cam.width; ++u)
            for (int k = 0; k < kGaussiansPerPixel; ++k) {
                const std::span<const double> g(&params.at(u, v, k * kPixelGaussianChannels), kPixelGaussianChannels);
                Gaussian3D gs = decode_common(g);
                gs.position = pixel_gaussian_position(cam, u, v, depth_from_raw(g[kRawDepth], z_near, z_far));
                out.push_back(gs);
            }
    return out;
}

} // namespace voxworld::gaussians
