// Copyright Contributors to the voxworld Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "voxworld/buffers/render.hpp"
#include "voxworld/core/binary_io.hpp"
#include "voxworld/gaussians/decode.hpp"

#include <filesystem>

namespace voxworld::gaussians {

/// One frame handed to a predictor. The buffers and image are borrowed and must outlive the call.
struct PredictorFrame {
    std::size_t index = 0;
    buffers::TimedCamera camera;
    const buffers::GuidanceBufferSet *buffers = nullptr;
    /// H x W x 3 RGB in [0, 1].
    const buffers::Image<double> *image = nullptr;
};

inline void check_frame(const PredictorFrame &f) {
    if (!f.buffers || !f.image) throw std::invalid_argument("predictor frame is missing buffers or image");
    const auto &cam = f.camera.camera;
    if (f.image->channels() != 3 || !f.image->same_shape(cam.width, cam.height) ||
        !f.buffers->depth.same_shape(cam.width, cam.height)) {
        throw std::invalid_argument("predictor frame: image, buffers and camera are not aligned");
    }
}

/// Source of raw Gaussian parameters for the voxel and pixel branches.
class AttributePredictor {
  public:
    virtual ~AttributePredictor() = default;
    /// kVoxelParamCount raw values per voxel of `grid`, in grid iteration order.
    virtual VoxelGaussianParams predict_voxels(const SparseVoxelGrid &grid, std::span<const PredictorFrame> frames) = 0;
    /// H x W x kPixelParamCount raw values for one frame.
    virtual PixelGaussianParams predict_pixels(const PredictorFrame &frame) = 0;
};

inline constexpr double kHeuristicOpacity = 0.9;
inline constexpr double kHeuristicVoxelScale = 0.7;
/// A voxel takes color from a pixel only if its camera depth is within this distance of the depth buffer.
inline constexpr double kHeuristicVisibility = 0.5;

/// Deterministic stand-in for trained networks, driven by the guidance buffers and the image.
class HeuristicPredictor final : public AttributePredictor {
  public:
    explicit HeuristicPredictor(double z_near = kZNear, double z_far = kZFar) : z_near_(z_near), z_far_(z_far) {}

    /// Raw depth for a buffer depth: the inverse depth parameterization where depth > 0, else 0.
    [[nodiscard]] double raw_depth(double depth) const {
        if (!(depth > 0.0)) return 0.0;
        const double w = std::clamp((depth - z_near_) / (z_far_ - z_near_), 1e-12, 1.0 - 1e-12);
        return logit(w);
    }

    PixelGaussianParams predict_pixels(const PredictorFrame &frame) override {
        check_frame(frame);
        const auto &cam = frame.camera.camera;
        PixelGaussianParams out(cam.width, cam.height, kPixelParamCount, 0.0);
        for (int v = 0; v < cam.height; ++v)
            for (int u = 0; u < cam.width; ++u) {
                const double raw_z = raw_depth(frame.buffers->depth.at(u, v));
                const double z = depth_from_raw(raw_z, z_near_, z_far_);
                const double log_scale = std::log(std::clamp(z / cam.fx, kScaleMin, kScaleMax));
                for (int k = 0; k < kGaussiansPerPixel; ++k) {
                    double *g = &out.at(u, v, k * kPixelGaussianChannels);
                    for (int c = 0; c < 3; ++c) g[kRawColor + c] = inverse_sigmoid(frame.image->at(u, v, c));
                    g[kRawRotation] = 1.0;
                    for (int a = 0; a < 3; ++a) g[kRawScale + a] = log_scale;
                    g[kRawOpacity] = logit(kHeuristicOpacity);
                    g[kRawDepth] = raw_z;
                }
            }
        return out;
    }

    /// Color = mean image color over pixels where the voxel center projects and is visible; mid-gray otherwise.
    VoxelGaussianParams predict_voxels(const SparseVoxelGrid &grid, std::span<const PredictorFrame> frames) override {
        for (const auto &f : frames) check_frame(f);
        VoxelGaussianParams out;
        out.values.assign(grid.size() * kVoxelParamCount, 0.0);
        const double log_scale = std::log(kHeuristicVoxelScale * grid.voxel_size());
        std::size_t n = 0;
        for (const auto &[c, voxel] : grid) {
            const Vec3 center = grid.cell_center(c);
            Vec3 sum = Vec3::Zero();
            int count = 0;
            for (const auto &f : frames) {
                const auto p = f.camera.camera.project(center);
                if (!p) continue;
                const int u = static_cast<int>(std::floor((*p)[0])), v = static_cast<int>(std::floor((*p)[1]));
                if (u < 0 || v < 0 || u >= f.camera.camera.width || v >= f.camera.camera.height) continue;
                const double depth = f.buffers->depth.at(u, v);
                if (!(depth > 0.0) || std::abs(depth - (*p)[2]) > kHeuristicVisibility) continue;
                for (int k = 0; k < 3; ++k) sum[k] += f.image->at(u, v, k);
                ++count;
            }
            const Vec3 color = count > 0 ? Vec3(sum / count) : Vec3::Constant(0.5);
            for (int k = 0; k < kGaussiansPerVoxel; ++k) {
                double *g = &out.values[(n * kGaussiansPerVoxel + k) * kVoxelGaussianChannels];
                for (int a = 0; a < 3; ++a) g[kRawColor + a] = inverse_sigmoid(color[a]);
                g[kRawRotation] = 1.0;
                for (int a = 0; a < 3; ++a) g[kRawScale + a] = log_scale;
                g[kRawOpacity] = logit(kHeuristicOpacity);
            }
            ++n;
        }
        return out;
    }

  private:
    double z_near_;
    double z_far_;
};

/// Reads raw parameters produced offline by an external model from a directory:
///   voxel_params.bin            f32, kVoxelParamCount per voxel in grid iteration order
///   pixel_params_<frame>.bin    f32, H x W x kPixelParamCount row-major
/// where <frame> is the zero-padded frame index used by the buffer files.
class ExternalPredictor final : public AttributePredictor {
  public:
    explicit ExternalPredictor(std::filesystem::path dir) : dir_(std::move(dir)) {
        if (!std::filesystem::is_directory(dir_)) throw ConfigError("external predictor directory not found: " + dir_.string());
    }

    static std::string voxel_file() { return "voxel_params.bin"; }
    static std::string pixel_file(std::size_t frame) {
        char buf[48];
        std::snprintf(buf, sizeof buf, "pixel_params_%05zu.bin", frame);
        return buf;
    }

    VoxelGaussianParams predict_voxels(const SparseVoxelGrid &grid, std::span<const PredictorFrame>) override {
        const auto values = load(dir_ / voxel_file(), grid.size() * kVoxelParamCount);
        return {std::vector<double>(values.begin(), values.end())};
    }

    PixelGaussianParams predict_pixels(const PredictorFrame &frame) override {
        const auto &cam = frame.camera.camera;
        const auto values = load(dir_ / pixel_file(frame.index),
                                 static_cast<std::size_t>(cam.width) * cam.height * kPixelParamCount);
        PixelGaussianParams out(cam.width, cam.height, kPixelParamCount);
        std::copy(values.begin(), values.end(), out.values().begin());
        return out;
    }

  private:
    static std::vector<float> load(const std::filesystem::path &path, std::size_t expected) {
        if (!std::filesystem::exists(path)) throw FormatError("missing predictor output " + path.string());
        const auto bytes = io::read_file(path);
        if (bytes.size() != expected * sizeof(float)) {
            throw FormatError(path.string() + ": expected " + std::to_string(expected) + " f32 values");
        }
        auto values = io::unpack_f32(bytes);
        for (float x : values)
            if (!std::isfinite(x)) throw FormatError(path.string() + ": non-finite value");
        return values;
    }

    std::filesystem::path dir_;
};

/// Writes raw parameters in the layout ExternalPredictor reads.
inline void write_voxel_params(const std::filesystem::path &dir, const VoxelGaussianParams &params) {
    std::vector<float> f(params.values.begin(), params.values.end());
    io::write_file(dir / ExternalPredictor::voxel_file(), io::pack_f32(f));
}

inline void write_pixel_params(const std::filesystem::path &dir, std::size_t frame, const PixelGaussianParams &params) {
    std::vector<float> f(params.values().begin(), params.values().end());
    io::write_file(dir / ExternalPredictor::pixel_file(frame), io::pack_f32(f));
}

} // namespace voxworld::gaussians
