// Copyright Contributors to the voxworld Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "voxworld/buffers/camera.hpp"
#include "voxworld/buffers/image.hpp"
#include "voxworld/core/errors.hpp"
#include "voxworld/core/geometry.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <optional>
#include <random>

namespace voxworld::gaussians {

inline constexpr int kSkyDim = 192;
inline constexpr int kSkyFourierLevels = 4;
inline constexpr int kSkyDirFeatures = 3 + 3 * 2 * kSkyFourierLevels;  // 27
inline constexpr int kSkyPatch = 8;
inline constexpr int kSkyPatchValues = kSkyPatch * kSkyPatch * 3;  // 192

/// Direction features [d, sin(2^l pi d), cos(2^l pi d)] for l = 0..L-1.
inline Eigen::VectorXd direction_features(const Vec3 &d) {
    Eigen::VectorXd f(kSkyDirFeatures);
    f.head<3>() = d;
    int n = 3;
    for (int l = 0; l < kSkyFourierLevels; ++l) {
        const double w = std::ldexp(M_PI, l);
        for (int a = 0; a < 3; ++a) f[n++] = std::sin(w * d[a]);
        for (int a = 0; a < 3; ++a) f[n++] = std::cos(w * d[a]);
    }
    return f;
}

/// Weights of the sky encoder and decoder. Matrices act on column vectors.
struct SkyModelParams {
    // decoder: gamma(d) = embed_w * features(d) + embed_b, AdaLN from c, rgb = out_w * x + out_b
    Eigen::MatrixXd embed_w = Eigen::MatrixXd::Zero(kSkyDim, kSkyDirFeatures);
    Eigen::VectorXd embed_b = Eigen::VectorXd::Zero(kSkyDim);
    Eigen::MatrixXd scale_w = Eigen::MatrixXd::Zero(kSkyDim, kSkyDim);
    Eigen::VectorXd scale_b = Eigen::VectorXd::Zero(kSkyDim);
    Eigen::MatrixXd shift_w = Eigen::MatrixXd::Zero(kSkyDim, kSkyDim);
    Eigen::VectorXd shift_b = Eigen::VectorXd::Zero(kSkyDim);
    Eigen::MatrixXd out_w = Eigen::MatrixXd::Zero(3, kSkyDim);
    Eigen::VectorXd out_b = Eigen::VectorXd::Zero(3);
    // encoder: one single-head attention block over sky patch tokens
    Eigen::VectorXd query = Eigen::VectorXd::Zero(kSkyDim);
    Eigen::MatrixXd patch_w = Eigen::MatrixXd::Zero(kSkyDim, kSkyPatchValues);
    Eigen::VectorXd patch_b = Eigen::VectorXd::Zero(kSkyDim);
    Eigen::MatrixXd pos_w = Eigen::MatrixXd::Zero(kSkyDim, kSkyDirFeatures);
    Eigen::MatrixXd wq = Eigen::MatrixXd::Zero(kSkyDim, kSkyDim);
    Eigen::MatrixXd wk = Eigen::MatrixXd::Zero(kSkyDim, kSkyDim);
    Eigen::MatrixXd wv = Eigen::MatrixXd::Zero(kSkyDim, kSkyDim);
    Eigen::MatrixXd wo = Eigen::MatrixXd::Zero(kSkyDim, kSkyDim);

    /// Gaussian-initialized weights with standard deviation 1/sqrt(fan_in).
    static SkyModelParams random(std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> normal(0.0, 1.0);
        SkyModelParams p;
        const auto fill = [&](Eigen::MatrixXd &m) {
            const double s = 1.0 / std::sqrt(static_cast<double>(m.cols()));
            for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = s * normal(rng);
        };
        const auto fill_vec = [&](Eigen::VectorXd &v, double s) {
            for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = s * normal(rng);
        };
        fill(p.embed_w), fill_vec(p.embed_b, 0.1);
        fill(p.scale_w), fill_vec(p.scale_b, 0.1);
        fill(p.shift_w), fill_vec(p.shift_b, 0.1);
        fill(p.out_w), fill_vec(p.out_b, 0.1);
        fill_vec(p.query, 1.0);
        fill(p.patch_w), fill_vec(p.patch_b, 0.1);
        fill(p.pos_w), fill(p.wq), fill(p.wk), fill(p.wv), fill(p.wo);
        return p;
    }

    [[nodiscard]] bool all_finite() const {
        for (const auto *m : {&embed_w, &scale_w, &shift_w, &out_w, &patch_w, &pos_w, &wq, &wk, &wv, &wo})
            if (!m->allFinite()) return false;
        for (const auto *v : {&embed_b, &scale_b, &shift_b, &out_b, &query, &patch_b})
            if (!v->allFinite()) return false;
        return true;
    }
};

/// LayerNorm without affine parameters (epsilon 1e-6).
inline Eigen::VectorXd layer_norm(const Eigen::VectorXd &x) {
    const double mean = x.mean();
    const double var = (x.array() - mean).square().mean();
    return (x.array() - mean) / std::sqrt(var + 1e-6);
}

/// x = LN(gamma(d)); x = x * (1 + scale(c)) + shift(c); rgb = out(x). Not clamped.
inline Vec3 sky_eval(const SkyModelParams &p, const Eigen::VectorXd &c, const Vec3 &direction) {
    if (c.size() != kSkyDim) throw std::invalid_argument("sky vector must have 192 entries");
    const Eigen::VectorXd x = layer_norm(p.embed_w * direction_features(direction) + p.embed_b);
    const Eigen::VectorXd scale = p.scale_w * c + p.scale_b;
    const Eigen::VectorXd shift = p.shift_w * c + p.shift_b;
    const Eigen::VectorXd mod = x.cwiseProduct(Eigen::VectorXd::Ones(kSkyDim) + scale) + shift;
    return p.out_w * mod + p.out_b;
}

struct SkyPatch {
    Eigen::VectorXd pixels;  // 8 x 8 x 3 values, row-major
    Vec3 direction;          // unit ray through the patch center
};

/// Single-head attention of the query token over the patch tokens, with a residual:
///   c = c_query + Wo * sum_i softmax_i(q . k_i / sqrt(D)) v_i
/// An empty patch set contributes nothing, so c = c_query.
inline Eigen::VectorXd sky_encode(const SkyModelParams &p, const std::vector<SkyPatch> &patches) {
    if (patches.empty()) return p.query;
    const Eigen::VectorXd q = p.wq * p.query;
    std::vector<double> logits;
    std::vector<Eigen::VectorXd> values;
    for (const auto &patch : patches) {
        if (patch.pixels.size() != kSkyPatchValues) throw std::invalid_argument("sky patch must have 192 values");
        const Eigen::VectorXd token = p.patch_w * patch.pixels + p.patch_b + p.pos_w * direction_features(patch.direction);
        logits.push_back(q.dot(p.wk * token) / std::sqrt(static_cast<double>(kSkyDim)));
        values.push_back(p.wv * token);
    }
    const double m = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double &l : logits) z += (l = std::exp(l - m));
    Eigen::VectorXd attended = Eigen::VectorXd::Zero(kSkyDim);
    for (std::size_t i = 0; i < values.size(); ++i) attended += (logits[i] / z) * values[i];
    return p.query + p.wo * attended;
}

/// Full 8 x 8 patches whose pixels are more than half sky.
inline std::vector<SkyPatch> sky_patches(const buffers::Image<double> &image, const buffers::Mask &sky,
                                         const buffers::Camera &cam) {
    if (image.channels() != 3 || !image.same_shape(sky.width(), sky.height())) {
        throw std::invalid_argument("sky_patches: image and mask shapes differ");
    }
    std::vector<SkyPatch> out;
    for (int pv = 0; pv + kSkyPatch <= image.height(); pv += kSkyPatch) {
        for (int pu = 0; pu + kSkyPatch <= image.width(); pu += kSkyPatch) {
            int count = 0;
            for (int v = pv; v < pv + kSkyPatch; ++v)
                for (int u = pu; u < pu + kSkyPatch; ++u) count += sky.at(u, v) != 0;
            if (2 * count <= kSkyPatch * kSkyPatch) continue;
            SkyPatch patch;
            patch.pixels.resize(kSkyPatchValues);
            int n = 0;
            for (int v = pv; v < pv + kSkyPatch; ++v)
                for (int u = pu; u < pu + kSkyPatch; ++u)
                    for (int c = 0; c < 3; ++c) patch.pixels[n++] = image.at(u, v, c);
            const Vec3 d_cam((pu + 0.5 * kSkyPatch - cam.cx) / cam.fx, (pv + 0.5 * kSkyPatch - cam.cy) / cam.fy, 1.0);
            patch.direction = (cam.pose.linear() * d_cam).normalized();
            out.push_back(std::move(patch));
        }
    }
    return out;
}

/// Sky appearance attached to a scene: a learned model with its sky vector, or a horizon gradient.
struct SkyState {
    std::optional<SkyModelParams> params;
    Eigen::VectorXd c;

    [[nodiscard]] Vec3 color(const Vec3 &direction) const {
        if (params) return sky_eval(*params, c, direction).cwiseMax(0.0).cwiseMin(1.0);
        return fallback_sky(direction);
    }

    /// Horizon-to-zenith gradient used when no sky model is configured.
    static Vec3 fallback_sky(const Vec3 &direction) {
        const Vec3 horizon(0.85, 0.90, 0.95), zenith(0.30, 0.50, 0.85);
        const double u = std::clamp(direction.normalized().z(), 0.0, 1.0);
        return (1.0 - u) * horizon + u * zenith;
    }
};

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd &m) {
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json &j, Eigen::Index rows, Eigen::Index cols) {
    if (j.at("rows").get<Eigen::Index>() != rows || j.at("cols").get<Eigen::Index>() != cols) {
        throw FormatError("sky parameter has the wrong shape");
    }
    const auto data = j.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw FormatError("sky parameter has the wrong size");
    return Eigen::Map<const Eigen::MatrixXd>(data.data(), rows, cols);
}

/// Column-major matrices: {"name": {"rows", "cols", "data": [...]}, ...}.
inline nlohmann::json sky_params_to_json(const SkyModelParams &p) {
    return {{"embed_w", matrix_to_json(p.embed_w)}, {"embed_b", matrix_to_json(p.embed_b)},
            {"scale_w", matrix_to_json(p.scale_w)}, {"scale_b", matrix_to_json(p.scale_b)},
            {"shift_w", matrix_to_json(p.shift_w)}, {"shift_b", matrix_to_json(p.shift_b)},
            {"out_w", matrix_to_json(p.out_w)},     {"out_b", matrix_to_json(p.out_b)},
            {"query", matrix_to_json(p.query)},     {"patch_w", matrix_to_json(p.patch_w)},
            {"patch_b", matrix_to_json(p.patch_b)}, {"pos_w", matrix_to_json(p.pos_w)},
            {"wq", matrix_to_json(p.wq)},           {"wk", matrix_to_json(p.wk)},
            {"wv", matrix_to_json(p.wv)},           {"wo", matrix_to_json(p.wo)}};
}

inline SkyModelParams sky_params_from_json(const nlohmann::json &j) {
    SkyModelParams p;
    try {
        const auto load = [&](const char *name, Eigen::MatrixXd &m) { m = matrix_from_json(j.at(name), m.rows(), m.cols()); };
        const auto load_vec = [&](const char *name, Eigen::VectorXd &v) { v = matrix_from_json(j.at(name), v.size(), 1); };
        load("embed_w", p.embed_w), load_vec("embed_b", p.embed_b);
        load("scale_w", p.scale_w), load_vec("scale_b", p.scale_b);
        load("shift_w", p.shift_w), load_vec("shift_b", p.shift_b);
        load("out_w", p.out_w), load_vec("out_b", p.out_b);
        load_vec("query", p.query), load("patch_w", p.patch_w), load_vec("patch_b", p.patch_b);
        load("pos_w", p.pos_w), load("wq", p.wq), load("wk", p.wk), load("wv", p.wv), load("wo", p.wo);
    } catch (const nlohmann::json::exception &e) {
        throw FormatError(std::string("invalid sky parameters: ") + e.what());
    }
    if (!p.all_finite()) throw FormatError("sky parameters must be finite");
    return p;
}

} // namespace voxworld::gaussians
