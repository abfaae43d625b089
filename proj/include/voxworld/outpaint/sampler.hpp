// Copyright Contributors to the voxworld Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "voxworld/core/errors.hpp"
#include "voxworld/outpaint/denoiser.hpp"
#include "voxworld/outpaint/schedule.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>

namespace voxworld::outpaint {

struct SamplerOptions {
    int steps = 100;
    double guidance = 2.0;
    int latent_channels = 8;
};

/// Per-chunk generator. Seeding by (global seed, chunk index) keeps serial and parallel
/// chunk schedules bit-identical.
inline std::mt19937_64 chunk_rng(std::uint64_t seed, ChunkIndex index = {}) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index.x), static_cast<std::uint32_t>(index.y)};
    return std::mt19937_64(seq);
}

inline std::vector<float> standard_normal(std::mt19937_64 &rng, std::size_t count) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<float> out(count);
    for (auto &v : out) v = static_cast<float>(normal(rng));
    return out;
}

/// Classifier-free-guided v prediction. With w == 1 the unconditional branch is never evaluated.
inline std::vector<float> guided_v(Denoiser &denoiser, const LatentCube &x_t, int t, double alpha_bar,
                                   const ConditionVolume &cond, double w) {
    auto v_cond = denoiser.predict_v({x_t, t, alpha_bar, cond, false});
    if (v_cond.size() != x_t.values().size()) throw ProtocolError("denoiser returned a prediction of the wrong shape");
    if (w == 1.0) return v_cond;
    auto v_uncond = denoiser.predict_v({x_t, t, alpha_bar, cond, true});
    if (v_uncond.size() != x_t.values().size()) throw ProtocolError("denoiser returned a prediction of the wrong shape");
    return cfg_combine(v_cond, v_uncond, w);
}

/// Deterministic (eta = 0) DDIM update from timestep t to t_next <= t.
inline LatentCube ddim_step(const LatentCube &x_t, int t, int t_next, Denoiser &denoiser, const ConditionVolume &cond,
                            double guidance, const NoiseSchedule &schedule) {
    if (t_next > t) throw std::invalid_argument("ddim_step: t_next must not exceed t");
    const double ab = schedule.alpha_bar(t), ab_next = schedule.alpha_bar(t_next);
    const auto v = guided_v(denoiser, x_t, t, ab, cond, guidance);
    const double a = signal_scale(ab), b = noise_scale(ab);
    const double a_next = signal_scale(ab_next), b_next = noise_scale(ab_next);
    LatentCube out(x_t.frame(), x_t.channels(), 0.0f);
    auto &dst = out.values();
    const auto &src = x_t.values();
    for (std::size_t n = 0; n < src.size(); ++n) {
        const double x = src[n], vn = v[n];
        if (!std::isfinite(vn)) throw SamplerDiverged("non-finite v prediction at timestep " + std::to_string(t));
        const double x0 = a * x - b * vn;
        const double eps = b * x + a * vn;
        const double next = a_next * x0 + b_next * eps;
        if (!std::isfinite(next) || std::abs(next) > 3.0e38) {
            throw SamplerDiverged("non-finite latent at timestep " + std::to_string(t_next));
        }
        dst[n] = static_cast<float>(next);
    }
    return out;
}

/// X <- (1 - M) * X_new_hat + M * noised(X_exist), with noised(X) = sqrt(ab) X + sqrt(1 - ab) eps.
/// M is binary, so the blend selects per cell; at alpha_bar == 1 the masked cells are X_exist verbatim.
inline LatentCube repaint_blend(const LatentCube &x_new_hat, const LatentCube &x_exist, const OverlapMask &mask,
                                double alpha_bar, std::span<const float> eps) {
    if (x_new_hat.values().size() != x_exist.values().size() || eps.size() != x_exist.values().size() ||
        mask.cell_count() != x_new_hat.cell_count() || mask.channels() != 1) {
        throw std::invalid_argument("repaint_blend: shape mismatch");
    }
    const double a = signal_scale(alpha_bar), b = noise_scale(alpha_bar);
    LatentCube out = x_new_hat;
    const int C = out.channels();
    for (std::size_t cell = 0; cell < out.cell_count(); ++cell) {
        if (!mask.values()[cell]) continue;
        for (int c = 0; c < C; ++c) {
            const std::size_t n = cell * C + c;
            out.values()[n] = alpha_bar == 1.0 ? x_exist.values()[n]
                                               : static_cast<float>(a * x_exist.values()[n] + b * eps[n]);
        }
    }
    return out;
}

/// Full DDIM trajectory for one chunk, optionally constrained to an existing latent under a mask.
inline LatentCube sample_chunk(const ConditionVolume &cond, Denoiser &denoiser, const NoiseSchedule &schedule,
                               const SamplerOptions &opts, std::mt19937_64 &rng,
                               const std::optional<OverlapMask> &mask = std::nullopt,
                               const std::optional<LatentCube> &x_exist = std::nullopt) {
    if (mask.has_value() != x_exist.has_value()) {
        throw std::invalid_argument("sample_chunk: mask and x_exist must be supplied together");
    }
    if (x_exist && (x_exist->extent() != cond.extent() || x_exist->channels() != opts.latent_channels)) {
        throw std::invalid_argument("sample_chunk: x_exist shape does not match the chunk");
    }
    const auto ts = schedule.sampling_timesteps(opts.steps);
    LatentCube x(cond.frame(), opts.latent_channels,
                 standard_normal(rng, cond.cell_count() * static_cast<std::size_t>(opts.latent_channels)));
    const auto constrain = [&](const LatentCube &cur, int t) {
        if (!mask) return cur;
        const double ab = schedule.alpha_bar(t);
        const auto eps = ab == 1.0 ? std::vector<float>(cur.values().size(), 0.0f) : standard_normal(rng, cur.values().size());
        return repaint_blend(cur, *x_exist, *mask, ab, eps);
    };
    x = constrain(x, ts.front());
    for (std::size_t s = 0; s + 1 < ts.size(); ++s) {
        x = constrain(ddim_step(x, ts[s], ts[s + 1], denoiser, cond, opts.guidance, schedule), ts[s + 1]);
    }
    return x;
}

inline LatentCube sample_chunk(const ConditionVolume &cond, Denoiser &denoiser, const NoiseSchedule &schedule,
                               const SamplerOptions &opts, std::uint64_t seed,
                               const std::optional<OverlapMask> &mask = std::nullopt,
                               const std::optional<LatentCube> &x_exist = std::nullopt) {
    auto rng = chunk_rng(seed);
    return sample_chunk(cond, denoiser, schedule, opts, rng, mask, x_exist);
}

} // namespace voxworld::outpaint
