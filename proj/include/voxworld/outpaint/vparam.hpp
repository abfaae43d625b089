// Copyright Contributors to the voxworld Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace voxworld::outpaint {

// v-parameterization with a = sqrt(alpha_bar), b = sqrt(1 - alpha_bar):
//   x_t = a*x0 + b*eps,   v = a*eps - b*x0
//   x0  = a*x_t - b*v,    eps = b*x_t + a*v

inline double signal_scale(double alpha_bar) { return std::sqrt(alpha_bar); }
inline double noise_scale(double alpha_bar) { return std::sqrt(1.0 - alpha_bar); }

inline double noised(double x0, double eps, double alpha_bar) {
    return signal_scale(alpha_bar) * x0 + noise_scale(alpha_bar) * eps;
}

/// Regression target of the denoiser.
inline double v_target(double x0, double eps, double alpha_bar) {
    return signal_scale(alpha_bar) * eps - noise_scale(alpha_bar) * x0;
}

inline double v_to_x0(double x_t, double v, double alpha_bar) {
    return signal_scale(alpha_bar) * x_t - noise_scale(alpha_bar) * v;
}

inline double v_to_eps(double x_t, double v, double alpha_bar) {
    return noise_scale(alpha_bar) * x_t + signal_scale(alpha_bar) * v;
}

/// v = v_uncond + w * (v_cond - v_uncond). w == 1 returns v_cond and w == 0 returns v_uncond verbatim.
inline std::vector<float> cfg_combine(std::span<const float> v_cond, std::span<const float> v_uncond, double w) {
    if (v_cond.size() != v_uncond.size()) throw std::invalid_argument("cfg_combine: shape mismatch");
    if (w == 1.0) return {v_cond.begin(), v_cond.end()};
    if (w == 0.0) return {v_uncond.begin(), v_uncond.end()};
    std::vector<float> out(v_cond.size());
    for (std::size_t n = 0; n < out.size(); ++n) {
        const double u = v_uncond[n];
        out[n] = static_cast<float>(u + w * (static_cast<double>(v_cond[n]) - u));
    }
    return out;
}

} // namespace voxworld::outpaint
