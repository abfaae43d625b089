// Copyright Contributors to the voxworld Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "voxworld/outpaint/latent.hpp"
#include "voxworld/outpaint/vparam.hpp"

#include <stdexcept>
#include <vector>

namespace voxworld::outpaint {

struct DenoiseRequest {
    const LatentCube &x_t;
    int timestep;
    double alpha_bar;
    const ConditionVolume &conditions;
    /// true for the unconditional (null-condition) branch of classifier-free guidance.
    bool null_condition;
};

/// Predicts v for a noisy latent. Implementations must be shape-preserving and deterministic.
class Denoiser {
  public:
    virtual ~Denoiser() = default;
    virtual std::vector<float> predict_v(const DenoiseRequest &request) = 0;
};

/// Exact v-prediction for latents distributed as N(mean, stddev^2 I) per element, where
///   mean[cell, c] = bias[c] + sum_k weights[c][k] * conditions[cell, k]
/// in the conditional branch and bias[c] in the null branch.
class ToyGaussianDenoiser final : public Denoiser {
  public:
    struct Params {
        std::vector<double> bias;                  // one per latent channel (size 1 broadcasts)
        double stddev = 1.0;
        std::vector<std::vector<double>> weights;  // [channel][condition channel], may be empty
    };

    explicit ToyGaussianDenoiser(Params params) : params_(std::move(params)) {
        if (params_.bias.empty()) throw std::invalid_argument("toy denoiser needs at least one bias value");
        if (!(params_.stddev >= 0.0)) throw std::invalid_argument("toy denoiser stddev must be >= 0");
    }

    ToyGaussianDenoiser(double mean, double stddev) : ToyGaussianDenoiser(Params{{mean}, stddev, {}}) {}

    [[nodiscard]] const Params &params() const { return params_; }

    [[nodiscard]] double mean_at(const ConditionVolume &cond, std::size_t cell, int channel, bool null_condition) const {
        double m = params_.bias.size() == 1 ? params_.bias[0] : params_.bias.at(static_cast<std::size_t>(channel));
        if (null_condition || params_.weights.empty()) return m;
        const auto &row = params_.weights.at(static_cast<std::size_t>(channel));
        const double *c = &cond.values()[cell * static_cast<std::size_t>(cond.channels())];
        for (std::size_t k = 0; k < row.size() && k < static_cast<std::size_t>(cond.channels()); ++k) m += row[k] * c[k];
        return m;
    }

    std::vector<float> predict_v(const DenoiseRequest &req) override {
        const auto &x = req.x_t;
        if (x.extent() != req.conditions.extent()) throw std::invalid_argument("latent and condition extents differ");
        const double a = signal_scale(req.alpha_bar), b = noise_scale(req.alpha_bar);
        const double var = params_.stddev * params_.stddev;
        const double s2 = a * a * var + b * b;
        std::vector<float> v(x.values().size());
        const int C = x.channels();
        for (std::size_t cell = 0; cell < x.cell_count(); ++cell) {
            for (int c = 0; c < C; ++c) {
                const std::size_t n = cell * C + c;
                const double mu = mean_at(req.conditions, cell, c, req.null_condition);
                const double r = static_cast<double>(x.values()[n]) - a * mu;
                // s2 == 0 only for a point-mass target at alpha_bar == 1, where x_t is already x0.
                const double x0 = s2 > 0.0 ? mu + a * var / s2 * r : static_cast<double>(x.values()[n]);
                const double eps = s2 > 0.0 ? b / s2 * r : 0.0;
                v[n] = static_cast<float>(a * eps - b * x0);
            }
        }
        return v;
    }

  private:
    Params params_;
};

} // namespace voxworld::outpaint
