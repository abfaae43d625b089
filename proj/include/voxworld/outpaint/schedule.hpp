// Copyright Contributors to the voxworld Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace voxworld::outpaint {

/// Cumulative signal fractions alpha_bar[t] for t = 0..T. alpha_bar[0] == 1 exactly (clean data);
/// strictly decreasing in t and positive.
class NoiseSchedule {
  public:
    explicit NoiseSchedule(std::vector<double> alpha_bar) : alpha_bar_(std::move(alpha_bar)) {
        if (alpha_bar_.size() < 2) throw std::invalid_argument("schedule needs at least one diffusion step");
        if (alpha_bar_.front() != 1.0) throw std::invalid_argument("alpha_bar[0] must be 1");
        for (std::size_t t = 1; t < alpha_bar_.size(); ++t) {
            if (!(alpha_bar_[t] < alpha_bar_[t - 1]) || !(alpha_bar_[t] > 0.0)) {
                throw std::invalid_argument("alpha_bar must be strictly decreasing and positive");
            }
        }
    }

    /// Cosine schedule over `train_steps` timestamps, offset s = 0.008, betas clipped at 0.999.
    static NoiseSchedule cosine(int train_steps = 1000, double offset = 0.008) {
        const auto f = [&](double t) {
            const double c = std::cos((t / train_steps + offset) / (1.0 + offset) * M_PI / 2.0);
            return c * c;
        };
        std::vector<double> ab(static_cast<std::size_t>(train_steps) + 1);
        ab[0] = 1.0;
        for (int t = 1; t <= train_steps; ++t) {
            const double beta = std::min(1.0 - f(t) / f(t - 1), 0.999);
            ab[t] = ab[t - 1] * (1.0 - beta);
        }
        return NoiseSchedule(std::move(ab));
    }

    [[nodiscard]] int train_steps() const { return static_cast<int>(alpha_bar_.size()) - 1; }
    [[nodiscard]] double alpha_bar(int t) const { return alpha_bar_.at(static_cast<std::size_t>(t)); }
    [[nodiscard]] const std::vector<double> &values() const { return alpha_bar_; }

    /// Uniformly strided sampling timestamps from T down to 0 inclusive; `steps` transitions.
    [[nodiscard]] std::vector<int> sampling_timesteps(int steps) const {
        const int T = train_steps();
        if (steps <= 0 || steps > T) throw std::invalid_argument("sampling steps must be in [1, T]");
        std::vector<int> ts;
        ts.reserve(static_cast<std::size_t>(steps) + 1);
        for (int n = 0; n <= steps; ++n) {
            ts.push_back(static_cast<int>(std::lround(T - static_cast<double>(n) * T / steps)));
        }
        return ts;
    }

  private:
    std::vector<double> alpha_bar_;
};

} // namespace voxworld::outpaint
