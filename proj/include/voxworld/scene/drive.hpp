// Copyright Contributors to the voxworld Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "voxworld/buffers/render.hpp"
#include "voxworld/grid/voxelize.hpp"
#include "voxworld/scene/config.hpp"

#include <cmath>
#include <string>

namespace voxworld::scene {

/// Rear-axle state of the ego vehicle. Heading 0 looks along +x.
struct EgoState {
    Vec3 position = Vec3::Zero();
    double heading = 0.0;
    double speed = 0.0;
    double steer = 0.0;
};

struct ControlInput {
    double throttle = 0.0;  // [-1, 1], commanded speed = throttle * speed_cap
    double steer = 0.0;     // [-1, 1], wheel angle = steer * steer_cap
    double dt = 0.0;        // seconds of simulated time to advance

    void validate() const {
        if (!std::isfinite(throttle) || !std::isfinite(steer) || !std::isfinite(dt)) {
            throw ProtocolError("control values must be finite");
        }
        if (throttle < -1.0 || throttle > 1.0 || steer < -1.0 || steer > 1.0) {
            throw ProtocolError("throttle and steer must lie in [-1, 1]");
        }
        if (dt < 0.0 || dt > 60.0) throw ProtocolError("control dt must lie in [0, 60] s");
    }
};

/// Exact integration of the kinematic bicycle over one interval at constant speed and wheel angle.
inline EgoState bicycle_step(const EgoState &s, double speed, double wheel_angle, double dt, double wheelbase) {
    EgoState out = s;
    out.speed = speed;
    out.steer = wheel_angle;
    const double dist = speed * dt;
    const double curvature = std::tan(wheel_angle) / wheelbase;
    const double dtheta = dist * curvature;
    if (std::abs(dtheta) < 1e-12) {
        out.position += dist * Vec3(std::cos(s.heading), std::sin(s.heading), 0.0);
    } else {
        const double r = 1.0 / curvature;
        const double h1 = s.heading + dtheta;
        out.position += Vec3(r * (std::sin(h1) - std::sin(s.heading)), r * (std::cos(s.heading) - std::cos(h1)), 0.0);
        out.heading = wrap_angle(h1);
    }
    return out;
}

/// Camera mounted at the ego position, looking along the heading.
inline buffers::Camera ego_camera(const EgoState &s, int width, int height, double hfov_deg) {
    return buffers::forward_camera(s.position, s.heading, width, height, hfov_deg * M_PI / 180.0);
}

/// Tracked vehicles as Car-labeled boxes voxelized in their own box frames.
inline std::vector<buffers::DynamicObject> box_objects(std::span<const conditions::BoxTrack> tracks, double voxel_size) {
    std::vector<buffers::DynamicObject> out;
    for (const auto &track : tracks) {
        SparseVoxelGrid canonical(Vec3::Zero(), voxel_size);
        voxelize_box(canonical, OrientedBox{Vec3::Zero(), track.half_extents(), 0.0},
                     SemanticVoxel(SemanticLabel::Car, track.instance_id), 0.5);
        out.push_back({track, std::move(canonical)});
    }
    return out;
}

/// One driving session. Simulated time advances in fixed ticks of 1 / tick_hz; every tick
/// appends a camera to the recording. Not thread-safe: the owning loop serializes access.
class DriveSession {
  public:
    DriveSession(std::string id, DriveConfig cfg, const EgoConfig &ego, double t0 = 0.0)
        : id_(std::move(id)), cfg_(cfg), t_(t0) {
        cfg_.validate();
        state_.position = ego.position;
        state_.heading = wrap_angle(ego.heading);
        record();
    }

    [[nodiscard]] const std::string &id() const { return id_; }
    [[nodiscard]] const EgoState &state() const { return state_; }
    [[nodiscard]] const DriveConfig &config() const { return cfg_; }
    [[nodiscard]] double time() const { return t_; }
    [[nodiscard]] std::uint64_t tick() const { return tick_; }
    [[nodiscard]] const buffers::Trajectory &trajectory() const { return recording_; }

    /// Applies the input for round(dt * tick_hz) ticks; returns the number of ticks run.
    int apply(const ControlInput &in) {
        in.validate();
        const int ticks = static_cast<int>(std::lround(in.dt * cfg_.tick_hz));
        const double step = 1.0 / cfg_.tick_hz;
        for (int n = 0; n < ticks; ++n) {
            state_ = bicycle_step(state_, in.throttle * cfg_.speed_cap, in.steer * cfg_.steer_cap, step, cfg_.wheelbase);
            ++tick_;
            t_ = t0() + static_cast<double>(tick_) * step;
            record();
        }
        if (ticks == 0) state_.speed = in.throttle * cfg_.speed_cap, state_.steer = in.steer * cfg_.steer_cap;
        return ticks;
    }

    [[nodiscard]] buffers::Camera camera() const {
        return ego_camera(state_, cfg_.camera_width, cfg_.camera_height, cfg_.hfov_deg);
    }
    [[nodiscard]] buffers::Camera preview_camera() const {
        return ego_camera(state_, cfg_.preview_width, cfg_.preview_height, cfg_.hfov_deg);
    }

  private:
    [[nodiscard]] double t0() const { return recording_.frames.front().t; }

    void record() { recording_.frames.push_back({t_, camera()}); }

    std::string id_;
    DriveConfig cfg_;
    EgoState state_;
    double t_ = 0.0;
    std::uint64_t tick_ = 0;
    buffers::Trajectory recording_;
};

} // namespace voxworld::scene
