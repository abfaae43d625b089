// Copyright Contributors to the voxworld Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "voxworld/core/parallel.hpp"
#include "voxworld/core/ply.hpp"
#include "voxworld/gaussians/scene.hpp"

#include <json.hpp>

#include <limits>
#include <numeric>
#include <span>

namespace voxworld::lidar {

/// Beam direction in the sensor frame (x forward, y left, z up).
struct LidarBeam {
    double azimuth = 0.0;    // radians, counter-clockwise from +x
    double elevation = 0.0;  // radians, up from the xy plane

    [[nodiscard]] Vec3 direction() const {
        return {std::cos(elevation) * std::cos(azimuth), std::cos(elevation) * std::sin(azimuth), std::sin(elevation)};
    }
};

struct LidarPattern {
    std::vector<LidarBeam> beams;
    double max_range = 120.0;
    double opacity_threshold = 0.5;
    /// Surfaces are the k_sigma level sets of the Gaussians.
    double k_sigma = 2.0;

    void validate() const {
        if (beams.empty()) throw ConfigError("lidar pattern needs at least one beam");
        for (const auto &b : beams)
            if (!std::isfinite(b.azimuth) || !std::isfinite(b.elevation)) throw ConfigError("lidar beam is not finite");
        if (!(max_range > 0.0) || !std::isfinite(max_range)) throw ConfigError("lidar max_range must be positive");
        if (!(opacity_threshold > 0.0 && opacity_threshold < 1.0)) {
            throw ConfigError("lidar opacity_threshold must lie in (0, 1)");
        }
        if (!(k_sigma > 0.0) || !std::isfinite(k_sigma)) throw ConfigError("lidar k_sigma must be positive");
    }
};

/// Spinning sensor: `channels` elevations evenly spaced over [elevation_min, elevation_max], each
/// fired at `azimuth_steps` evenly spaced azimuths. Beams are channel-major.
inline LidarPattern rotating_pattern(int channels, double elevation_min, double elevation_max, int azimuth_steps) {
    if (channels <= 0 || azimuth_steps <= 0) throw ConfigError("lidar pattern sizes must be positive");
    LidarPattern p;
    for (int c = 0; c < channels; ++c) {
        const double el = channels == 1 ? elevation_min
                                        : elevation_min + (elevation_max - elevation_min) * c / (channels - 1.0);
        for (int a = 0; a < azimuth_steps; ++a) p.beams.push_back({2.0 * M_PI * a / azimuth_steps, el});
    }
    return p;
}

// Pattern file: {"max_range", "opacity_threshold", "k_sigma", plus either
//   "beams": [[azimuth_deg, elevation_deg], ...]  or
//   "rotating": {"channels", "elevation_min_deg", "elevation_max_deg", "azimuth_steps"}}
inline LidarPattern pattern_from_json(const nlohmann::json &j) {
    constexpr double deg = M_PI / 180.0;
    LidarPattern p;
    try {
        if (j.contains("rotating")) {
            const auto &r = j.at("rotating");
            p = rotating_pattern(r.at("channels").get<int>(), r.at("elevation_min_deg").get<double>() * deg,
                                 r.at("elevation_max_deg").get<double>() * deg, r.at("azimuth_steps").get<int>());
        } else if (j.contains("beams")) {
            for (const auto &b : j.at("beams")) {
                if (!b.is_array() || b.size() != 2) throw ConfigError("lidar beam must be [azimuth_deg, elevation_deg]");
                p.beams.push_back({b[0].get<double>() * deg, b[1].get<double>() * deg});
            }
        } else {
            throw ConfigError("lidar pattern needs 'beams' or 'rotating'");
        }
        p.max_range = j.value("max_range", p.max_range);
        p.opacity_threshold = j.value("opacity_threshold", p.opacity_threshold);
        p.k_sigma = j.value("k_sigma", p.k_sigma);
    } catch (const nlohmann::json::exception &e) {
        throw ConfigError(std::string("invalid lidar pattern: ") + e.what());
    }
    p.validate();
    return p;
}

inline nlohmann::json pattern_to_json(const LidarPattern &p) {
    constexpr double rad = 180.0 / M_PI;
    nlohmann::json beams = nlohmann::json::array();
    for (const auto &b : p.beams) beams.push_back({b.azimuth * rad, b.elevation * rad});
    return {{"max_range", p.max_range}, {"opacity_threshold", p.opacity_threshold}, {"k_sigma", p.k_sigma}, {"beams", beams}};
}

struct LidarReturn {
    std::size_t beam = 0;
    double range = 0.0;
    /// World-space hit point.
    Vec3 position = Vec3::Zero();
    std::optional<std::int32_t> instance_id;
};

/// Nearest t > 0 where o + t d enters the k-sigma ellipsoid of g, computed in the Gaussian's
/// normalized frame. A ray starting inside (or on) the ellipsoid has no entry.
inline std::optional<double> ray_ellipsoid_entry(const Vec3 &o, const Vec3 &d, const gaussians::Gaussian3D &g, double k_sigma) {
    const Mat3 rt = g.rotation.toRotationMatrix().transpose();
    const Vec3 inv = (k_sigma * g.scale).cwiseInverse();
    const Vec3 p = inv.cwiseProduct(rt * (o - g.position));
    const Vec3 q = inv.cwiseProduct(rt * d);
    const double a = q.squaredNorm();
    const double half_b = p.dot(q);
    const double c = p.squaredNorm() - 1.0;
    if (!(c > 0.0) || !(a > 0.0)) return std::nullopt;
    const double disc = half_b * half_b - a * c;
    if (disc < 0.0) return std::nullopt;
    if (half_b >= 0.0) return std::nullopt;  // both roots behind the origin
    // near root c / (-half_b + sqrt(disc)) avoids cancellation
    return c / (-half_b + std::sqrt(disc));
}

/// Bounding volume hierarchy over the k-sigma ellipsoids of selected Gaussians. The Gaussians are
/// borrowed and must outlive the hierarchy.
class EllipsoidBvh {
  public:
    EllipsoidBvh(std::span<const gaussians::Gaussian3D> gaussians, std::vector<std::uint32_t> members, double k_sigma)
        : gaussians_(gaussians), order_(std::move(members)), k_sigma_(k_sigma) {
        if (order_.empty()) return;
        std::vector<Aabb> boxes(gaussians_.size());
        for (const auto i : order_) {
            const auto &g = gaussians_[i];
            const Vec3 half = k_sigma_ * g.covariance().diagonal().cwiseSqrt();
            boxes[i] = {g.position - half, g.position + half};
        }
        nodes_.reserve(order_.size() / 2 + 1);
        nodes_.resize(1);
        build(boxes, 0, 0, order_.size());
    }

    struct Hit {
        double t;
        std::size_t index;
    };

    /// Nearest entry within (0, max_t]; ties go to the lower Gaussian index.
    [[nodiscard]] std::optional<Hit> cast(const Vec3 &o, const Vec3 &d, double max_t) const {
        std::optional<Hit> best;
        if (nodes_.empty()) return best;
        std::vector<std::size_t> stack{0};
        while (!stack.empty()) {
            const Node &node = nodes_[stack.back()];
            stack.pop_back();
            const auto span = ray_box_interval(o, d, node.box.min, node.box.max);
            if (!span || span->second < 0.0 || span->first > (best ? best->t : max_t)) continue;
            if (node.count > 0) {
                for (std::size_t n = node.first; n < node.first + node.count; ++n) {
                    const std::size_t i = order_[n];
                    const auto t = ray_ellipsoid_entry(o, d, gaussians_[i], k_sigma_);
                    if (!t || *t > max_t) continue;
                    if (!best || *t < best->t || (*t == best->t && i < best->index)) best = Hit{*t, i};
                }
            } else {
                stack.push_back(node.left);
                stack.push_back(node.left + 1);
            }
        }
        return best;
    }

  private:
    struct Node {
        Aabb box;
        std::size_t left = 0;   // children at left, left + 1 for interior nodes
        std::uint32_t first = 0;  // leaf range into order_
        std::uint32_t count = 0;  // 0 for interior nodes
    };

    void build(const std::vector<Aabb> &boxes, std::size_t id, std::size_t first, std::size_t count) {
        Aabb box{Vec3::Constant(std::numeric_limits<double>::infinity()), Vec3::Constant(-std::numeric_limits<double>::infinity())};
        for (std::size_t n = first; n < first + count; ++n) {
            box.min = box.min.cwiseMin(boxes[order_[n]].min);
            box.max = box.max.cwiseMax(boxes[order_[n]].max);
        }
        nodes_[id].box = box;
        if (count <= 4) {
            nodes_[id].first = static_cast<std::uint32_t>(first);
            nodes_[id].count = static_cast<std::uint32_t>(count);
            return;
        }
        int axis = 0;
        (box.max - box.min).maxCoeff(&axis);
        const auto begin = order_.begin() + static_cast<std::ptrdiff_t>(first);
        std::nth_element(begin, begin + static_cast<std::ptrdiff_t>(count / 2), begin + static_cast<std::ptrdiff_t>(count),
                         [&](std::uint32_t a, std::uint32_t b) {
                             const double ca = boxes[a].min[axis] + boxes[a].max[axis];
                             const double cb = boxes[b].min[axis] + boxes[b].max[axis];
                             return ca != cb ? ca < cb : a < b;
                         });
        const std::size_t left = nodes_.size();
        nodes_.resize(left + 2);
        nodes_[id].left = left;
        build(boxes, left, first, count / 2);
        build(boxes, left + 1, first + count / 2, count - count / 2);
    }

    std::span<const gaussians::Gaussian3D> gaussians_;
    std::vector<std::uint32_t> order_;
    std::vector<Node> nodes_;
    double k_sigma_;
};

/// Hard-surface LiDAR: each beam returns the nearest entry into the k-sigma ellipsoid of any posed
/// Gaussian with opacity >= threshold, within max_range. The static hierarchy is built once; the
/// objects are posed and indexed per scan. `scene` must outlive the simulator.
class LidarSimulator {
  public:
    LidarSimulator(const gaussians::GaussianScene &scene, LidarPattern pattern)
        : scene_(scene), pattern_(validated(std::move(pattern))),
          static_bvh_(scene.static_gaussians, opaque(scene.static_gaussians, pattern_.opacity_threshold), pattern_.k_sigma) {
        if (scene.static_gaussians.size() > std::numeric_limits<std::uint32_t>::max()) {
            throw std::length_error("too many Gaussians for the LiDAR index");
        }
    }

    [[nodiscard]] const LidarPattern &pattern() const { return pattern_; }

    /// Returns are ordered by beam index. Equal ranges resolve to static Gaussians, then to the
    /// lower index in object order.
    [[nodiscard]] std::vector<LidarReturn> scan(const Rigid &world_from_sensor, double t) const {
        std::vector<gaussians::Gaussian3D> posed;
        std::vector<std::int32_t> owner;
        for (const auto &obj : scene_.objects) {
            const auto pose = gaussians::track_pose(obj.track, t);
            if (!pose) continue;
            for (const auto &g : obj.canonical) {
                posed.push_back(g.transformed(*pose));
                owner.push_back(obj.instance_id);
            }
        }
        const EllipsoidBvh dynamic_bvh(posed, opaque(posed, pattern_.opacity_threshold), pattern_.k_sigma);
        const Vec3 origin = world_from_sensor.translation();
        std::vector<std::optional<LidarReturn>> hits(pattern_.beams.size());
        parallel_for(pattern_.beams.size(), [&](std::size_t b) {
            const Vec3 dir = (world_from_sensor.linear() * pattern_.beams[b].direction()).normalized();
            const auto hs = static_bvh_.cast(origin, dir, pattern_.max_range);
            const auto hd = dynamic_bvh.cast(origin, dir, hs ? hs->t : pattern_.max_range);
            if (!hs && !hd) return;
            const bool dynamic_wins = hd && (!hs || hd->t < hs->t);
            LidarReturn r;
            r.beam = b;
            r.range = dynamic_wins ? hd->t : hs->t;
            r.position = origin + r.range * dir;
            if (dynamic_wins) r.instance_id = owner[hd->index];
            hits[b] = r;
        });
        std::vector<LidarReturn> out;
        for (auto &h : hits)
            if (h) out.push_back(*h);
        return out;
    }

  private:
    static LidarPattern validated(LidarPattern p) {
        p.validate();
        return p;
    }

    static std::vector<std::uint32_t> opaque(std::span<const gaussians::Gaussian3D> gs, double threshold) {
        std::vector<std::uint32_t> out;
        for (std::size_t i = 0; i < gs.size(); ++i)
            if (gs[i].opacity >= threshold) out.push_back(static_cast<std::uint32_t>(i));
        return out;
    }

    const gaussians::GaussianScene &scene_;
    LidarPattern pattern_;
    EllipsoidBvh static_bvh_;
};

inline std::vector<LidarReturn> cast_lidar(const gaussians::GaussianScene &scene, const Rigid &world_from_sensor, double t,
                                           const LidarPattern &pattern) {
    return LidarSimulator(scene, pattern).scan(world_from_sensor, t);
}

/// Point list: x y z (double, world), beam (uint), range (double), instance (int, -1 = static).
inline std::vector<std::uint8_t> encode_point_cloud(std::span<const LidarReturn> returns) {
    io::PlyTable t;
    t.add("x", io::PlyType::Float64);
    t.add("y", io::PlyType::Float64);
    t.add("z", io::PlyType::Float64);
    t.add("beam", io::PlyType::UInt32);
    t.add("range", io::PlyType::Float64);
    t.add("instance", io::PlyType::Int32);
    for (const auto &r : returns) {
        const double row[] = {r.position.x(), r.position.y(), r.position.z(), static_cast<double>(r.beam), r.range,
                              static_cast<double>(r.instance_id.value_or(-1))};
        for (std::size_t c = 0; c < 6; ++c) t.columns[c].push_back(row[c]);
    }
    return io::encode_ply(t);
}

inline std::vector<LidarReturn> decode_point_cloud(std::span<const std::uint8_t> bytes) {
    const io::PlyTable t = io::decode_ply(bytes);
    std::vector<LidarReturn> out(t.rows());
    for (std::size_t n = 0; n < out.size(); ++n) {
        out[n].position = Vec3(t.column("x")[n], t.column("y")[n], t.column("z")[n]);
        out[n].beam = static_cast<std::size_t>(t.column("beam")[n]);
        out[n].range = t.column("range")[n];
        const auto id = static_cast<std::int32_t>(t.column("instance")[n]);
        if (id >= 0) out[n].instance_id = id;
    }
    return out;
}

} // namespace voxworld::lidar
