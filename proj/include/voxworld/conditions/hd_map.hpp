// Copyright Contributors to the voxworld Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "voxworld/core/errors.hpp"
#include "voxworld/core/geometry.hpp"
#include "voxworld/grid/voxelize.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace voxworld::conditions {

using Polyline = std::vector<Vec3>;

/// Road edges bound the drivable area; road lines separate lanes.
struct HDMap {
    std::vector<Polyline> road_edges;
    std::vector<Polyline> road_lines;

    void validate() const {
        for (const auto *set : {&road_edges, &road_lines}) {
            for (const auto &line : *set) {
                if (line.size() < 2) throw ConfigError("polyline needs at least 2 vertices");
                for (const auto &v : line)
                    if (!v.allFinite()) throw ConfigError("polyline vertex is not finite");
            }
        }
    }
};

struct BoxPose {
    double t = 0.0;
    Vec3 center = Vec3::Zero();
    double heading = 0.0;
};

/// A vehicle's box size (length, width, height) and its time-indexed poses.
struct BoxTrack {
    std::int32_t instance_id = 0;
    Vec3 size = Vec3(4.5, 2.0, 1.6);
    std::vector<BoxPose> poses;

    void validate() const {
        if (instance_id < 0) throw ConfigError("track instance id must be non-negative");
        if (!(size.array() > 0.0).all() || !size.allFinite()) throw ConfigError("track size must be positive");
        if (poses.empty()) throw ConfigError("track needs at least one pose");
        for (std::size_t n = 0; n < poses.size(); ++n) {
            if (!poses[n].center.allFinite() || !std::isfinite(poses[n].heading) || !std::isfinite(poses[n].t)) {
                throw ConfigError("track pose is not finite");
            }
            if (n > 0 && !(poses[n].t > poses[n - 1].t)) throw ConfigError("track timestamps must strictly increase");
        }
    }

    [[nodiscard]] bool covers(double t) const { return !poses.empty() && t >= poses.front().t && t <= poses.back().t; }

    /// Pose at time t: linear position, shortest-arc heading. nullopt outside the track's time span.
    [[nodiscard]] std::optional<BoxPose> pose_at(double t) const {
        if (!covers(t)) return std::nullopt;
        auto hi = std::lower_bound(poses.begin(), poses.end(), t, [](const BoxPose &p, double v) { return p.t < v; });
        if (hi->t == t) return *hi;
        auto lo = std::prev(hi);
        const double u = (t - lo->t) / (hi->t - lo->t);
        BoxPose out;
        out.t = t;
        out.center = lo->center + u * (hi->center - lo->center);
        out.heading = wrap_angle(lo->heading + u * wrap_angle(hi->heading - lo->heading));
        return out;
    }

    [[nodiscard]] Vec3 half_extents() const { return 0.5 * size; }

    [[nodiscard]] std::optional<OrientedBox> box_at(double t) const {
        auto pose = pose_at(t);
        if (!pose) return std::nullopt;
        return OrientedBox{pose->center, half_extents(), pose->heading};
    }
};

// File formats.
//   HD map:  {"polylines": [{"type": "edge" | "line", "vertices": [[x, y, z], ...]}, ...]}
//   Tracks:  {"tracks": [{"id": 3, "size": [l, w, h], "poses": [[t, x, y, z, heading], ...]}, ...]}

inline Vec3 vec3_from_json(const nlohmann::json &j) {
    if (!j.is_array() || j.size() != 3) throw ConfigError("expected a 3-element array");
    Vec3 v;
    for (int a = 0; a < 3; ++a) {
        if (!j[a].is_number()) throw ConfigError("expected numeric coordinates");
        v[a] = j[a].get<double>();
    }
    return v;
}

inline nlohmann::json vec3_to_json(const Vec3 &v) { return nlohmann::json::array({v.x(), v.y(), v.z()}); }

inline HDMap hd_map_from_json(const nlohmann::json &j) {
    if (!j.is_object() || !j.contains("polylines") || !j["polylines"].is_array()) {
        throw ConfigError("HD map must be an object with a 'polylines' array");
    }
    HDMap map;
    for (const auto &entry : j["polylines"]) {
        const auto type = entry.value("type", std::string{});
        if (!entry.contains("vertices") || !entry["vertices"].is_array()) throw ConfigError("polyline lacks 'vertices'");
        Polyline line;
        for (const auto &v : entry["vertices"]) line.push_back(vec3_from_json(v));
        if (type == "edge") {
            map.road_edges.push_back(std::move(line));
        } else if (type == "line") {
            map.road_lines.push_back(std::move(line));
        } else {
            throw ConfigError("polyline type must be 'edge' or 'line', got '" + type + "'");
        }
    }
    map.validate();
    return map;
}

inline nlohmann::json hd_map_to_json(const HDMap &map) {
    nlohmann::json lines = nlohmann::json::array();
    const auto emit = [&](const std::vector<Polyline> &set, const char *type) {
        for (const auto &line : set) {
            nlohmann::json verts = nlohmann::json::array();
            for (const auto &v : line) verts.push_back(vec3_to_json(v));
            lines.push_back({{"type", type}, {"vertices", verts}});
        }
    };
    emit(map.road_edges, "edge");
    emit(map.road_lines, "line");
    return {{"polylines", lines}};
}

inline std::vector<BoxTrack> tracks_from_json(const nlohmann::json &j) {
    if (!j.is_object() || !j.contains("tracks") || !j["tracks"].is_array()) {
        throw ConfigError("track file must be an object with a 'tracks' array");
    }
    std::vector<BoxTrack> tracks;
    for (const auto &entry : j["tracks"]) {
        BoxTrack track;
        if (!entry.contains("id") || !entry["id"].is_number_integer()) throw ConfigError("track lacks integer 'id'");
        track.instance_id = entry["id"].get<std::int32_t>();
        track.size = vec3_from_json(entry.at("size"));
        if (!entry.contains("poses") || !entry["poses"].is_array()) throw ConfigError("track lacks 'poses'");
        for (const auto &p : entry["poses"]) {
            if (!p.is_array() || p.size() != 5) throw ConfigError("pose must be [t, x, y, z, heading]");
            for (const auto &v : p)
                if (!v.is_number()) throw ConfigError("pose values must be numeric");
            track.poses.push_back({p[0].get<double>(), Vec3(p[1].get<double>(), p[2].get<double>(), p[3].get<double>()),
                                   p[4].get<double>()});
        }
        track.validate();
        tracks.push_back(std::move(track));
    }
    return tracks;
}

inline nlohmann::json tracks_to_json(const std::vector<BoxTrack> &tracks) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto &track : tracks) {
        nlohmann::json poses = nlohmann::json::array();
        for (const auto &p : track.poses) poses.push_back({p.t, p.center.x(), p.center.y(), p.center.z(), p.heading});
        arr.push_back({{"id", track.instance_id}, {"size", vec3_to_json(track.size)}, {"poses", poses}});
    }
    return {{"tracks", arr}};
}

} // namespace voxworld::conditions
