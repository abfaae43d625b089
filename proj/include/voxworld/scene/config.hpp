// Copyright Contributors to the voxworld Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "voxworld/conditions/hd_map.hpp"
#include "voxworld/core/binary_io.hpp"
#include "voxworld/outpaint/denoiser.hpp"
#include "voxworld/outpaint/latent.hpp"
#include "voxworld/outpaint/plugin_protocol.hpp"
#include "voxworld/outpaint/sampler.hpp"

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <memory>
#include <set>

namespace voxworld::scene {

/// Environment variable naming the base directory for relative CLI paths.
inline constexpr const char *kDataRootEnv = "VOXWORLD_DATA_ROOT";

/// Relative paths resolve against $VOXWORLD_DATA_ROOT when it is set, else the working directory.
inline std::filesystem::path resolve_data_path(const std::filesystem::path &p) {
    if (p.is_absolute()) return p;
    if (const char *root = std::getenv(kDataRootEnv); root && *root) return std::filesystem::path(root) / p;
    return p;
}

/// Kinematic bicycle parameters and session rendering sizes.
struct DriveConfig {
    double wheelbase = 2.8;
    double speed_cap = 20.0;
    double steer_cap = 0.5;
    double tick_hz = 10.0;
    int camera_width = 1024;
    int camera_height = 576;
    double hfov_deg = 90.0;
    int preview_width = 512;
    int preview_height = 288;

    void validate() const {
        if (!(wheelbase > 0.0) || !(speed_cap > 0.0) || !(steer_cap > 0.0 && steer_cap < M_PI / 2) || !(tick_hz > 0.0)) {
            throw ConfigError("drive: wheelbase, speed_cap, tick_hz must be positive and steer_cap in (0, pi/2)");
        }
        if (camera_width <= 0 || camera_height <= 0 || preview_width <= 0 || preview_height <= 0) {
            throw ConfigError("drive: image sizes must be positive");
        }
        if (!(hfov_deg > 0.0 && hfov_deg < 180.0)) throw ConfigError("drive: hfov_deg must lie in (0, 180)");
    }
};

struct EgoConfig {
    Vec3 position = Vec3(0.0, 0.0, 1.6);
    double heading = 0.0;
};

struct DenoiserConfig {
    std::string type = "toy";
    outpaint::ToyGaussianDenoiser::Params toy;
    std::vector<std::string> command;
};

/// Toy denoiser mean: empty space, with road and HD-map cells pulled to occupied road/sidewalk voxels.
/// Latent channels: 0 occupancy, 1.. label logits in the toy codec order (road, sidewalk, ...).
inline outpaint::ToyGaussianDenoiser::Params default_toy_params(int channels) {
    outpaint::ToyGaussianDenoiser::Params p;
    p.bias.assign(static_cast<std::size_t>(channels), 0.0);
    p.bias[0] = -1.5;
    p.stddev = 0.3;
    p.weights.assign(static_cast<std::size_t>(channels), std::vector<double>(conditions::kConditionChannels, 0.0));
    p.weights[0][conditions::kEdgeChannel] = 3.0;
    p.weights[0][conditions::kLineChannel] = 3.0;
    p.weights[0][conditions::kRoadChannel] = 3.0;
    if (channels > 1) p.weights[1][conditions::kRoadChannel] = 2.0, p.weights[1][conditions::kLineChannel] = 2.0;
    if (channels > 2) p.weights[2][conditions::kEdgeChannel] = 2.5;
    return p;
}

struct GenerateConfig {
    std::filesystem::path hd_map;
    std::optional<std::filesystem::path> tracks;
    double time = 0.0;
    std::uint64_t seed = 0;
    ChunkFrame base_frame;
    double stride = 25.6;
    std::vector<outpaint::ChunkIndex> chunks{{0, 0}};
    outpaint::SamplerOptions sampler;
    DenoiserConfig denoiser;
    int upsample_factor = 8;
    EgoConfig ego;
    DriveConfig drive;
};

namespace detail {

inline void reject_unknown(const nlohmann::json &j, std::initializer_list<const char *> known, const char *where) {
    std::set<std::string> ok(known.begin(), known.end());
    for (const auto &[key, value] : j.items())
        if (!ok.count(key)) throw ConfigError(std::string(where) + ": unknown key '" + key + "'");
}

template <typename T>
T get_or(const nlohmann::json &j, const char *key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception &) {
        throw ConfigError(std::string("config key '") + key + "' has the wrong type");
    }
}

} // namespace detail

inline DriveConfig drive_from_json(const nlohmann::json &j) {
    DriveConfig d;
    detail::reject_unknown(j, {"wheelbase", "speed_cap", "steer_cap", "tick_hz", "camera", "preview"}, "drive");
    d.wheelbase = detail::get_or(j, "wheelbase", d.wheelbase);
    d.speed_cap = detail::get_or(j, "speed_cap", d.speed_cap);
    d.steer_cap = detail::get_or(j, "steer_cap", d.steer_cap);
    d.tick_hz = detail::get_or(j, "tick_hz", d.tick_hz);
    if (j.contains("camera")) {
        const auto &c = j["camera"];
        detail::reject_unknown(c, {"width", "height", "hfov_deg"}, "drive.camera");
        d.camera_width = detail::get_or(c, "width", d.camera_width);
        d.camera_height = detail::get_or(c, "height", d.camera_height);
        d.hfov_deg = detail::get_or(c, "hfov_deg", d.hfov_deg);
    }
    if (j.contains("preview")) {
        const auto &p = j["preview"];
        detail::reject_unknown(p, {"width", "height"}, "drive.preview");
        d.preview_width = detail::get_or(p, "width", d.preview_width);
        d.preview_height = detail::get_or(p, "height", d.preview_height);
    }
    d.validate();
    return d;
}

inline nlohmann::json drive_to_json(const DriveConfig &d) {
    return {{"wheelbase", d.wheelbase},
            {"speed_cap", d.speed_cap},
            {"steer_cap", d.steer_cap},
            {"tick_hz", d.tick_hz},
            {"camera", {{"width", d.camera_width}, {"height", d.camera_height}, {"hfov_deg", d.hfov_deg}}},
            {"preview", {{"width", d.preview_width}, {"height", d.preview_height}}}};
}

inline nlohmann::json ego_to_json(const EgoConfig &e) {
    return {{"position", conditions::vec3_to_json(e.position)}, {"heading", e.heading}};
}

inline EgoConfig ego_from_json(const nlohmann::json &j) {
    detail::reject_unknown(j, {"position", "heading"}, "ego");
    EgoConfig e;
    if (j.contains("position")) e.position = conditions::vec3_from_json(j["position"]);
    e.heading = detail::get_or(j, "heading", e.heading);
    if (!std::isfinite(e.heading)) throw ConfigError("ego heading must be finite");
    return e;
}

inline nlohmann::json denoiser_to_json(const DenoiserConfig &d) {
    if (d.type == "external") return {{"type", "external"}, {"command", d.command}};
    return {{"type", "toy"}, {"bias", d.toy.bias}, {"stddev", d.toy.stddev}, {"weights", d.toy.weights}};
}

/// Parses and validates a generate config. Relative file paths resolve against `base_dir`.
inline GenerateConfig generate_config_from_json(const nlohmann::json &j, const std::filesystem::path &base_dir = {}) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    detail::reject_unknown(j, {"version", "hd_map", "tracks", "time", "seed", "chunk", "stride", "chunks", "sampler",
                               "denoiser", "decoder", "ego", "drive"},
                           "config");
    if (detail::get_or(j, "version", 1) != 1) throw ConfigError("unsupported config version");
    const auto resolve = [&](const std::string &p) {
        const std::filesystem::path path(p);
        return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
    };
    GenerateConfig c;
    if (!j.contains("hd_map") || !j["hd_map"].is_string()) throw ConfigError("config needs an 'hd_map' path");
    c.hd_map = resolve(j["hd_map"].get<std::string>());
    if (j.contains("tracks")) c.tracks = resolve(detail::get_or<std::string>(j, "tracks", ""));
    c.time = detail::get_or(j, "time", c.time);
    c.seed = detail::get_or<std::uint64_t>(j, "seed", c.seed);

    const nlohmann::json chunk = j.value("chunk", nlohmann::json::object());
    detail::reject_unknown(chunk, {"center", "ego_height", "extent", "cell_size"}, "chunk");
    const int extent = detail::get_or(chunk, "extent", 32);
    const double cell = detail::get_or(chunk, "cell_size", 1.6);
    if (extent <= 0 || !(cell > 0.0)) throw ConfigError("chunk extent and cell_size must be positive");
    Eigen::Vector2d center = Eigen::Vector2d::Zero();
    if (chunk.contains("center")) {
        const auto v = detail::get_or<std::vector<double>>(chunk, "center", {});
        if (v.size() != 2) throw ConfigError("chunk.center must be [x, y]");
        center = Eigen::Vector2d(v[0], v[1]);
    }
    c.base_frame = ChunkFrame::centered(center, detail::get_or(chunk, "ego_height", 0.0), extent, cell);
    c.stride = detail::get_or(j, "stride", 0.5 * extent * cell);

    if (j.contains("chunks")) {
        c.chunks.clear();
        for (const auto &idx : j["chunks"]) {
            if (!idx.is_array() || idx.size() != 2 || !idx[0].is_number_integer() || !idx[1].is_number_integer()) {
                throw ConfigError("chunks entries must be [x, y] integers");
            }
            c.chunks.push_back({idx[0].get<int>(), idx[1].get<int>()});
        }
        if (c.chunks.empty()) throw ConfigError("config requests no chunks");
    }

    const nlohmann::json sampler = j.value("sampler", nlohmann::json::object());
    detail::reject_unknown(sampler, {"steps", "guidance", "latent_channels"}, "sampler");
    c.sampler.steps = detail::get_or(sampler, "steps", c.sampler.steps);
    c.sampler.guidance = detail::get_or(sampler, "guidance", c.sampler.guidance);
    c.sampler.latent_channels = detail::get_or(sampler, "latent_channels", c.sampler.latent_channels);
    if (c.sampler.steps <= 0 || c.sampler.steps > 1000) throw ConfigError("sampler.steps must lie in [1, 1000]");
    if (!std::isfinite(c.sampler.guidance)) throw ConfigError("sampler.guidance must be finite");
    if (c.sampler.latent_channels <= 0) throw ConfigError("sampler.latent_channels must be positive");

    const nlohmann::json den = j.value("denoiser", nlohmann::json::object());
    detail::reject_unknown(den, {"type", "bias", "stddev", "weights", "command"}, "denoiser");
    c.denoiser.type = detail::get_or<std::string>(den, "type", "toy");
    if (c.denoiser.type == "toy") {
        c.denoiser.toy = default_toy_params(c.sampler.latent_channels);
        c.denoiser.toy.bias = detail::get_or(den, "bias", c.denoiser.toy.bias);
        c.denoiser.toy.stddev = detail::get_or(den, "stddev", c.denoiser.toy.stddev);
        c.denoiser.toy.weights = detail::get_or(den, "weights", c.denoiser.toy.weights);
        if (c.denoiser.toy.bias.size() != 1 && c.denoiser.toy.bias.size() != static_cast<std::size_t>(c.sampler.latent_channels)) {
            throw ConfigError("denoiser.bias needs 1 or latent_channels entries");
        }
        if (!c.denoiser.toy.weights.empty() &&
            c.denoiser.toy.weights.size() != static_cast<std::size_t>(c.sampler.latent_channels)) {
            throw ConfigError("denoiser.weights needs one row per latent channel");
        }
        if (!(c.denoiser.toy.stddev >= 0.0)) throw ConfigError("denoiser.stddev must be >= 0");
    } else if (c.denoiser.type == "external") {
        c.denoiser.command = detail::get_or<std::vector<std::string>>(den, "command", {});
        if (c.denoiser.command.empty()) throw ConfigError("external denoiser needs a 'command' array");
        const std::filesystem::path prog(c.denoiser.command[0]);
        if (prog.has_parent_path() && prog.is_relative()) c.denoiser.command[0] = resolve(prog.string()).string();
    } else {
        throw ConfigError("denoiser.type must be 'toy' or 'external'");
    }

    const nlohmann::json dec = j.value("decoder", nlohmann::json::object());
    detail::reject_unknown(dec, {"upsample_factor"}, "decoder");
    c.upsample_factor = detail::get_or(dec, "upsample_factor", c.upsample_factor);
    if (c.upsample_factor <= 0) throw ConfigError("decoder.upsample_factor must be positive");

    if (j.contains("ego")) c.ego = ego_from_json(j["ego"]);
    if (j.contains("drive")) c.drive = drive_from_json(j["drive"]);
    return c;
}

inline GenerateConfig load_generate_config(const std::filesystem::path &path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(io::read_text_file(path));
    } catch (const nlohmann::json::parse_error &e) {
        throw ConfigError("config is not valid JSON: " + std::string(e.what()));
    } catch (const FormatError &e) {
        throw ConfigError(e.what());
    }
    return generate_config_from_json(j, path.parent_path());
}

inline std::unique_ptr<outpaint::Denoiser> make_denoiser(const DenoiserConfig &d) {
    if (d.type == "external") return std::make_unique<outpaint::plugin::ExternalDenoiser>(d.command);
    return std::make_unique<outpaint::ToyGaussianDenoiser>(d.toy);
}

} // namespace voxworld::scene
