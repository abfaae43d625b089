// Copyright Contributors to the voxworld Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "voxworld/core/ply.hpp"
#include "voxworld/gaussians/scene.hpp"

#include <array>
#include <filesystem>

namespace voxworld::gaussians {

/// Zeroth-order spherical-harmonic basis constant used by the f_dc color channels.
inline constexpr double kShC0 = 0.28209479177387814;

inline constexpr std::array<const char *, 17> kGaussianPlyProperties = {
    "x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2", "opacity", "scale_0", "scale_1", "scale_2",
    "rot_0", "rot_1", "rot_2", "rot_3"};

inline std::string gaussian_ply_header(std::size_t count) {
    std::vector<io::PlyProperty> props;
    for (const char *name : kGaussianPlyProperties) props.push_back({name, io::PlyType::Float32});
    return io::ply_header(props, count);
}

inline void put_gaussian_row(io::ByteWriter &w, const Gaussian3D &g) {
    const double row[] = {g.position.x(), g.position.y(), g.position.z(), 0.0, 0.0, 0.0,
                          (g.color.x() - 0.5) / kShC0, (g.color.y() - 0.5) / kShC0, (g.color.z() - 0.5) / kShC0,
                          inverse_sigmoid(g.opacity), std::log(g.scale.x()), std::log(g.scale.y()),
                          std::log(g.scale.z()), g.rotation.w(), g.rotation.x(), g.rotation.y(), g.rotation.z()};
    for (const double v : row) w.put(static_cast<float>(v));
}

/// The common 3DGS point layout: x y z nx ny nz f_dc_0..2 opacity scale_0..2 rot_0..3, all float32.
/// Opacity is stored as a logit, scales as logs, rotation as (w, x, y, z), color as (c - 0.5) / C0.
inline std::vector<std::uint8_t> encode_gaussian_ply(std::span<const Gaussian3D> gaussians) {
    const auto header = gaussian_ply_header(gaussians.size());
    io::ByteWriter w;
    w.reserve(header.size() + gaussians.size() * kGaussianPlyProperties.size() * sizeof(float));
    w.put_string(header);
    for (const auto &g : gaussians) put_gaussian_row(w, g);
    return w.take();
}

/// Reads the 3DGS layout; extra properties and any scalar types are accepted.
inline std::vector<Gaussian3D> decode_gaussian_ply(std::span<const std::uint8_t> bytes) {
    const io::PlyLayout layout = io::parse_ply_header(bytes);
    std::array<std::size_t, 17> slot{};
    for (std::size_t k = 0; k < slot.size(); ++k) {
        slot[k] = k >= 3 && k < 6 ? layout.properties.size() : layout.require(kGaussianPlyProperties[k]);
    }
    io::ByteReader r(bytes.subspan(layout.data_offset));
    std::vector<double> row(layout.properties.size() + 1, 0.0);
    std::vector<Gaussian3D> out(layout.count);
    for (auto &g : out) {
        for (std::size_t c = 0; c < layout.properties.size(); ++c) row[c] = io::get_ply_value(r, layout.properties[c].type);
        const auto v = [&](std::size_t k) { return row[slot[k]]; };
        g.position = Vec3(v(0), v(1), v(2));
        g.color = (Vec3(v(6), v(7), v(8)) * kShC0 + Vec3::Constant(0.5)).cwiseMax(0.0).cwiseMin(1.0);
        g.opacity = sigmoid(v(9));
        g.scale = Vec3(std::exp(v(10)), std::exp(v(11)), std::exp(v(12)));
        const double raw[] = {v(13), v(14), v(15), v(16)};
        g.rotation = activate_rotation(raw);
        if (!g.position.allFinite() || !g.scale.allFinite()) throw FormatError("non-finite Gaussian in PLY");
    }
    return out;
}

// Scene directory layout:
//   scene.json   {"version": 1, "static": "static.ply",
//                 "objects": [{"id": 3, "blob": "object_00003.ply", "track": {"id", "size", "poses"}}],
//                 "sky": {"params": "sky.json", "c": [192 numbers]} | null}
inline constexpr int kSceneVersion = 1;

inline std::string object_blob_name(std::int32_t id) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "object_%05d.ply", id);
    return buf;
}

inline void save_scene(const std::filesystem::path &dir, const GaussianScene &scene) {
    std::filesystem::create_directories(dir);
    io::write_file(dir / "static.ply", encode_gaussian_ply(scene.static_gaussians));
    nlohmann::json objects = nlohmann::json::array();
    for (const auto &obj : scene.objects) {
        const auto blob = object_blob_name(obj.instance_id);
        io::write_file(dir / blob, encode_gaussian_ply(obj.canonical));
        objects.push_back({{"id", obj.instance_id}, {"blob", blob}, {"track", conditions::tracks_to_json({obj.track})["tracks"][0]}});
    }
    nlohmann::json sky = nullptr;
    if (scene.sky.params) {
        io::write_text_file(dir / "sky.json", sky_params_to_json(*scene.sky.params).dump());
        sky = {{"params", "sky.json"}, {"c", std::vector<double>(scene.sky.c.data(), scene.sky.c.data() + scene.sky.c.size())}};
    }
    const nlohmann::json manifest = {{"version", kSceneVersion}, {"static", "static.ply"}, {"objects", objects}, {"sky", sky}};
    io::write_text_file(dir / "scene.json", manifest.dump(2));
}

inline GaussianScene load_scene(const std::filesystem::path &dir) {
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(io::read_text_file(dir / "scene.json"));
    } catch (const nlohmann::json::exception &e) {
        throw FormatError(std::string("invalid scene manifest: ") + e.what());
    }
    if (manifest.value("version", 0) != kSceneVersion) throw FormatError("unsupported scene manifest version");
    GaussianScene scene;
    try {
        scene.static_gaussians = decode_gaussian_ply(io::read_file(dir / manifest.at("static").get<std::string>()));
        for (const auto &entry : manifest.at("objects")) {
            GaussianObject obj;
            obj.instance_id = entry.at("id").get<std::int32_t>();
            obj.canonical = decode_gaussian_ply(io::read_file(dir / entry.at("blob").get<std::string>()));
            obj.track = conditions::tracks_from_json({{"tracks", {entry.at("track")}}}).front();
            if (obj.track.instance_id != obj.instance_id) throw FormatError("object id does not match its track");
            scene.objects.push_back(std::move(obj));
        }
        const auto &sky = manifest.at("sky");
        if (!sky.is_null()) {
            scene.sky.params = sky_params_from_json(nlohmann::json::parse(io::read_text_file(dir / sky.at("params").get<std::string>())));
            const auto c = sky.at("c").get<std::vector<double>>();
            if (c.size() != kSkyDim) throw FormatError("sky vector must have 192 entries");
            scene.sky.c = Eigen::Map<const Eigen::VectorXd>(c.data(), kSkyDim);
        }
    } catch (const nlohmann::json::exception &e) {
        throw FormatError(std::string("invalid scene manifest: ") + e.what());
    }
    return scene;
}

} // namespace voxworld::gaussians
