// Copyright Contributors to the voxworld Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "voxworld/buffers/palette.hpp"
#include "voxworld/conditions/conditions.hpp"
#include "voxworld/grid/grid_io.hpp"
#include "voxworld/outpaint/latent_io.hpp"
#include "voxworld/outpaint/outpaint.hpp"
#include "voxworld/outpaint/toy_codec.hpp"
#include "voxworld/scene/config.hpp"
#include "voxworld/scene/hash.hpp"

#include <cstdio>

namespace voxworld::scene {

// Bundle directory layout:
//   manifest.json                 format, version, generator settings, chunk layout, frames, seeds,
//                                 palette hash, and {path, sha256, bytes} for every blob
//   inputs/hd_map.json            normalized HD map
//   inputs/tracks.json            normalized box tracks
//   chunks/conditions_<x>_<y>.f32 (+ .json sidecar)
//   chunks/latent_<x>_<y>.f32     (+ .json sidecar)
//   world.vxg                     decoded world grid
//   buffers/...                   optional, added by render-buffers
inline constexpr const char *kBundleFormat = "voxworld-bundle";
inline constexpr int kBundleVersion = 1;

/// SHA-256 over the palette table, one "name r g b" line per label at 4 decimals.
inline std::string palette_sha256() {
    std::string text;
    char line[96];
    for (std::size_t n = 0; n < kNumSemanticLabels; ++n) {
        const auto rgb = buffers::table_color(static_cast<SemanticLabel>(n));
        std::snprintf(line, sizeof line, "%s %.4f %.4f %.4f\n", std::string(kSemanticLabelNames[n]).c_str(), rgb[0], rgb[1], rgb[2]);
        text += line;
    }
    return sha256_hex(text);
}

inline std::string chunk_stem(const char *kind, const outpaint::ChunkIndex &idx) {
    return std::string("chunks/") + kind + "_" + std::to_string(idx.x) + "_" + std::to_string(idx.y) + ".f32";
}

inline std::string chunk_name(const char *kind, const outpaint::ChunkIndex &idx) {
    return std::string(kind) + "_" + std::to_string(idx.x) + "_" + std::to_string(idx.y);
}

struct Bundle {
    std::filesystem::path dir;
    nlohmann::json generator;
    conditions::HDMap hd_map;
    std::vector<conditions::BoxTrack> tracks;
    double time = 0.0;
    std::uint64_t seed = 0;
    outpaint::ChunkLayout layout;
    int upsample_factor = 8;
    SparseVoxelGrid world;
    EgoConfig ego;
    DriveConfig drive;
    nlohmann::json frames = nlohmann::json::array();
    /// Extra blobs (e.g. rendered buffers) carried through manifest rewrites.
    nlohmann::json extra_blobs = nlohmann::json::object();
};

/// Union of the toy-decoded chunks in placement order; earlier chunks win shared voxels.
inline SparseVoxelGrid decode_world(const outpaint::ChunkLayout &layout, int upsample_factor) {
    outpaint::ToyCodecOptions opts;
    opts.upsample_factor = upsample_factor;
    SparseVoxelGrid world(outpaint::decoded_lattice(layout.base_frame, upsample_factor));
    for (const auto &idx : layout.order) world = merge(world, outpaint::toy_decode(layout.chunks.at(idx), opts));
    return world;
}

inline nlohmann::json blob_record(const std::filesystem::path &dir, const std::string &rel) {
    const auto bytes = io::read_file(dir / rel);
    return {{"path", rel}, {"sha256", sha256_hex(bytes)}, {"bytes", bytes.size()}};
}

inline nlohmann::json layout_to_json(const outpaint::ChunkLayout &layout) {
    nlohmann::json order = nlohmann::json::array();
    for (const auto &idx : layout.order) order.push_back({idx.x, idx.y});
    return {{"base_frame", conditions::chunk_frame_to_json(layout.base_frame)}, {"stride", layout.stride}, {"order", order}};
}

/// Writes every blob and the manifest. Output bytes depend only on the bundle contents.
inline void write_bundle(const Bundle &b) {
    const auto &dir = b.dir;
    std::filesystem::create_directories(dir / "chunks");
    io::write_text_file(dir / "inputs/hd_map.json", conditions::hd_map_to_json(b.hd_map).dump(2) + "\n");
    io::write_text_file(dir / "inputs/tracks.json", conditions::tracks_to_json(b.tracks).dump(2) + "\n");
    nlohmann::json blobs = b.extra_blobs;
    blobs["hd_map"] = blob_record(dir, "inputs/hd_map.json");
    blobs["tracks"] = blob_record(dir, "inputs/tracks.json");
    for (const auto &idx : b.layout.order) {
        const auto frame = b.layout.frame_of(idx);
        const auto cond = conditions::build_conditions(b.hd_map, b.tracks, b.time, frame);
        const auto cpath = chunk_stem("conditions", idx);
        conditions::save_conditions(dir / cpath, cond);
        blobs[chunk_name("conditions", idx)] = blob_record(dir, cpath);
        blobs[chunk_name("conditions", idx) + "_sidecar"] = blob_record(dir, cpath + ".json");
        const auto lpath = chunk_stem("latent", idx);
        outpaint::save_latent(dir / lpath, b.layout.chunks.at(idx), {idx, b.seed});
        blobs[chunk_name("latent", idx)] = blob_record(dir, lpath);
        blobs[chunk_name("latent", idx) + "_sidecar"] = blob_record(dir, lpath + ".json");
    }
    save_grid(dir / "world.vxg", b.world);
    blobs["world"] = blob_record(dir, "world.vxg");

    const nlohmann::json manifest = {
        {"format", kBundleFormat},
        {"version", kBundleVersion},
        {"generator", b.generator},
        {"time", b.time},
        {"chunk_layout", layout_to_json(b.layout)},
        {"decoder", {{"upsample_factor", b.upsample_factor}}},
        {"frames", b.frames},
        {"seeds", {{"global", b.seed}, {"chunk_rng", "seed_seq(seed_lo, seed_hi, chunk_x, chunk_y)"}}},
        {"palette_sha256", palette_sha256()},
        {"ego", ego_to_json(b.ego)},
        {"drive", drive_to_json(b.drive)},
        {"blobs", blobs}};
    io::write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

/// Runs conditions, outpainting and toy decoding for a config and writes the bundle to `out`.
inline Bundle generate_bundle(const GenerateConfig &cfg, const std::filesystem::path &out, outpaint::Denoiser &denoiser) {
    Bundle b;
    b.dir = out;
    b.hd_map = conditions::hd_map_from_json(nlohmann::json::parse(io::read_text_file(cfg.hd_map)));
    if (cfg.tracks) b.tracks = conditions::tracks_from_json(nlohmann::json::parse(io::read_text_file(*cfg.tracks)));
    b.time = cfg.time;
    b.seed = cfg.seed;
    b.upsample_factor = cfg.upsample_factor;
    b.ego = cfg.ego;
    b.drive = cfg.drive;
    b.generator = {{"sampler",
                    {{"steps", cfg.sampler.steps},
                     {"guidance", cfg.sampler.guidance},
                     {"latent_channels", cfg.sampler.latent_channels}}},
                   {"denoiser", denoiser_to_json(cfg.denoiser)}};
    const auto schedule = outpaint::NoiseSchedule::cosine();
    const conditions::HDMap &map = b.hd_map;
    const auto &tracks = b.tracks;
    const double t = b.time;
    b.layout = outpaint::outpaint_scene(
        cfg.chunks, [&](const outpaint::ChunkIndex &, const ChunkFrame &f) { return conditions::build_conditions(map, tracks, t, f); },
        denoiser, schedule, cfg.sampler, cfg.seed, cfg.base_frame, cfg.stride);
    b.world = decode_world(b.layout, b.upsample_factor);
    write_bundle(b);
    return b;
}

inline Bundle generate_bundle(const GenerateConfig &cfg, const std::filesystem::path &out) {
    auto denoiser = make_denoiser(cfg.denoiser);
    return generate_bundle(cfg, out, *denoiser);
}

inline nlohmann::json read_manifest(const std::filesystem::path &dir) {
    try {
        const auto m = nlohmann::json::parse(io::read_text_file(dir / "manifest.json"));
        if (m.value("format", std::string{}) != kBundleFormat) throw FormatError("not a voxworld bundle: " + dir.string());
        if (m.value("version", 0) != kBundleVersion) throw FormatError("unsupported bundle version");
        return m;
    } catch (const nlohmann::json::exception &e) {
        throw FormatError(std::string("invalid bundle manifest: ") + e.what());
    }
}

/// Throws FormatError unless every blob in the manifest exists with the recorded hash and size.
inline void verify_bundle(const std::filesystem::path &dir) {
    const auto manifest = read_manifest(dir);
    for (const auto &[name, rec] : manifest.at("blobs").items()) {
        const auto rel = rec.at("path").get<std::string>();
        if (!std::filesystem::exists(dir / rel)) throw FormatError("bundle blob '" + name + "' is missing: " + rel);
        const auto bytes = io::read_file(dir / rel);
        if (bytes.size() != rec.at("bytes").get<std::size_t>() || sha256_hex(bytes) != rec.at("sha256").get<std::string>()) {
            throw FormatError("bundle blob '" + name + "' does not match its hash: " + rel);
        }
    }
}

inline Bundle load_bundle(const std::filesystem::path &dir, bool verify = true) {
    if (verify) verify_bundle(dir);
    const auto m = read_manifest(dir);
    Bundle b;
    b.dir = dir;
    try {
        b.generator = m.at("generator");
        b.time = m.at("time").get<double>();
        b.seed = m.at("seeds").at("global").get<std::uint64_t>();
        b.upsample_factor = m.at("decoder").at("upsample_factor").get<int>();
        b.ego = ego_from_json(m.at("ego"));
        b.drive = drive_from_json(m.at("drive"));
        b.frames = m.at("frames");
        b.hd_map = conditions::hd_map_from_json(nlohmann::json::parse(io::read_text_file(dir / "inputs/hd_map.json")));
        b.tracks = conditions::tracks_from_json(nlohmann::json::parse(io::read_text_file(dir / "inputs/tracks.json")));
        const auto &layout = m.at("chunk_layout");
        b.layout.base_frame = conditions::chunk_frame_from_json(layout.at("base_frame"));
        b.layout.stride = layout.at("stride").get<double>();
        for (const auto &idx : layout.at("order")) {
            const outpaint::ChunkIndex ci{idx.at(0).get<int>(), idx.at(1).get<int>()};
            auto [latent, info] = outpaint::load_latent(dir / chunk_stem("latent", ci));
            if (!(latent.frame() == b.layout.frame_of(ci))) throw FormatError("latent frame does not match the chunk layout");
            b.layout.chunks.emplace(ci, std::move(latent));
            b.layout.order.push_back(ci);
        }
        b.world = load_grid(dir / "world.vxg");
        for (const auto &[name, rec] : m.at("blobs").items())
            if (rec.at("path").get<std::string>().rfind("buffers/", 0) == 0) b.extra_blobs[name] = rec;
    } catch (const nlohmann::json::exception &e) {
        throw FormatError(std::string("invalid bundle manifest: ") + e.what());
    }
    return b;
}

/// Outpaints more chunks around an existing bundle and rewrites it in place.
inline void extend_bundle(Bundle &b, const std::vector<outpaint::ChunkIndex> &chunks, outpaint::Denoiser &denoiser) {
    outpaint::SamplerOptions opts;
    const auto &s = b.generator.at("sampler");
    opts.steps = s.at("steps").get<int>();
    opts.guidance = s.at("guidance").get<double>();
    opts.latent_channels = s.at("latent_channels").get<int>();
    const auto schedule = outpaint::NoiseSchedule::cosine();
    const auto &map = b.hd_map;
    const auto &tracks = b.tracks;
    const double t = b.time;
    b.layout = outpaint::outpaint_scene(
        chunks, [&](const outpaint::ChunkIndex &, const ChunkFrame &f) { return conditions::build_conditions(map, tracks, t, f); },
        denoiser, schedule, opts, b.seed, std::move(b.layout));
    b.world = decode_world(b.layout, b.upsample_factor);
    write_bundle(b);
}

inline DenoiserConfig bundle_denoiser(const Bundle &b) {
    DenoiserConfig d;
    const auto &j = b.generator.at("denoiser");
    d.type = j.at("type").get<std::string>();
    if (d.type == "external") {
        d.command = j.at("command").get<std::vector<std::string>>();
    } else {
        d.toy.bias = j.at("bias").get<std::vector<double>>();
        d.toy.stddev = j.at("stddev").get<double>();
        d.toy.weights = j.at("weights").get<std::vector<std::vector<double>>>();
    }
    return d;
}

} // namespace voxworld::scene
