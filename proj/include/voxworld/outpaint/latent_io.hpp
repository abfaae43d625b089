// Copyright Contributors to the voxworld Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "voxworld/conditions/conditions.hpp"
#include "voxworld/outpaint/latent.hpp"

#include <filesystem>

namespace voxworld::outpaint {

struct LatentFileInfo {
    ChunkIndex chunk_index;
    std::uint64_t seed = 0;
};

/// Latent file: raw little-endian f32 (channel-last) plus `<path>.json` sidecar {N, C, frame, chunk_index, seed}.
inline void save_latent(const std::filesystem::path &raw_path, const LatentCube &latent, const LatentFileInfo &info) {
    io::write_file(raw_path, io::pack_f32(latent.values()));
    const nlohmann::json sidecar = {{"N", latent.extent()},
                                    {"C", latent.channels()},
                                    {"frame", conditions::chunk_frame_to_json(latent.frame())},
                                    {"chunk_index", {info.chunk_index.x, info.chunk_index.y}},
                                    {"seed", info.seed}};
    auto sidecar_path = raw_path;
    sidecar_path += ".json";
    io::write_text_file(sidecar_path, sidecar.dump(2) + "\n");
}

inline std::pair<LatentCube, LatentFileInfo> load_latent(const std::filesystem::path &raw_path) {
    auto sidecar_path = raw_path;
    sidecar_path += ".json";
    const auto sidecar = nlohmann::json::parse(io::read_text_file(sidecar_path));
    const auto frame = conditions::chunk_frame_from_json(sidecar.at("frame"));
    if (sidecar.at("N").get<int>() != frame.extent) throw FormatError("latent sidecar N does not match its frame");
    LatentFileInfo info;
    info.chunk_index = {sidecar.at("chunk_index").at(0).get<int>(), sidecar.at("chunk_index").at(1).get<int>()};
    info.seed = sidecar.at("seed").get<std::uint64_t>();
    return {LatentCube(frame, sidecar.at("C").get<int>(), io::unpack_f32(io::read_file(raw_path))), info};
}

} // namespace voxworld::outpaint
