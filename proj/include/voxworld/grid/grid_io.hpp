// Copyright Contributors to the voxworld Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "voxworld/core/binary_io.hpp"
#include "voxworld/grid/sparse_grid.hpp"

#include <array>
#include <filesystem>

namespace voxworld {

// Grid blob layout (little-endian):
//   magic "IVXW" | version u32 | voxel_size f64 | origin 3 x f64 | count u64
//   count x { i, j, k : i32 | label : u8 | instance : i32 (-1 = none) }
// Records are written in sorted coordinate order.
inline constexpr std::array<char, 4> kGridMagic = {'I', 'V', 'X', 'W'};
inline constexpr std::uint32_t kGridVersion = 1;

inline std::vector<std::uint8_t> serialize_grid(const SparseVoxelGrid &grid) {
    io::ByteWriter w;
    w.put_string({kGridMagic.data(), kGridMagic.size()});
    w.put<std::uint32_t>(kGridVersion);
    w.put<double>(grid.voxel_size());
    for (int a = 0; a < 3; ++a) w.put<double>(grid.origin()[a]);
    w.put<std::uint64_t>(grid.size());
    for (const auto &[c, voxel] : grid) {
        w.put<std::int32_t>(c.i);
        w.put<std::int32_t>(c.j);
        w.put<std::int32_t>(c.k);
        w.put<std::uint8_t>(static_cast<std::uint8_t>(voxel.label()));
        w.put<std::int32_t>(voxel.instance_id().value_or(-1));
    }
    return w.take();
}

inline SparseVoxelGrid deserialize_grid(std::span<const std::uint8_t> bytes) {
    io::ByteReader r(bytes);
    const auto magic = r.get_bytes(4);
    if (!std::equal(magic.begin(), magic.end(), kGridMagic.begin())) throw FormatError("not an IVXW grid blob");
    if (const auto version = r.get<std::uint32_t>(); version != kGridVersion) {
        throw FormatError("unsupported grid blob version " + std::to_string(version));
    }
    const double voxel_size = r.get<double>();
    Vec3 origin;
    for (int a = 0; a < 3; ++a) origin[a] = r.get<double>();
    const auto count = r.get<std::uint64_t>();
    if (count > r.remaining() / 17) throw FormatError("grid blob record count exceeds data size");
    SparseVoxelGrid grid(origin, voxel_size);
    for (std::uint64_t n = 0; n < count; ++n) {
        VoxelCoord c;
        c.i = r.get<std::int32_t>();
        c.j = r.get<std::int32_t>();
        c.k = r.get<std::int32_t>();
        const auto raw_label = r.get<std::uint8_t>();
        const auto instance = r.get<std::int32_t>();
        if (!is_valid_label(raw_label)) throw FormatError("invalid semantic label in grid blob");
        try {
            grid.set(c, SemanticVoxel(static_cast<SemanticLabel>(raw_label),
                                      instance < 0 ? std::nullopt : std::optional<std::int32_t>(instance)));
        } catch (const std::exception &e) {
            throw FormatError(std::string("invalid grid record: ") + e.what());
        }
    }
    if (r.remaining() != 0) throw FormatError("trailing bytes after grid records");
    return grid;
}

inline void save_grid(const std::filesystem::path &path, const SparseVoxelGrid &grid) {
    io::write_file(path, serialize_grid(grid));
}

inline SparseVoxelGrid load_grid(const std::filesystem::path &path) { return deserialize_grid(io::read_file(path)); }

} // namespace voxworld
