// Copyright Contributors to the voxworld Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "voxworld/outpaint/latent.hpp"

#include <algorithm>
#include <map>
#include <vector>

namespace voxworld::outpaint {

/// Stand-in for a trained latent decoder. Channel 0 is occupancy (> 0 = occupied),
/// channels 1.. are label logits for `channel_labels` in order.
struct ToyCodecOptions {
    int upsample_factor = 8;
    std::vector<SemanticLabel> channel_labels = {SemanticLabel::Road,       SemanticLabel::Sidewalk,
                                                 SemanticLabel::Building,   SemanticLabel::Vegetation,
                                                 SemanticLabel::Pole,       SemanticLabel::OtherGround,
                                                 SemanticLabel::TreeTrunk};
};

inline LatticeFrame decoded_lattice(const ChunkFrame &frame, int factor) {
    return {frame.origin, frame.cell_size / factor};
}

/// Nearest-neighbor upsampling: each occupied latent cell becomes a factor^3 block labeled by the
/// argmax of its label logits (first maximum wins). Vehicle labels get the latent cell's linear
/// index as instance id.
inline SparseVoxelGrid toy_decode(const LatentCube &latent, const ToyCodecOptions &opts = {}) {
    const int f = opts.upsample_factor;
    if (f <= 0) throw std::invalid_argument("upsample factor must be positive");
    SparseVoxelGrid grid(decoded_lattice(latent.frame(), f));
    const int n = latent.extent(), C = latent.channels();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                if (!(latent.at(i, j, k, 0) > 0.0f)) continue;
                SemanticLabel label = SemanticLabel::Undefined;
                if (C > 1) {
                    int best = 1;
                    for (int c = 2; c < C; ++c)
                        if (latent.at(i, j, k, c) > latent.at(i, j, k, best)) best = c;
                    if (static_cast<std::size_t>(best - 1) < opts.channel_labels.size()) {
                        label = opts.channel_labels[static_cast<std::size_t>(best - 1)];
                    }
                }
                const auto instance = is_vehicle(label)
                                          ? std::optional<std::int32_t>(static_cast<std::int32_t>(latent.cell_index(i, j, k)))
                                          : std::nullopt;
                const SemanticVoxel voxel(label, instance);
                for (int a = 0; a < f; ++a)
                    for (int b = 0; b < f; ++b)
                        for (int c = 0; c < f; ++c) grid.set({i * f + a, j * f + b, k * f + c}, voxel);
            }
    return grid;
}

/// Majority pooling of a fine grid into a latent cube: occupancy +1 when more than half of the
/// block is occupied (else -1), one-hot logits for the most frequent mappable label.
inline LatentCube toy_encode(const SparseVoxelGrid &grid, const ChunkFrame &frame, int channels,
                             const ToyCodecOptions &opts = {}) {
    const int f = opts.upsample_factor;
    const VoxelCoord off = lattice_offset(decoded_lattice(frame, f), grid.frame());
    LatentCube latent(frame, channels, 0.0f);
    std::map<std::size_t, std::map<SemanticLabel, int>> counts;
    std::vector<int> occupied(latent.cell_count(), 0);
    const auto floor_div = [](int a, int b) { return a >= 0 ? a / b : -((-a + b - 1) / b); };
    for (const auto &[c, voxel] : grid) {
        const VoxelCoord fine{c.i + off.i, c.j + off.j, c.k + off.k};
        const VoxelCoord coarse{floor_div(fine.i, f), floor_div(fine.j, f), floor_div(fine.k, f)};
        if (!frame.in_bounds(coarse)) continue;
        const auto cell = latent.cell_index(coarse.i, coarse.j, coarse.k);
        ++occupied[cell];
        ++counts[cell][voxel.label()];
    }
    const int block = f * f * f;
    for (std::size_t cell = 0; cell < latent.cell_count(); ++cell) {
        float *dst = &latent.values()[cell * channels];
        dst[0] = 2 * occupied[cell] > block ? 1.0f : -1.0f;
        auto it = counts.find(cell);
        if (it == counts.end()) continue;
        int best_channel = -1, best_count = 0;
        for (std::size_t m = 0; m < opts.channel_labels.size() && static_cast<int>(m) + 1 < channels; ++m) {
            auto lc = it->second.find(opts.channel_labels[m]);
            if (lc != it->second.end() && lc->second > best_count) {
                best_count = lc->second;
                best_channel = static_cast<int>(m) + 1;
            }
        }
        if (best_channel > 0) dst[best_channel] = 1.0f;
    }
    return latent;
}

} // namespace voxworld::outpaint
