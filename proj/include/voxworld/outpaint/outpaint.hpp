// Copyright Contributors to the voxworld Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "voxworld/outpaint/sampler.hpp"

#include <deque>
#include <functional>
#include <map>
#include <set>

namespace voxworld::outpaint {

/// Placed chunks of an outpainted latent world. Chunk (x, y) sits at
/// base_frame.origin + (x * stride, y * stride, 0).
struct ChunkLayout {
    ChunkFrame base_frame;
    double stride = 25.6;
    std::map<ChunkIndex, LatentCube> chunks;
    std::vector<ChunkIndex> order;

    [[nodiscard]] ChunkFrame frame_of(const ChunkIndex &idx) const {
        ChunkFrame f = base_frame;
        f.origin += Vec3(idx.x * stride, idx.y * stride, 0.0);
        return f;
    }

    /// Stride expressed in latent cells; throws ConfigError unless it is a whole number of cells.
    [[nodiscard]] int stride_cells() const {
        const double cells = stride / base_frame.cell_size;
        const double r = std::round(cells);
        if (std::abs(cells - r) > 1e-9 || r < 1 || r > base_frame.extent) {
            throw ConfigError("chunk stride must be a whole number of latent cells in (0, extent]");
        }
        return static_cast<int>(r);
    }
};

/// Overlap mask and fixed latent for a new chunk from every already-placed chunk that overlaps it.
/// Returns nullopt when nothing overlaps.
inline std::optional<std::pair<OverlapMask, LatentCube>> overlap_with_layout(const ChunkLayout &layout,
                                                                             const ChunkIndex &idx, int channels) {
    const int n = layout.base_frame.extent;
    const int stride = layout.stride_cells();
    const auto frame = layout.frame_of(idx);
    OverlapMask mask(frame, 1, std::uint8_t{0});
    LatentCube exist(frame, channels, 0.0f);
    bool any = false;
    for (const auto &placed : layout.order) {
        const int dx = (placed.x - idx.x) * stride, dy = (placed.y - idx.y) * stride;
        if (std::abs(dx) >= n || std::abs(dy) >= n) continue;
        const auto &src = layout.chunks.at(placed);
        for (int i = std::max(0, dx); i < std::min(n, n + dx); ++i) {
            for (int j = std::max(0, dy); j < std::min(n, n + dy); ++j) {
                for (int k = 0; k < n; ++k) {
                    const std::size_t cell = mask.cell_index(i, j, k);
                    if (mask.values()[cell]) continue;
                    mask.values()[cell] = 1;
                    any = true;
                    for (int c = 0; c < channels; ++c) exist.at(i, j, k, c) = src.at(i - dx, j - dy, k, c);
                }
            }
        }
    }
    if (!any) return std::nullopt;
    return std::make_pair(std::move(mask), std::move(exist));
}

using ConditionProvider = std::function<ConditionVolume(const ChunkIndex &, const ChunkFrame &)>;

/// Breadth-first placement order over the requested chunks. Seeds are the already-placed chunks,
/// or the first requested chunk for an empty layout; neighbors expand in +x, -x, +y, -y order.
inline std::vector<ChunkIndex> breadth_first_order(const std::vector<ChunkIndex> &request,
                                                   const std::vector<ChunkIndex> &placed) {
    std::set<ChunkIndex> wanted(request.begin(), request.end());
    std::set<ChunkIndex> seen(placed.begin(), placed.end());
    std::deque<ChunkIndex> queue(placed.begin(), placed.end());
    std::vector<ChunkIndex> order;
    if (queue.empty() && !request.empty()) {
        queue.push_back(request.front());
        seen.insert(request.front());
        order.push_back(request.front());
    }
    while (!queue.empty()) {
        const auto cur = queue.front();
        queue.pop_front();
        for (const ChunkIndex next : {ChunkIndex{cur.x + 1, cur.y}, ChunkIndex{cur.x - 1, cur.y},
                                      ChunkIndex{cur.x, cur.y + 1}, ChunkIndex{cur.x, cur.y - 1}}) {
            if (!wanted.count(next) || seen.count(next)) continue;
            seen.insert(next);
            order.push_back(next);
            queue.push_back(next);
        }
    }
    for (const auto &idx : wanted) {
        if (!seen.count(idx)) throw ConfigError("requested chunks are not 4-connected to the layout");
    }
    return order;
}

/// Grows `layout` chunk by chunk. Each new chunk keeps the latents of already-placed
/// overlapping chunks fixed through repaint blending, so shared slabs end up bit-identical.
inline ChunkLayout outpaint_scene(const std::vector<ChunkIndex> &request, const ConditionProvider &conditions,
                                  Denoiser &denoiser, const NoiseSchedule &schedule, const SamplerOptions &opts,
                                  std::uint64_t seed, ChunkLayout layout) {
    (void)layout.stride_cells();
    for (const auto &idx : breadth_first_order(request, layout.order)) {
        const auto frame = layout.frame_of(idx);
        const auto cond = conditions(idx, frame);
        if (!(cond.frame() == frame)) throw FrameMismatch("condition provider returned a volume for another frame");
        auto rng = chunk_rng(seed, idx);
        auto overlap = overlap_with_layout(layout, idx, opts.latent_channels);
        LatentCube latent = overlap ? sample_chunk(cond, denoiser, schedule, opts, rng, overlap->first, overlap->second)
                                    : sample_chunk(cond, denoiser, schedule, opts, rng);
        layout.chunks.emplace(idx, std::move(latent));
        layout.order.push_back(idx);
    }
    return layout;
}

inline ChunkLayout outpaint_scene(const std::vector<ChunkIndex> &request, const ConditionProvider &conditions,
                                  Denoiser &denoiser, const NoiseSchedule &schedule, const SamplerOptions &opts,
                                  std::uint64_t seed, const ChunkFrame &base_frame, double stride = 25.6) {
    ChunkLayout layout;
    layout.base_frame = base_frame;
    layout.stride = stride;
    return outpaint_scene(request, conditions, denoiser, schedule, opts, seed, std::move(layout));
}

} // namespace voxworld::outpaint
