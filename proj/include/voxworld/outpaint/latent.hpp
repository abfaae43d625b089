// Copyright Contributors to the voxworld Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "voxworld/conditions/conditions.hpp"
#include "voxworld/core/dense_volume.hpp"

#include <compare>
#include <cstdint>

namespace voxworld::outpaint {

/// Dense N^3 x C diffusion latent.
using LatentCube = DenseVolume<float>;

/// N^3 binary mask, 1 = existing/fixed cell. Applies to every channel of the cell.
using OverlapMask = DenseVolume<std::uint8_t>;

using conditions::ConditionVolume;

/// 2D index of a chunk in the outpainting layout.
struct ChunkIndex {
    int x = 0;
    int y = 0;

    friend auto operator<=>(const ChunkIndex &, const ChunkIndex &) = default;
    friend bool operator==(const ChunkIndex &, const ChunkIndex &) = default;
};

} // namespace voxworld::outpaint
