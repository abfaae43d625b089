// Copyright Contributors to the voxworld Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "voxworld/grid/sparse_grid.hpp"

#include <array>
#include <cstdint>

namespace voxworld::buffers {

using Rgb = std::array<double, 3>;

/// Fixed semantic colors in [0, 1]; similar categories share a color.
/// Vehicle categories are colored per instance; their entry here is only the group swatch.
inline Rgb table_color(SemanticLabel label) {
    switch (label) {
    case SemanticLabel::Sign:
    case SemanticLabel::TrafficLight:
    case SemanticLabel::ConstructionCone: return {0.4, 0.7608, 0.6471};
    case SemanticLabel::Motorcyclist:
    case SemanticLabel::Bicyclist:
    case SemanticLabel::Pedestrian:
    case SemanticLabel::Bicycle:
    case SemanticLabel::Motorcycle: return {0.9882, 0.5529, 0.3843};
    case SemanticLabel::Car:
    case SemanticLabel::Truck:
    case SemanticLabel::Bus:
    case SemanticLabel::OtherVehicle: return {0.7373, 0.5020, 0.7412};
    case SemanticLabel::Curb:
    case SemanticLabel::LaneMarker: return {1.0, 0.8510, 0.1843};
    case SemanticLabel::Vegetation:
    case SemanticLabel::TreeTrunk: return {0.3020, 0.6863, 0.2902};
    case SemanticLabel::Walkable:
    case SemanticLabel::Sidewalk: return {0.5529, 0.6275, 0.7961};
    case SemanticLabel::Building: return {0.8980, 0.7686, 0.5804};
    case SemanticLabel::Road:
    case SemanticLabel::OtherGround: return {0.7020, 0.7020, 0.7020};
    case SemanticLabel::Undefined: return {0.1216, 0.4706, 0.7059};
    case SemanticLabel::Pole: return {0.8000, 0.9216, 0.7725};
    }
    throw std::invalid_argument("unknown semantic label");
}

/// Color for pixels that hit nothing.
inline Rgb miss_color() { return table_color(SemanticLabel::Undefined); }

/// 256-entry PuRd ramp, linearly interpolated between the nine ColorBrewer anchors
/// (entry i sits at x = i / 255, as in matplotlib's default LUT).
inline const std::array<Rgb, 256> &purd_ramp() {
    static const std::array<Rgb, 256> ramp = [] {
        constexpr std::array<Rgb, 9> anchors = {{
            {0.96862745098039216, 0.95686274509803926, 0.97647058823529409},
            {0.90588235294117647, 0.88235294117647056, 0.93725490196078431},
            {0.83137254901960789, 0.72549019607843135, 0.85490196078431369},
            {0.78823529411764703, 0.58039215686274515, 0.7803921568627451},
            {0.87450980392156863, 0.396078431372549, 0.69019607843137254},
            {0.90588235294117647, 0.16078431372549021, 0.54117647058823526},
            {0.80784313725490198, 0.07058823529411765, 0.33725490196078434},
            {0.59607843137254901, 0.0, 0.2627450980392157},
            {0.40392156862745099, 0.0, 0.12156862745098039},
        }};
        std::array<Rgb, 256> out{};
        for (int i = 0; i < 256; ++i) {
            const double x = i / 255.0 * 8.0;
            const int seg = std::min(7, static_cast<int>(x));
            const double u = x - seg;
            for (int c = 0; c < 3; ++c) out[i][c] = anchors[seg][c] + u * (anchors[seg + 1][c] - anchors[seg][c]);
        }
        return out;
    }();
    return ramp;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

inline std::size_t instance_ramp_index(std::int32_t instance_id) {
    return static_cast<std::size_t>(splitmix64(static_cast<std::uint64_t>(static_cast<std::uint32_t>(instance_id))) % 256);
}

inline Rgb instance_color(std::int32_t instance_id) { return purd_ramp()[instance_ramp_index(instance_id)]; }

inline Rgb voxel_color(const SemanticVoxel &voxel) {
    if (const auto id = voxel.instance_id()) return instance_color(*id);
    return table_color(voxel.label());
}

} // namespace voxworld::buffers
