// Copyright Contributors to the voxworld Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

namespace voxworld {

/// Semantic categories of the voxel world, in palette-table order.
enum class SemanticLabel : std::uint8_t {
    Sign,
    TrafficLight,
    ConstructionCone,
    Motorcyclist,
    Bicyclist,
    Pedestrian,
    Bicycle,
    Motorcycle,
    Car,
    Truck,
    Bus,
    OtherVehicle,
    Curb,
    LaneMarker,
    Vegetation,
    TreeTrunk,
    Walkable,
    Sidewalk,
    Building,
    Road,
    OtherGround,
    Undefined,
    Pole,
};

inline constexpr std::size_t kNumSemanticLabels = 23;

inline constexpr std::array<std::string_view, kNumSemanticLabels> kSemanticLabelNames = {
    "SIGN",       "TRAFFIC_LIGHT", "CONSTRUCTION_CONE", "MOTORCYCLIST", "BICYCLIST", "PEDESTRIAN",
    "BICYCLE",    "MOTORCYCLE",    "CAR",               "TRUCK",        "BUS",       "OTHER_VEHICLE",
    "CURB",       "LANE_MARKER",   "VEGETATION",        "TREE_TRUNK",   "WALKABLE",  "SIDEWALK",
    "BUILDING",   "ROAD",          "OTHER_GROUND",      "UNDEFINED",    "POLE",
};

constexpr std::string_view label_name(SemanticLabel label) {
    return kSemanticLabelNames[static_cast<std::size_t>(label)];
}

constexpr std::optional<SemanticLabel> label_from_name(std::string_view name) {
    for (std::size_t i = 0; i < kNumSemanticLabels; ++i) {
        if (kSemanticLabelNames[i] == name) return static_cast<SemanticLabel>(i);
    }
    return std::nullopt;
}

constexpr bool is_valid_label(std::uint8_t raw) { return raw < kNumSemanticLabels; }

/// Vehicle categories carry an instance id; everything else does not.
constexpr bool is_vehicle(SemanticLabel label) {
    return label == SemanticLabel::Car || label == SemanticLabel::Truck || label == SemanticLabel::Bus ||
           label == SemanticLabel::OtherVehicle;
}

} // namespace voxworld
