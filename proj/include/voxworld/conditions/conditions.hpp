// Copyright Contributors to the voxworld Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "voxworld/conditions/hd_map.hpp"
#include "voxworld/core/binary_io.hpp"
#include "voxworld/core/dense_volume.hpp"

#include <Eigen/QR>

#include <array>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <vector>

namespace voxworld::conditions {

// Channel layout of the assembled condition volume.
inline constexpr int kEdgeChannel = 0;
inline constexpr int kLineChannel = 1;
inline constexpr int kRoadChannel = 2;
inline constexpr int kBoxSinChannel = 3;
inline constexpr int kBoxCosChannel = 4;
inline constexpr int kConditionChannels = 5;
inline constexpr std::array<const char *, kConditionChannels> kConditionChannelNames = {
    "hd_edge", "hd_line", "road_surface", "box_sin_heading", "box_cos_heading"};

using ConditionVolume = DenseVolume<double>;

/// Rasterizes edges into channel 0 and lines into channel 1; a cell is 1 iff a segment touches it.
inline DenseVolume<double> build_hd_condition(const HDMap &map, const ChunkFrame &frame) {
    DenseVolume<double> out(frame, 2, 0.0);
    const auto lattice = frame.lattice();
    const auto raster = [&](const std::vector<Polyline> &set, int channel) {
        for (const auto &line : set) {
            for (std::size_t v = 1; v < line.size(); ++v) {
                for (const auto &c : cells_touched_by_segment(lattice, line[v - 1], line[v])) {
                    if (frame.in_bounds(c)) out.at(c, channel) = 1.0;
                }
            }
        }
    };
    raster(map.road_edges, 0);
    raster(map.road_lines, 1);
    return out;
}

/// z = a*x + b*y + c
struct PlaneFit {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;

    [[nodiscard]] double z_at(double x, double y) const { return a * x + b * y + c; }
};

/// Least-squares height plane through the points. nullopt with fewer than 3 points or
/// when the points are collinear in (x, y).
inline std::optional<PlaneFit> fit_plane_least_squares(std::span<const Vec3> points) {
    if (points.size() < 3) return std::nullopt;
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    for (const auto &p : points) mean += p.head<2>();
    mean /= static_cast<double>(points.size());
    Eigen::MatrixXd design(points.size(), 3);
    Eigen::VectorXd rhs(points.size());
    for (std::size_t n = 0; n < points.size(); ++n) {
        design(n, 0) = points[n].x() - mean.x();
        design(n, 1) = points[n].y() - mean.y();
        design(n, 2) = 1.0;
        rhs(n) = points[n].z();
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    qr.setThreshold(1e-9);
    if (qr.rank() < 3) return std::nullopt;
    const Eigen::Vector3d sol = qr.solve(rhs);
    return PlaneFit{sol(0), sol(1), sol(2) - sol(0) * mean.x() - sol(1) * mean.y()};
}

/// Polyline vertices resampled to at most half-cell spacing, restricted to the chunk's (x, y) footprint.
inline std::vector<Vec3> road_surface_points(const HDMap &map, const ChunkFrame &frame) {
    const double spacing = 0.5 * frame.cell_size;
    const double x0 = frame.origin.x(), y0 = frame.origin.y();
    const double x1 = x0 + frame.world_extent(), y1 = y0 + frame.world_extent();
    std::vector<Vec3> out;
    const auto keep = [&](const Vec3 &p) {
        if (p.x() >= x0 && p.x() < x1 && p.y() >= y0 && p.y() < y1) out.push_back(p);
    };
    for (const auto *set : {&map.road_edges, &map.road_lines}) {
        for (const auto &line : *set) {
            keep(line.front());
            for (std::size_t v = 1; v < line.size(); ++v) {
                const Vec3 &a = line[v - 1], &b = line[v];
                const int pieces = std::max(1, static_cast<int>(std::ceil((b - a).norm() / spacing)));
                for (int s = 1; s <= pieces; ++s) keep(a + (b - a) * (static_cast<double>(s) / pieces));
            }
        }
    }
    return out;
}

namespace detail {

inline bool is_closed(const Polyline &line) { return line.size() >= 4 && (line.front() - line.back()).norm() < 1e-3; }

// Even-odd crossing test over every closed loop.
inline bool inside_loops(const std::vector<const Polyline *> &loops, double x, double y) {
    bool inside = false;
    for (const auto *loop : loops) {
        const auto &l = *loop;
        for (std::size_t n = 0, m = l.size() - 1; n < l.size(); m = n++) {
            const double xi = l[n].x(), yi = l[n].y(), xj = l[m].x(), yj = l[m].y();
            if ((yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi) inside = !inside;
        }
    }
    return inside;
}

inline double segment_distance_2d(const Eigen::Vector2d &p, const Eigen::Vector2d &a, const Eigen::Vector2d &b) {
    const Eigen::Vector2d ab = b - a;
    const double len2 = ab.squaredNorm();
    const double u = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    return (a + u * ab - p).norm();
}

} // namespace detail

struct RoadSurfaceOptions {
    int tiles_per_axis = 4;
    /// Road half-width used when the edges do not form a closed loop (about two lanes).
    double open_edge_dilation = 7.0;
};

/// True if the (x, y) position belongs to the road region recovered from the HD map.
inline bool in_road_region(const HDMap &map, double x, double y, const RoadSurfaceOptions &opts = {}) {
    std::vector<const Polyline *> loops;
    for (const auto &e : map.road_edges)
        if (detail::is_closed(e)) loops.push_back(&e);
    if (!loops.empty()) return detail::inside_loops(loops, x, y);
    const Eigen::Vector2d p(x, y);
    for (const auto *set : {&map.road_edges, &map.road_lines})
        for (const auto &line : *set)
            for (std::size_t v = 1; v < line.size(); ++v) {
                if (detail::segment_distance_2d(p, line[v - 1].head<2>(), line[v].head<2>()) <= opts.open_edge_dilation)
                    return true;
            }
    return false;
}

/// Piecewise-planar road surface: one least-squares plane per sub-tile (falling back to the
/// chunk-wide plane), kept where the cell column lies in the road region. Each column gets
/// the single cell whose vertical span contains the plane height.
inline DenseVolume<double> fit_road_surface(const HDMap &map, const ChunkFrame &frame,
                                            const RoadSurfaceOptions &opts = {}) {
    const auto points = road_surface_points(map, frame);
    const auto global = fit_plane_least_squares(points);
    if (!global) throw DegenerateGeometry("road surface needs at least 3 non-collinear polyline vertices in the chunk");

    const int tiles = std::max(1, opts.tiles_per_axis);
    const double tile_size = frame.world_extent() / tiles;
    std::vector<std::vector<Vec3>> buckets(static_cast<std::size_t>(tiles * tiles));
    const auto tile_of = [&](double x, double y) {
        const int tx = std::clamp(static_cast<int>(std::floor((x - frame.origin.x()) / tile_size)), 0, tiles - 1);
        const int ty = std::clamp(static_cast<int>(std::floor((y - frame.origin.y()) / tile_size)), 0, tiles - 1);
        return tx * tiles + ty;
    };
    for (const auto &p : points) buckets[tile_of(p.x(), p.y())].push_back(p);
    std::vector<PlaneFit> planes;
    for (const auto &bucket : buckets) planes.push_back(fit_plane_least_squares(bucket).value_or(*global));

    std::vector<const Polyline *> loops;
    for (const auto &e : map.road_edges)
        if (detail::is_closed(e)) loops.push_back(&e);

    DenseVolume<double> out(frame, 1, 0.0);
    const auto lattice = frame.lattice();
    for (int i = 0; i < frame.extent; ++i) {
        for (int j = 0; j < frame.extent; ++j) {
            const Vec3 center = lattice.cell_center({i, j, 0});
            if (!in_road_region(map, center.x(), center.y(), opts)) continue;
            const double z = planes[tile_of(center.x(), center.y())].z_at(center.x(), center.y());
            const double kf = std::floor((z - frame.origin.z()) / frame.cell_size);
            if (kf < 0 || kf >= frame.extent) continue;
            out.at(i, j, static_cast<int>(kf), 0) = 1.0;
        }
    }
    return out;
}

/// Occupancy strictly above half the cell.
inline constexpr double kBoxOccupancyThreshold = 0.5;

/// Cells covered by more than half by a vehicle box carry [sin heading, cos heading].
/// Overlaps go to the larger covered fraction, then the smaller instance id.
/// Tracks whose time span does not include `t` contribute nothing.
inline DenseVolume<double> build_box_condition(std::span<const BoxTrack> tracks, double t, const ChunkFrame &frame) {
    struct Claim {
        double fraction;
        std::int32_t instance;
        double heading;
    };
    std::map<std::uint64_t, Claim> claims;
    const auto lattice = frame.lattice();
    for (const auto &track : tracks) {
        const auto box = track.box_at(t);
        if (!box) continue;
        for (const auto &cf : box_cell_fractions(lattice, *box)) {
            if (!(cf.fraction > kBoxOccupancyThreshold) || !frame.in_bounds(cf.coord)) continue;
            const Claim claim{cf.fraction, track.instance_id, box->heading};
            auto [it, inserted] = claims.emplace(pack_coord(cf.coord), claim);
            if (!inserted) {
                const Claim &cur = it->second;
                if (claim.fraction > cur.fraction || (claim.fraction == cur.fraction && claim.instance < cur.instance)) {
                    it->second = claim;
                }
            }
        }
    }
    DenseVolume<double> out(frame, 2, 0.0);
    for (const auto &[key, claim] : claims) {
        const auto c = unpack_coord(key);
        out.at(c, 0) = std::sin(claim.heading);
        out.at(c, 1) = std::cos(claim.heading);
    }
    return out;
}

/// Channel-stacks HD (2) + road (1) + box (2) into the 5-channel condition volume.
inline ConditionVolume assemble_conditions(const DenseVolume<double> &hd, const DenseVolume<double> &road,
                                           const DenseVolume<double> &box) {
    if (!(hd.frame() == road.frame()) || !(hd.frame() == box.frame())) {
        throw FrameMismatch("condition parts were built for different chunk frames");
    }
    if (hd.channels() != 2 || road.channels() != 1 || box.channels() != 2) {
        throw std::invalid_argument("condition parts must have 2, 1 and 2 channels");
    }
    ConditionVolume out(hd.frame(), kConditionChannels, 0.0);
    for (std::size_t cell = 0; cell < out.cell_count(); ++cell) {
        auto *dst = &out.values()[cell * kConditionChannels];
        dst[kEdgeChannel] = hd.values()[cell * 2];
        dst[kLineChannel] = hd.values()[cell * 2 + 1];
        dst[kRoadChannel] = road.values()[cell];
        dst[kBoxSinChannel] = box.values()[cell * 2];
        dst[kBoxCosChannel] = box.values()[cell * 2 + 1];
    }
    return out;
}

struct ConditionParts {
    DenseVolume<double> hd;
    DenseVolume<double> road;
    DenseVolume<double> box;
};

inline ConditionParts split_conditions(const ConditionVolume &volume) {
    if (volume.channels() != kConditionChannels) throw std::invalid_argument("condition volume must have 5 channels");
    ConditionParts parts{DenseVolume<double>(volume.frame(), 2), DenseVolume<double>(volume.frame(), 1),
                         DenseVolume<double>(volume.frame(), 2)};
    for (std::size_t cell = 0; cell < volume.cell_count(); ++cell) {
        const auto *src = &volume.values()[cell * kConditionChannels];
        parts.hd.values()[cell * 2] = src[kEdgeChannel];
        parts.hd.values()[cell * 2 + 1] = src[kLineChannel];
        parts.road.values()[cell] = src[kRoadChannel];
        parts.box.values()[cell * 2] = src[kBoxSinChannel];
        parts.box.values()[cell * 2 + 1] = src[kBoxCosChannel];
    }
    return parts;
}

/// Full condition volume for one chunk. A chunk with no usable road geometry gets an empty road channel.
inline ConditionVolume build_conditions(const HDMap &map, std::span<const BoxTrack> tracks, double t,
                                        const ChunkFrame &frame, const RoadSurfaceOptions &opts = {}) {
    auto hd = build_hd_condition(map, frame);
    DenseVolume<double> road(frame, 1, 0.0);
    try {
        road = fit_road_surface(map, frame, opts);
    } catch (const DegenerateGeometry &) {
    }
    return assemble_conditions(hd, road, build_box_condition(tracks, t, frame));
}

inline nlohmann::json chunk_frame_to_json(const ChunkFrame &frame) {
    return {{"origin", vec3_to_json(frame.origin)}, {"extent", frame.extent}, {"cell_size", frame.cell_size}};
}

inline ChunkFrame chunk_frame_from_json(const nlohmann::json &j) {
    ChunkFrame frame;
    frame.origin = vec3_from_json(j.at("origin"));
    frame.extent = j.at("extent").get<int>();
    frame.cell_size = j.at("cell_size").get<double>();
    if (frame.extent <= 0 || !(frame.cell_size > 0.0)) throw FormatError("invalid chunk frame");
    return frame;
}

/// Condition export: raw little-endian f32 array plus a JSON sidecar {N, channels, frame}.
inline void save_conditions(const std::filesystem::path &raw_path, const ConditionVolume &volume) {
    std::vector<float> values(volume.values().begin(), volume.values().end());
    io::write_file(raw_path, io::pack_f32(values));
    nlohmann::json sidecar = {{"N", volume.extent()},
                              {"channels", volume.channels()},
                              {"channel_names", kConditionChannelNames},
                              {"layout", "channel-last, index = ((i*N + j)*N + k)*C + c"},
                              {"frame", chunk_frame_to_json(volume.frame())}};
    auto sidecar_path = raw_path;
    sidecar_path += ".json";
    io::write_text_file(sidecar_path, sidecar.dump(2) + "\n");
}

inline ConditionVolume load_conditions(const std::filesystem::path &raw_path) {
    auto sidecar_path = raw_path;
    sidecar_path += ".json";
    const auto sidecar = nlohmann::json::parse(io::read_text_file(sidecar_path));
    const auto frame = chunk_frame_from_json(sidecar.at("frame"));
    const int channels = sidecar.at("channels").get<int>();
    const auto values = io::unpack_f32(io::read_file(raw_path));
    return ConditionVolume(frame, channels, std::vector<double>(values.begin(), values.end()));
}

} // namespace voxworld::conditions
