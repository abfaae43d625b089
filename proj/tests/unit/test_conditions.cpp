// Copyright Contributors to the voxworld Project
// SPDX-License-Identifier: Apache-2.0

#include "helpers/oracles.hpp"

#include <voxworld/conditions/conditions.hpp>

#include <gtest/gtest.h>

#include <filesystem>
#include <random>

using namespace voxworld;
using namespace voxworld::conditions;

namespace {

const ChunkFrame kFrame{Vec3(0, 0, 0), 32, 1.6};

std::size_t nonzero(const std::vector<double> &v) {
    return static_cast<std::size_t>(std::count_if(v.begin(), v.end(), [](double x) { return x != 0.0; }));
}

Polyline square_loop(double x0, double y0, double side, double z = 0.0) {
    return {Vec3(x0, y0, z), Vec3(x0 + side, y0, z), Vec3(x0 + side, y0 + side, z), Vec3(x0, y0 + side, z),
            Vec3(x0, y0, z)};
}

BoxTrack still_track(std::int32_t id, const Vec3 &center, double heading, const Vec3 &size = Vec3(4.5, 2.0, 1.6)) {
    BoxTrack t;
    t.instance_id = id;
    t.size = size;
    t.poses = {{0.0, center, heading}, {1.0, center, heading}};
    return t;
}

} // namespace

TEST(HdCondition, EmptyMapIsZero) {
    const auto v = build_hd_condition(HDMap{}, kFrame);
    EXPECT_EQ(v.channels(), 2);
    EXPECT_EQ(nonzero(v.values()), 0u);
}

TEST(HdCondition, StraightEdgeFillsOneRow) {
    HDMap map;
    // row j = 16, k = 0: y in [25.6, 27.2), z in [0, 1.6)
    map.road_edges.push_back({Vec3(0.3, 26.1, 0.7), Vec3(51.0, 26.1, 0.7)});
    const auto v = build_hd_condition(map, kFrame);
    for (int i = 0; i < 32; ++i)
        for (int j = 0; j < 32; ++j)
            for (int k = 0; k < 32; ++k) {
                EXPECT_EQ(v.at(i, j, k, 0), (j == 16 && k == 0) ? 1.0 : 0.0);
                EXPECT_EQ(v.at(i, j, k, 1), 0.0);
            }
}

TEST(HdCondition, MatchesSegmentOracleAndChannelsIndependent) {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-5.0, 56.0);
    HDMap map;
    for (int n = 0; n < 6; ++n) map.road_edges.push_back({Vec3(u(rng), u(rng), u(rng)), Vec3(u(rng), u(rng), u(rng))});
    for (int n = 0; n < 6; ++n) map.road_lines.push_back({Vec3(u(rng), u(rng), u(rng)), Vec3(u(rng), u(rng), u(rng))});
    map.road_lines.push_back(map.road_edges.front());
    const auto v = build_hd_condition(map, kFrame);
    const auto lattice = kFrame.lattice();
    for (int i = 0; i < 32; ++i)
        for (int j = 0; j < 32; ++j)
            for (int k = 0; k < 32; ++k) {
                const VoxelCoord c{i, j, k};
                for (int ch = 0; ch < 2; ++ch) {
                    bool hit = false;
                    for (const auto &line : ch == 0 ? map.road_edges : map.road_lines)
                        hit = hit || oracle::segment_hits_half_open_cell(line[0], line[1], lattice.cell_min(c),
                                                                          lattice.cell_max(c));
                    ASSERT_EQ(v.at(c, ch), hit ? 1.0 : 0.0);
                }
            }
}

TEST(HdCondition, AddingPolylineNeverClearsCells) {
    HDMap map;
    map.road_edges.push_back({Vec3(1, 1, 1), Vec3(40, 30, 2)});
    const auto before = build_hd_condition(map, kFrame);
    map.road_edges.push_back({Vec3(40, 1, 1), Vec3(1, 30, 20)});
    map.road_lines.push_back({Vec3(3, 3, 3), Vec3(4, 45, 3)});
    const auto after = build_hd_condition(map, kFrame);
    for (std::size_t n = 0; n < before.values().size(); ++n)
        if (before.values()[n] != 0.0) EXPECT_EQ(after.values()[n], 1.0);
}

TEST(RoadSurface, FlatSquareLoopGivesSheetInsideLoop) {
    HDMap map;
    map.road_edges.push_back(square_loop(10.1, 10.1, 20.0, 0.8));
    const auto road = fit_road_surface(map, kFrame);
    for (int i = 0; i < 32; ++i)
        for (int j = 0; j < 32; ++j) {
            const Vec3 c = kFrame.lattice().cell_center({i, j, 0});
            const bool inside = c.x() > 10.1 && c.x() < 30.1 && c.y() > 10.1 && c.y() < 30.1;
            for (int k = 0; k < 32; ++k) EXPECT_EQ(road.at(i, j, k, 0), (inside && k == 0) ? 1.0 : 0.0);
        }
}

TEST(RoadSurface, TiltedPlaneMatchesNormalEquations) {
    const double slope = std::tan(5.0 * M_PI / 180.0);
    const auto z_of = [&](double x, double y) { return 20.0 + slope * x + 0.01 * y; };
    HDMap map;
    Polyline loop;
    for (const auto &[x, y] : std::vector<std::pair<double, double>>{{2.3, 3.1}, {48.7, 2.9}, {49.1, 47.3}, {3.3, 48.9}, {2.3, 3.1}})
        loop.push_back(Vec3(x, y, z_of(x, y)));
    map.road_edges.push_back(loop);
    map.road_lines.push_back({Vec3(10.0, 25.0, z_of(10.0, 25.0)), Vec3(41.0, 26.0, z_of(41.0, 26.0))});
    const auto pts = road_surface_points(map, kFrame);
    const auto fit = fit_plane_least_squares(pts);
    const auto ref = oracle::plane_normal_equations(pts);
    ASSERT_TRUE(fit && ref);
    EXPECT_NEAR(fit->a, (*ref)[0], 1e-9);
    EXPECT_NEAR(fit->b, (*ref)[1], 1e-9);
    EXPECT_NEAR(fit->c, (*ref)[2], 1e-9);
    EXPECT_NEAR(fit->a, slope, 1e-9);

    // every column inside the loop is marked exactly in the cell holding the plane height
    const auto road = fit_road_surface(map, kFrame);
    int marked = 0;
    for (int i = 0; i < 32; ++i)
        for (int j = 0; j < 32; ++j) {
            const Vec3 c = kFrame.lattice().cell_center({i, j, 0});
            int count = 0;
            for (int k = 0; k < 32; ++k) count += road.at(i, j, k, 0) != 0.0;
            if (!in_road_region(map, c.x(), c.y())) {
                EXPECT_EQ(count, 0);
                continue;
            }
            const int expected_k = static_cast<int>(std::floor(z_of(c.x(), c.y()) / 1.6));
            ASSERT_EQ(count, 1);
            EXPECT_EQ(road.at(i, j, expected_k, 0), 1.0);
            ++marked;
        }
    EXPECT_GT(marked, 500);
}

TEST(RoadSurface, DegenerateInputsThrow) {
    EXPECT_THROW(fit_road_surface(HDMap{}, kFrame), DegenerateGeometry);
    HDMap collinear;
    collinear.road_edges.push_back({Vec3(1, 1, 0), Vec3(20, 20, 0), Vec3(40, 40, 0)});
    EXPECT_THROW(fit_road_surface(collinear, kFrame), DegenerateGeometry);
    HDMap outside;
    outside.road_edges.push_back(square_loop(100, 100, 10));
    EXPECT_THROW(fit_road_surface(outside, kFrame), DegenerateGeometry);
    // build_conditions degrades to an empty road channel
    const auto cond = build_conditions(collinear, {}, 0.0, kFrame);
    for (std::size_t cell = 0; cell < cond.cell_count(); ++cell) EXPECT_EQ(cond.values()[cell * 5 + kRoadChannel], 0.0);
}

TEST(RoadSurface, OpenEdgesUseDilatedCorridor) {
    HDMap map;
    map.road_edges.push_back({Vec3(0.5, 20.0, 3.0), Vec3(50.0, 20.0, 3.0)});
    map.road_edges.push_back({Vec3(0.5, 27.0, 3.0), Vec3(50.0, 27.2, 3.0)});
    EXPECT_TRUE(in_road_region(map, 25.0, 23.5));
    EXPECT_TRUE(in_road_region(map, 25.0, 33.9));
    EXPECT_FALSE(in_road_region(map, 25.0, 34.5));
    EXPECT_FALSE(in_road_region(map, 25.0, 12.9));
    const auto road = fit_road_surface(map, kFrame);
    EXPECT_GT(nonzero(road.values()), 0u);
}

TEST(BoxCondition, HeadingEncoding) {
    for (const double heading : {0.0, M_PI / 2, 0.7, -2.5}) {
        const std::vector<BoxTrack> tracks{still_track(1, Vec3(25.6, 25.6, 25.6), heading, Vec3(8, 6, 4))};
        const auto box = build_box_condition(tracks, 0.5, kFrame);
        std::size_t cells = 0;
        for (std::size_t cell = 0; cell < box.cell_count(); ++cell) {
            const double s = box.values()[cell * 2], c = box.values()[cell * 2 + 1];
            if (s == 0.0 && c == 0.0) continue;
            ++cells;
            EXPECT_EQ(s, std::sin(heading));
            EXPECT_EQ(c, std::cos(heading));
            EXPECT_NEAR(s * s + c * c, 1.0, 1e-12);
        }
        EXPECT_GT(cells, 0u);
    }
    const std::vector<BoxTrack> zero{still_track(1, Vec3(25.6, 25.6, 25.6), 0.0, Vec3(8, 6, 4))};
    const auto b0 = build_box_condition(zero, 0.0, kFrame);
    EXPECT_EQ(b0.at(16, 16, 16, 0), 0.0);
    EXPECT_EQ(b0.at(16, 16, 16, 1), 1.0);
}

TEST(BoxCondition, CarAtCellBoundaryStaysBelowHalf) {
    // the 1.6 m tall car straddles a z boundary, so each cell holds exactly half of it at most
    const std::vector<BoxTrack> tracks{still_track(1, Vec3(24.8, 24.8, 25.6), 0.0)};
    const auto box = build_box_condition(tracks, 0.0, kFrame);
    EXPECT_EQ(nonzero(box.values()), 0u);
    for (const auto &cf : box_cell_fractions(kFrame.lattice(), *tracks[0].box_at(0.0))) {
        const auto dense = oracle::dense_fraction(kFrame.lattice().cell_min(cf.coord), 1.6, 32,
                                                  [&](const Vec3 &p) { return tracks[0].box_at(0.0)->contains(p); });
        EXPECT_LE(dense, 0.5);
        EXPECT_LE(cf.fraction, 0.5 + 1e-12);
    }
}

TEST(BoxCondition, OverlapGoesToLargerFractionThenSmallerId) {
    // the same box twice: equal fractions, so the smaller id (heading 0.3) wins
    std::vector<BoxTrack> tracks{still_track(9, Vec3(25.6, 25.6, 25.6), 1.2, Vec3(6, 6, 6)),
                                 still_track(2, Vec3(25.6, 25.6, 25.6), 0.3, Vec3(6, 6, 6))};
    auto box = build_box_condition(tracks, 0.0, kFrame);
    EXPECT_EQ(box.at(16, 16, 16, 0), std::sin(0.3));
    // a fully covering box beats a partial one regardless of id
    tracks = {still_track(1, Vec3(25.6 + 1.0, 25.6, 25.6), 0.0, Vec3(2.4, 2.4, 2.4)),
              still_track(5, Vec3(25.6 + 0.8, 25.6 + 0.8, 25.6 + 0.8), M_PI / 2, Vec3(1.8, 1.8, 1.8))};
    box = build_box_condition(tracks, 0.0, kFrame);
    EXPECT_EQ(box.at(16, 16, 16, 0), 1.0);
}

TEST(BoxCondition, InterpolatesPosesAndSkipsInactiveTracks) {
    BoxTrack t;
    t.instance_id = 3;
    t.size = Vec3(4, 4, 4);
    t.poses = {{0.0, Vec3(10, 10, 10), 3.0}, {2.0, Vec3(30, 10, 10), -3.0}};
    const auto mid = t.pose_at(1.0);
    ASSERT_TRUE(mid);
    EXPECT_NEAR(mid->center.x(), 20.0, 1e-12);
    EXPECT_NEAR(std::abs(mid->heading), M_PI, 1e-12);  // shortest arc crosses pi, not 0
    EXPECT_FALSE(t.pose_at(2.5));
    const std::vector<BoxTrack> tracks{t};
    EXPECT_EQ(nonzero(build_box_condition(tracks, 5.0, kFrame).values()), 0u);
}

TEST(BoxCondition, QuarterTurnRotationPermutesVolume) {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const Vec3 center(25.6, 25.6, 25.6);
    std::vector<BoxTrack> tracks;
    for (int n = 0; n < 12; ++n)
        tracks.push_back(still_track(n, Vec3(6 + 40 * u(rng), 6 + 40 * u(rng), 22 + 6 * u(rng)), 2 * M_PI * u(rng),
                                     Vec3(3 + 3 * u(rng), 2 + 2 * u(rng), 1.5 + 2 * u(rng))));
    HDMap map;
    map.road_edges.push_back(square_loop(5.3, 7.1, 37.0, 24.9));
    map.road_lines.push_back({Vec3(9.1, 30.3, 25.3), Vec3(44.2, 12.7, 27.9)});

    auto rotated_tracks = tracks;
    auto rotated_map = map;
    const auto rot = [&](const Vec3 &p) { return Vec3(center.x() - (p.y() - center.y()), center.y() + (p.x() - center.x()), p.z()); };
    for (auto &t : rotated_tracks)
        for (auto &p : t.poses) p.center = rot(p.center), p.heading = wrap_angle(p.heading + M_PI / 2);
    for (auto *set : {&rotated_map.road_edges, &rotated_map.road_lines})
        for (auto &line : *set)
            for (auto &v : line) v = rot(v);

    const auto a = build_conditions(map, tracks, 0.0, kFrame);
    const auto b = build_conditions(rotated_map, rotated_tracks, 0.0, kFrame);
    // per-cell best fraction, to skip cells too close to the threshold
    std::map<VoxelCoord, double> best;
    for (const auto &t : tracks)
        for (const auto &cf : box_cell_fractions(kFrame.lattice(), *t.box_at(0.0)))
            best[cf.coord] = std::max(best[cf.coord], cf.fraction);
    int compared = 0;
    for (int i = 0; i < 32; ++i)
        for (int j = 0; j < 32; ++j)
            for (int k = 0; k < 32; ++k) {
                const int ri = 31 - j, rj = i;  // lattice image of (i, j) under the quarter turn
                for (int ch : {kEdgeChannel, kLineChannel, kRoadChannel}) ASSERT_EQ(a.at(i, j, k, ch), b.at(ri, rj, k, ch));
                auto it = best.find({i, j, k});
                if (it != best.end() && std::abs(it->second - 0.5) <= 0.05) continue;
                const double s = a.at(i, j, k, kBoxSinChannel), c = a.at(i, j, k, kBoxCosChannel);
                const double rs = b.at(ri, rj, k, kBoxSinChannel), rc = b.at(ri, rj, k, kBoxCosChannel);
                if (s == 0.0 && c == 0.0) {
                    ASSERT_EQ(rs, 0.0);
                    ASSERT_EQ(rc, 0.0);
                } else {
                    ++compared;
                    // heading + pi/2: (sin, cos) -> (cos, -sin)
                    ASSERT_NEAR(rs, c, 1e-12);
                    ASSERT_NEAR(rc, -s, 1e-12);
                }
            }
    EXPECT_GT(compared, 20);
}

TEST(Assemble, StackingAndRoundTrip) {
    DenseVolume<double> hd(kFrame, 2), road(kFrame, 1), box(kFrame, 2);
    EXPECT_EQ(nonzero(assemble_conditions(hd, road, box).values()), 0u);
    hd.at(1, 2, 3, 1) = 1.0;
    road.at(4, 5, 6, 0) = 1.0;
    box.at(7, 8, 9, 0) = 0.6;
    box.at(7, 8, 9, 1) = 0.8;
    const auto all = assemble_conditions(hd, road, box);
    EXPECT_EQ(all.channels(), 5);
    EXPECT_EQ(nonzero(all.values()), 4u);
    EXPECT_EQ(all.at(1, 2, 3, kLineChannel), 1.0);
    EXPECT_EQ(all.at(4, 5, 6, kRoadChannel), 1.0);
    EXPECT_EQ(all.at(7, 8, 9, kBoxSinChannel), 0.6);
    EXPECT_EQ(all.at(7, 8, 9, kBoxCosChannel), 0.8);
    const auto parts = split_conditions(all);
    EXPECT_EQ(parts.hd, hd);
    EXPECT_EQ(parts.road, road);
    EXPECT_EQ(parts.box, box);
    ChunkFrame other = kFrame;
    other.origin.x() += 1.6;
    EXPECT_THROW(assemble_conditions(hd, DenseVolume<double>(other, 1), box), FrameMismatch);
}

TEST(ConditionIo, JsonAndRawRoundTrip) {
    HDMap map;
    map.road_edges.push_back(square_loop(3, 4, 30, 1.0));
    map.road_lines.push_back({Vec3(5, 5, 1), Vec3(30, 6, 1)});
    const auto map2 = hd_map_from_json(nlohmann::json::parse(hd_map_to_json(map).dump()));
    EXPECT_EQ(map2.road_edges, map.road_edges);
    EXPECT_EQ(map2.road_lines, map.road_lines);
    std::vector<BoxTrack> tracks{still_track(4, Vec3(20, 20, 2), 0.25)};
    const auto tracks2 = tracks_from_json(nlohmann::json::parse(tracks_to_json(tracks).dump()));
    ASSERT_EQ(tracks2.size(), 1u);
    EXPECT_EQ(tracks2[0].instance_id, 4);
    EXPECT_EQ(tracks2[0].poses[1].heading, 0.25);
    EXPECT_THROW(hd_map_from_json(nlohmann::json::parse(R"({"polylines":[{"type":"edge","vertices":[[0,0,0]]}]})")),
                 ConfigError);
    EXPECT_THROW(tracks_from_json(nlohmann::json::parse(R"({"tracks":[{"id":1,"size":[1,1,1],"poses":[[1,0,0,0,0],[1,0,0,0,0]]}]})")),
                 ConfigError);

    const auto cond = build_conditions(map, tracks, 0.0, kFrame);
    const auto dir = std::filesystem::temp_directory_path() / "voxworld_test_conditions";
    save_conditions(dir / "cond.f32", cond);
    const auto loaded = load_conditions(dir / "cond.f32");
    ASSERT_EQ(loaded.frame(), cond.frame());
    ASSERT_EQ(loaded.values().size(), cond.values().size());
    for (std::size_t n = 0; n < cond.values().size(); ++n)
        ASSERT_EQ(loaded.values()[n], static_cast<double>(static_cast<float>(cond.values()[n])));
    const auto sidecar = nlohmann::json::parse(io::read_text_file(dir / "cond.f32.json"));
    EXPECT_EQ(sidecar.at("channels"), 5);
    EXPECT_EQ(sidecar.at("N"), 32);
    std::filesystem::remove_all(dir);
}
