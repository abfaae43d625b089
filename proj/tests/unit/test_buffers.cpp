// Copyright Contributors to the voxworld Project
// SPDX-License-Identifier: Apache-2.0

#include "helpers/oracles.hpp"

#include <voxworld/buffers/buffer_io.hpp>
#include <voxworld/buffers/render.hpp>

#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <set>

using namespace voxworld;
using namespace voxworld::buffers;

namespace {

const SemanticVoxel kBuilding(SemanticLabel::Building);

std::optional<RayHit> brute_force(const SparseVoxelGrid &g, const Vec3 &o, const Vec3 &d, double max_range) {
    std::optional<RayHit> best;
    for (const auto &[c, v] : g) {
        const auto t = oracle::ray_box_entry(o, d, g.cell_box(c).min, g.cell_box(c).max);
        if (!t || *t > max_range) continue;
        if (!best || *t < best->distance) best = RayHit{c, *t};
    }
    return best;
}

Trajectory straight_trajectory(int frames, double spacing, int width = 64, int height = 48) {
    Trajectory traj;
    for (int n = 0; n < frames; ++n)
        traj.frames.push_back({0.1 * n, forward_camera(Vec3(n * spacing, 0.0, 1.6), 0.0, width, height, M_PI / 2)});
    return traj;
}

} // namespace

TEST(Camera, RaysAndProjection) {
    const auto cam = forward_camera(Vec3(1, 2, 3), 0.3, 64, 48, M_PI / 2);
    cam.validate();
    EXPECT_NEAR(cam.fx, 32.0, 1e-12);
    // central ray follows the heading in the ground plane
    const Vec3 fwd = cam.pose.linear() * Vec3::UnitZ();
    EXPECT_NEAR(fwd.x(), std::cos(0.3), 1e-12);
    EXPECT_NEAR(fwd.y(), std::sin(0.3), 1e-12);
    EXPECT_NEAR(fwd.z(), 0.0, 1e-12);
    // image up is world up
    EXPECT_NEAR((cam.pose.linear() * -Vec3::UnitY()).z(), 1.0, 1e-12);
    const Vec3 p = cam.position() + 7.5 * cam.ray_direction(10, 40);
    const auto uvz = cam.project(p);
    ASSERT_TRUE(uvz);
    EXPECT_NEAR((*uvz)[0], 10.5, 1e-9);
    EXPECT_NEAR((*uvz)[1], 40.5, 1e-9);
    EXPECT_NEAR((*uvz)[2], cam.depth_of(p), 1e-12);
    Camera bad = cam;
    bad.cx = 100;
    EXPECT_THROW(bad.validate(), ConfigError);
    bad = cam;
    bad.pose.linear() *= 2.0;
    EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Camera, TrajectoryJsonRoundTrip) {
    const auto traj = straight_trajectory(3, 1.5);
    const auto j = trajectory_to_json(traj);
    EXPECT_EQ(j.at("version"), 1);
    const auto back = trajectory_from_json(nlohmann::json::parse(j.dump()));
    ASSERT_EQ(back.frames.size(), 3u);
    for (std::size_t n = 0; n < 3; ++n) {
        EXPECT_EQ(back.frames[n].t, traj.frames[n].t);
        EXPECT_TRUE(back.frames[n].camera.pose.matrix() == traj.frames[n].camera.pose.matrix());
    }
    auto dup = j;
    dup["frames"][1]["t"] = 0.0;
    EXPECT_THROW(trajectory_from_json(dup), ConfigError);
}

TEST(Raycast, AxisAlignedHitAndMiss) {
    SparseVoxelGrid g(Vec3::Zero(), 0.2);
    g.set({5, 0, 0}, kBuilding);
    const auto hit = raycast_dda(g, Vec3(0.0, 0.1, 0.1), Vec3(1, 0, 0), 100.0);
    ASSERT_TRUE(hit);
    EXPECT_EQ(hit->coord, (VoxelCoord{5, 0, 0}));
    EXPECT_NEAR(hit->distance, 5 * 0.2, 1e-12);
    EXPECT_FALSE(raycast_dda(g, Vec3(0.0, 0.1, 0.1), Vec3(-1, 0, 0), 100.0));
    EXPECT_FALSE(raycast_dda(g, Vec3(0.0, 0.1, 0.1), Vec3(1, 0, 0), 0.9));
    const auto inside = raycast_dda(g, Vec3(1.05, 0.1, 0.1), Vec3(0, 1, 1), 10.0);
    ASSERT_TRUE(inside);
    EXPECT_EQ(inside->distance, 0.0);
    EXPECT_THROW(raycast_dda(g, Vec3::Zero(), Vec3::Zero(), 1.0), std::invalid_argument);
    EXPECT_FALSE(raycast_dda(SparseVoxelGrid(Vec3::Zero(), 0.2), Vec3::Zero(), Vec3(1, 0, 0), 10.0));
}

TEST(Raycast, MatchesBruteForceOnRandomGrids) {
    std::mt19937_64 rng(29);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int hits = 0;
    for (int grid_n = 0; grid_n < 10; ++grid_n) {
        const int n = 8 + static_cast<int>(u(rng) * 56);
        const double vs = 0.1 + 0.4 * u(rng);
        SparseVoxelGrid g(Vec3(u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5) * 3.0, vs);
        std::uniform_int_distribution<int> coord(-n / 2, n / 2 - 1);
        const int count = std::max(1, static_cast<int>(n * n * n * 0.002 * (1 + 4 * u(rng))));
        for (int k = 0; k < count; ++k) g.set({coord(rng), coord(rng), coord(rng)}, kBuilding);
        const VoxelRaycaster caster(g);
        const double half = n * vs;
        for (int r = 0; r < 100; ++r) {
            const Vec3 o = g.origin() + Vec3(u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5) * 2.0 * half;
            Vec3 d;
            if (r % 2 == 0) {
                const VoxelCoord target = (*std::next(g.begin(), static_cast<long>(u(rng) * g.size()))).first;
                d = g.cell_center(target) + Vec3(u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5) * vs - o;
            } else {
                d = Vec3(u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5);
            }
            d.normalize();
            const double max_range = 4.0 * half;
            const auto got = caster.cast(o, d, max_range);
            const auto want = brute_force(g, o, d, max_range);
            ASSERT_EQ(got.has_value(), want.has_value()) << grid_n << "/" << r;
            if (!got) continue;
            ++hits;
            EXPECT_EQ(got->coord, want->coord);
            EXPECT_NEAR(got->distance, want->distance, 1e-9);
        }
    }
    EXPECT_GT(hits, 400);
}

TEST(Palette, TableColors) {
    EXPECT_EQ(table_color(SemanticLabel::Building), (Rgb{0.8980, 0.7686, 0.5804}));
    EXPECT_EQ(table_color(SemanticLabel::Sidewalk), table_color(SemanticLabel::Walkable));
    EXPECT_EQ(miss_color(), (Rgb{0.1216, 0.4706, 0.7059}));
    std::set<Rgb> groups;
    for (std::size_t l = 0; l < kNumSemanticLabels; ++l) groups.insert(table_color(static_cast<SemanticLabel>(l)));
    EXPECT_EQ(groups.size(), 10u);  // one color per category group
}

TEST(Palette, RampMatchesMatplotlibPuRd) {
    const auto &r = purd_ramp();
    const std::vector<std::pair<int, Rgb>> reference = {
        {0, {0.96862745098039216, 0.95686274509803926, 0.97647058823529409}},
        {37, {0.89390234525182621, 0.8571318723567859, 0.9240138408304498}},
        {64, {0.83103421760861207, 0.72435217224144555, 0.85431757016532095}},
        {128, {0.87500192233756247, 0.39238754325259512, 0.68785851595540171}},
        {200, {0.74971164936562862, 0.051211072664359855, 0.31680123029604002}},
        {255, {0.40392156862745099, 0.0, 0.12156862745098039}},
    };
    for (const auto &[i, rgb] : reference)
        for (int c = 0; c < 3; ++c) EXPECT_NEAR(r[i][c], rgb[c], 1e-12) << i;
}

TEST(Palette, InstanceColorCollisionsAreRare) {
    std::size_t pairs = 0, collisions = 0;
    for (std::int32_t a = 0; a < 50; ++a)
        for (std::int32_t b = a + 1; b < 50; ++b) {
            ++pairs;
            collisions += instance_ramp_index(a) == instance_ramp_index(b);
        }
    EXPECT_LT(static_cast<double>(collisions) / pairs, 0.02);
    EXPECT_EQ(voxel_color(SemanticVoxel(SemanticLabel::Car, 7)), instance_color(7));
}

TEST(Render, SemanticDepthAndMisses) {
    SparseVoxelGrid world(Vec3::Zero(), 0.2);
    for (int j = -40; j < 40; ++j)
        for (int k = 0; k < 30; ++k) world.set({50, j, k}, kBuilding);  // wall at x in [10, 10.2)
    Trajectory traj;
    traj.frames.push_back({0.0, forward_camera(Vec3(0.0, 0.0, 1.6), 0.0, 32, 24, M_PI / 2)});
    const auto b = render_buffers(world, {}, traj).front();
    const VoxelRaycaster caster(world);
    int hits = 0, misses = 0;
    for (int v = 0; v < 24; ++v)
        for (int u = 0; u < 32; ++u) {
            const Vec3 dir = traj.frames[0].camera.ray_direction(u, v);
            const auto h = caster.cast(traj.frames[0].camera.position(), dir, 300.0);
            if (h) {
                ++hits;
                for (int c = 0; c < 3; ++c) {
                    EXPECT_EQ(b.semantic_rgb.at(u, v, c), table_color(SemanticLabel::Building)[c]);
                    EXPECT_EQ(b.semantic.at(u, v, c), 2.0 * table_color(SemanticLabel::Building)[c] - 1.0);
                }
                const Vec3 entry = traj.frames[0].camera.position() + h->distance * dir;
                EXPECT_NEAR(b.depth.at(u, v), traj.frames[0].camera.depth_of(entry), 1e-6);
                EXPECT_NEAR(b.depth.at(u, v), 10.0, 1e-9);  // a fronto-parallel wall
                EXPECT_EQ(b.instance.at(u, v), -1);
                EXPECT_FALSE(b.midground.at(u, v));
            } else {
                ++misses;
                EXPECT_EQ(b.depth.at(u, v), 0.0);
                for (int c = 0; c < 3; ++c) {
                    EXPECT_EQ(b.semantic_rgb.at(u, v, c), miss_color()[c]);
                    EXPECT_EQ(b.coordinate.at(u, v, c), 0.0);
                }
                EXPECT_EQ(b.sky.at(u, v), dir.z() > 0.0);
                EXPECT_EQ(b.midground.at(u, v), dir.z() <= 0.0);
            }
        }
    EXPECT_GT(hits, 100);
    EXPECT_GT(misses, 50);
}

TEST(Render, CoordinatesConsistentAcrossFramesAndClamped) {
    SparseVoxelGrid world(Vec3::Zero(), 0.2);
    for (int j = -60; j < 60; ++j)
        for (int k = -5; k < 40; ++k) world.set({100, j, k}, kBuilding);
    world.set({1400, 0, 8}, kBuilding);  // 280 m out
    const auto traj = straight_trajectory(4, 2.0);
    RenderOptions opts;
    opts.window = 4;
    const BufferRenderer renderer(world, {}, opts);
    const auto out = renderer.render(traj);
    const Vec3 centroid = renderer.window_centroids(traj).front();
    EXPECT_NEAR(centroid.x(), 3.0, 1e-12);
    const VoxelRaycaster caster(world);
    std::map<VoxelCoord, std::vector<Vec3>> seen;
    for (std::size_t f = 0; f < out.size(); ++f) {
        const auto &cam = traj.frames[f].camera;
        for (int v = 0; v < cam.height; ++v)
            for (int u = 0; u < cam.width; ++u) {
                const auto h = caster.cast(cam.position(), cam.ray_direction(u, v), 300.0);
                if (!h) continue;
                const Vec3 expect = ((world.cell_center(h->coord) - centroid) / 100.0).cwiseMax(-1.0).cwiseMin(1.0);
                const Vec3 got(out[f].coordinate.at(u, v, 0), out[f].coordinate.at(u, v, 1), out[f].coordinate.at(u, v, 2));
                EXPECT_EQ(got, expect);
                seen[h->coord].push_back(got);
            }
    }
    int multi = 0;
    for (const auto &[c, values] : seen) {
        if (values.size() < 2) continue;
        ++multi;
        for (const auto &v : values) EXPECT_EQ(v, values.front());
    }
    EXPECT_GT(multi, 10);
    EXPECT_EQ(renderer.coordinate_value(Vec3(250.0, 0, 0) + centroid, centroid).x(), 1.0);
    EXPECT_EQ(renderer.coordinate_value(Vec3(-100.0, 0, 0) + centroid, centroid).x(), -1.0);
    EXPECT_EQ(renderer.coordinate_value(Vec3(99.5, 0, 0) + centroid, centroid).x(), 0.995);
}

TEST(Render, DynamicObjectsArePosedPerFrame) {
    SparseVoxelGrid world(Vec3::Zero(), 0.2);
    SparseVoxelGrid car(Vec3::Zero(), 0.2);
    for (int i = -5; i < 5; ++i)
        for (int j = -5; j < 5; ++j)
            for (int k = -4; k < 4; ++k) car.set({i, j, k}, SemanticVoxel(SemanticLabel::Car, 0));
    conditions::BoxTrack track;
    track.instance_id = 42;
    track.size = Vec3(2, 2, 1.6);
    track.poses = {{0.0, Vec3(10, 0, 1.6), 0.0}, {1.0, Vec3(10, 6, 1.6), M_PI / 4}};
    const DynamicObject obj{track, car};
    Trajectory traj;
    traj.frames.push_back({0.0, forward_camera(Vec3::Zero() + Vec3(0, 0, 1.6), 0.0, 32, 24, M_PI / 2)});
    traj.frames.push_back({2.0, forward_camera(Vec3::Zero() + Vec3(0, 0, 1.6), 0.0, 32, 24, M_PI / 2)});
    const auto out = render_buffers(world, {obj}, traj);
    EXPECT_EQ(out[0].instance.at(16, 12), 42);
    EXPECT_NEAR(out[0].depth.at(16, 12), 9.0, 1e-9);
    for (int c = 0; c < 3; ++c) EXPECT_EQ(out[0].semantic_rgb.at(16, 12, c), instance_color(42)[c]);
    // the track has ended at t = 2
    EXPECT_EQ(out[1].instance.at(16, 12), -1);
}

TEST(Masks, MidGround) {
    Image<double> depth(4, 3, 1, 5.0);
    Mask sky(4, 3, 1, 0), all_sky(4, 3, 1, 1);
    const Image<double> misses(4, 3, 1, 0.0);
    EXPECT_EQ(mid_ground_mask(depth, sky), Mask(4, 3, 1, 0));
    EXPECT_EQ(mid_ground_mask(misses, all_sky), Mask(4, 3, 1, 0));
    EXPECT_EQ(mid_ground_mask(misses, sky), Mask(4, 3, 1, 1));
    EXPECT_THROW(mid_ground_mask(misses, Mask(3, 3, 1, 0)), std::invalid_argument);
}

TEST(Masks, DepthPatches) {
    Image<double> depth(40, 24, 1, 3.0);
    EXPECT_EQ(mask_depth_patches(depth, 16, 0.0, 1), depth);
    EXPECT_EQ(mask_depth_patches(depth, 16, 1.0, 1), Image<double>(40, 24, 1, 0.0));
    const auto a = mask_depth_patches(depth, 16, 0.5, 3);
    EXPECT_EQ(a, mask_depth_patches(depth, 16, 0.5, 3));
    // patches are zeroed whole, including the partial ones at the edges
    for (int pv = 0; pv < 24; pv += 16)
        for (int pu = 0; pu < 40; pu += 16) {
            const double first = a.at(pu, pv);
            for (int v = pv; v < std::min(pv + 16, 24); ++v)
                for (int u = pu; u < std::min(pu + 16, 40); ++u) ASSERT_EQ(a.at(u, v), first);
        }
    // 100 x 100 patches
    Image<double> big(1600, 1600, 1, 1.0);
    const auto m = mask_depth_patches(big, 16, 0.5, 12345);
    int zeroed = 0;
    for (int pv = 0; pv < 1600; pv += 16)
        for (int pu = 0; pu < 1600; pu += 16) zeroed += m.at(pu, pv) == 0.0;
    EXPECT_NEAR(zeroed / 1e4, 0.5, 0.02);
}

TEST(BufferIo, ExportRoundTrip) {
    SparseVoxelGrid world(Vec3::Zero(), 0.2);
    for (int j = -40; j < 40; ++j)
        for (int k = 0; k < 30; ++k) world.set({50, j, k}, j < 0 ? kBuilding : SemanticVoxel(SemanticLabel::Truck, 300));
    const auto traj = straight_trajectory(1, 1.0, 24, 16);
    const auto b = render_buffers(world, {}, traj).front();
    const auto dir = std::filesystem::temp_directory_path() / "voxworld_test_buffers";
    write_buffers(dir, b, {3, traj.frames[0].t, traj.frames[0].camera, 100.0, 5});
    EXPECT_TRUE(std::filesystem::exists(dir / "depth_00003.pfm"));
    const auto back = read_buffers(dir, 3);
    EXPECT_EQ(back.instance, b.instance);
    EXPECT_EQ(back.midground, b.midground);
    EXPECT_EQ(back.sky, b.sky);
    for (std::size_t n = 0; n < b.depth.values().size(); ++n)
        EXPECT_EQ(back.depth.values()[n], static_cast<double>(static_cast<float>(b.depth.values()[n])));
    for (std::size_t n = 0; n < b.semantic.values().size(); ++n) {
        EXPECT_NEAR(back.semantic.values()[n], b.semantic.values()[n], 1.0 / 65535);
        EXPECT_NEAR(back.coordinate.values()[n], b.coordinate.values()[n], 1.0 / 65535);
    }
    EXPECT_EQ(encode_unit(-1.0), 0);
    EXPECT_EQ(encode_unit(1.0), 65535);
    EXPECT_EQ(encode_unit(0.0), 32768);
    std::filesystem::remove_all(dir);
}
