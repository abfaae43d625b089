// Copyright Contributors to the voxworld Project
// SPDX-License-Identifier: Apache-2.0

#include "helpers/oracles.hpp"

#include <voxworld/gaussians/composite.hpp>
#include <voxworld/gaussians/scene_io.hpp>
#include <voxworld/gaussians/splat.hpp>

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <numeric>
#include <random>

using namespace voxworld;
using namespace voxworld::gaussians;
using buffers::Camera;
using buffers::GuidanceBufferSet;
using buffers::Image;
using buffers::Mask;

namespace {

Camera small_camera(int w = 32, int h = 32) {
    Camera cam;
    cam.fx = cam.fy = 30.0;
    cam.cx = w / 2.0;
    cam.cy = h / 2.0;
    cam.width = w;
    cam.height = h;
    return cam;
}

GuidanceBufferSet blank_buffers(int w, int h) {
    GuidanceBufferSet b;
    b.semantic_rgb = Image<double>(w, h, 3, 0.0);
    b.semantic = Image<double>(w, h, 3, 0.0);
    b.coordinate = Image<double>(w, h, 3, 0.0);
    b.depth = Image<double>(w, h, 1, 0.0);
    b.instance = Image<std::int32_t>(w, h, 1, -1);
    b.sky = Mask(w, h, 1, 0);
    b.midground = Mask(w, h, 1, 0);
    return b;
}

Gaussian3D random_gaussian(std::mt19937_64 &rng) {
    std::uniform_real_distribution<double> U(-1.0, 1.0), S(0.05, 0.6), O(0.0, 1.0);
    Gaussian3D g;
    g.position = Vec3(2.0 * U(rng), 2.0 * U(rng), 6.0 + 3.0 * U(rng));
    g.rotation = Quat(U(rng), U(rng), U(rng), U(rng)).normalized();
    g.scale = Vec3(S(rng), S(rng), S(rng));
    g.opacity = O(rng);
    g.color = Vec3(O(rng), O(rng), O(rng));
    return g;
}

conditions::BoxTrack moving_track(std::int32_t id) {
    conditions::BoxTrack track;
    track.instance_id = id;
    track.size = Vec3(4.0, 2.0, 1.5);
    track.poses = {{0.0, Vec3(10, 0, 0.75), 0.0}, {1.0, Vec3(14, 3, 0.75), 0.6}, {2.0, Vec3(16, 8, 0.9), 1.4}};
    return track;
}

double max_position_error(const std::vector<PosedGaussian> &a, const std::vector<PosedGaussian> &b) {
    EXPECT_EQ(a.size(), b.size());
    double err = 0.0;
    for (std::size_t n = 0; n < std::min(a.size(), b.size()); ++n)
        err = std::max(err, (a[n].gaussian.position - b[n].gaussian.position).norm());
    return err;
}

// Straight loops over matrix entries, no Eigen products.
std::vector<double> scalar_sky_eval(const SkyModelParams &p, const Eigen::VectorXd &c, const Vec3 &d) {
    const int D = kSkyDim;
    std::vector<double> f;
    f.push_back(d.x()), f.push_back(d.y()), f.push_back(d.z());
    for (int l = 0; l < 4; ++l) {
        const double w = M_PI * (1 << l);
        for (int a = 0; a < 3; ++a) f.push_back(std::sin(w * d[a]));
        for (int a = 0; a < 3; ++a) f.push_back(std::cos(w * d[a]));
    }
    std::vector<double> x(D);
    for (int i = 0; i < D; ++i) {
        double s = p.embed_b[i];
        for (std::size_t j = 0; j < f.size(); ++j) s += p.embed_w(i, static_cast<int>(j)) * f[j];
        x[i] = s;
    }
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= D;
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= D;
    for (double &v : x) v = (v - mean) / std::sqrt(var + 1e-6);
    for (int i = 0; i < D; ++i) {
        double sc = p.scale_b[i], sh = p.shift_b[i];
        for (int j = 0; j < D; ++j) sc += p.scale_w(i, j) * c[j], sh += p.shift_w(i, j) * c[j];
        x[i] = x[i] * (1.0 + sc) + sh;
    }
    std::vector<double> rgb(3);
    for (int k = 0; k < 3; ++k) {
        double s = p.out_b[k];
        for (int i = 0; i < D; ++i) s += p.out_w(k, i) * x[i];
        rgb[k] = s;
    }
    return rgb;
}

SkyPatch random_patch(std::mt19937_64 &rng) {
    std::uniform_real_distribution<double> U(0.0, 1.0);
    SkyPatch p;
    p.pixels = Eigen::VectorXd(kSkyPatchValues);
    for (int i = 0; i < kSkyPatchValues; ++i) p.pixels[i] = U(rng);
    p.direction = Vec3(U(rng) - 0.5, U(rng) - 0.5, U(rng)).normalized();
    return p;
}

class RecordingPredictor final : public AttributePredictor {
  public:
    HeuristicPredictor inner;
    std::vector<std::size_t> pixel_frames;
    std::size_t voxel_calls = 0;

    VoxelGaussianParams predict_voxels(const SparseVoxelGrid &grid, std::span<const PredictorFrame> frames) override {
        ++voxel_calls;
        return inner.predict_voxels(grid, frames);
    }
    PixelGaussianParams predict_pixels(const PredictorFrame &frame) override {
        pixel_frames.push_back(frame.index);
        return inner.predict_pixels(frame);
    }
};

} // namespace

TEST(DepthParameterization, RawZeroIsMidpoint) {
    EXPECT_EQ(depth_from_raw(0.0), 150.25);
    EXPECT_NEAR(depth_from_raw(-60.0), kZNear, 1e-12);
    EXPECT_NEAR(depth_from_raw(60.0), kZFar, 1e-12);
}

TEST(DepthParameterization, StrictlyMonotoneSweep) {
    double prev = -1.0;
    for (int n = 0; n < 1000; ++n) {
        const double raw = -20.0 + 40.0 * n / 999.0;
        const double z = depth_from_raw(raw);
        EXPECT_GT(z, kZNear);
        EXPECT_LT(z, kZFar);
        EXPECT_GT(z, prev) << "raw " << raw;
        prev = z;
    }
}

TEST(DepthParameterization, HeuristicRoundTrip) {
    const Camera cam = small_camera(16, 12);
    auto buf = blank_buffers(16, 12);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> Z(0.6, 299.0);
    for (auto &z : buf.depth.values()) z = Z(rng);
    buf.depth.at(8, 6) = 150.25;
    buf.depth.at(0, 0) = 0.0;
    const Image<double> image(16, 12, 3, 0.5);
    const PredictorFrame frame{0, {0.0, cam}, &buf, &image};
    HeuristicPredictor h;
    const auto params = h.predict_pixels(frame);
    const auto gs = decode_pixel_gaussians(params, cam);
    ASSERT_EQ(gs.size(), 16u * 12u * 2u);
    double worst = 0.0;
    for (int v = 0; v < 12; ++v)
        for (int u = 0; u < 16; ++u)
            for (int k = 0; k < 2; ++k) {
                const Vec3 p = gs[(static_cast<std::size_t>(v) * 16 + u) * 2 + k].position;
                const double expect = buf.depth.at(u, v) > 0.0 ? buf.depth.at(u, v) : 150.25;
                worst = std::max(worst, std::abs(cam.depth_of(p) - expect));
                const double dist = expect * cam.camera_direction(u, v).norm();
                worst = std::max(worst, std::abs((p - cam.position()).norm() - dist));
            }
    EXPECT_LE(worst, 1e-6);
}

TEST(Decode, VoxelChannelAccounting) {
    SparseVoxelGrid grid(Vec3::Zero(), 0.1);
    for (int i = 0; i < 5; ++i) grid.set({i, 2 * i, -i}, SemanticVoxel(SemanticLabel::Building));
    VoxelGaussianParams params{std::vector<double>(5 * 56, 0.0)};
    const auto gs = decode_voxel_gaussians(grid, params);
    ASSERT_EQ(gs.size(), 20u);
    std::size_t n = 0;
    for (const auto &[c, v] : grid)
        for (int k = 0; k < 4; ++k) {
            EXPECT_EQ(gs[n].position, grid.cell_center(c));
            EXPECT_DOUBLE_EQ(gs[n].opacity, 0.5);
            EXPECT_EQ(gs[n].rotation.coeffs(), Quat::Identity().coeffs());
            ++n;
        }
    params.values[11] = 1e3;  // first Gaussian, +x offset saturates to one cell
    const auto sat = decode_voxel_gaussians(grid, params);
    EXPECT_NEAR(sat[0].position.x() - grid.cell_center((*grid.begin()).first).x(), 0.1, 1e-12);
    params.values.pop_back();
    EXPECT_THROW(decode_voxel_gaussians(grid, params), std::invalid_argument);
}

TEST(Decode, PixelChannelAccountingAndCentralRay) {
    Camera cam = small_camera(4, 2);
    cam.cx = 0.5;  // pixel (0, 0) center lies on the optical axis
    cam.cy = 0.5;
    cam.pose = yaw_pose(Vec3(1, 2, 3), 0.4);
    PixelGaussianParams params(4, 2, 24, 0.0);
    const auto gs = decode_pixel_gaussians(params, cam);
    ASSERT_EQ(gs.size(), 16u);
    EXPECT_NEAR((gs[0].position - cam.position()).norm(), 150.25, 1e-9);
    EXPECT_THROW(decode_pixel_gaussians(PixelGaussianParams(4, 2, 23, 0.0), cam), std::invalid_argument);
}

TEST(Decode, Activations) {
    const double zero_quat[] = {0, 0, 0, 0};
    EXPECT_EQ(activate_rotation(zero_quat).coeffs(), Quat::Identity().coeffs());
    const double q[] = {1, 2, 3, 4};
    EXPECT_NEAR(activate_rotation(q).norm(), 1.0, 1e-12);
    const double s[] = {-100, 0, 100};
    const Vec3 sc = activate_scale(s);
    EXPECT_EQ(sc.x(), kScaleMin);
    EXPECT_EQ(sc.y(), 1.0);
    EXPECT_EQ(sc.z(), kScaleMax);
}

TEST(Heuristic, GrayImageAndEmptyGrid) {
    const Camera cam = small_camera(8, 8);
    auto buf = blank_buffers(8, 8);
    const Image<double> gray(8, 8, 3, 0.5);
    const PredictorFrame frame{0, {0.0, cam}, &buf, &gray};
    HeuristicPredictor h;
    for (const auto &g : decode_pixel_gaussians(h.predict_pixels(frame), cam)) {
        EXPECT_NEAR((g.color - Vec3::Constant(0.5)).norm(), 0.0, 1e-12);
        EXPECT_NEAR(g.opacity, 0.9, 1e-12);
    }
    const SparseVoxelGrid empty(Vec3::Zero(), 0.1);
    EXPECT_TRUE(h.predict_voxels(empty, std::span(&frame, 1)).values.empty());
}

TEST(Heuristic, VoxelTakesVisiblePixelColor) {
    const Camera cam = small_camera(16, 16);
    SparseVoxelGrid grid(Vec3::Zero(), 0.1);
    const VoxelCoord seen{0, 0, 50};     // center (0.05, 0.05, 5.05) projects near the image center
    const VoxelCoord hidden{0, 0, 100};  // same pixel, 5 m behind the visible surface
    grid.set(seen, SemanticVoxel(SemanticLabel::Building));
    grid.set(hidden, SemanticVoxel(SemanticLabel::Building));
    auto buf = blank_buffers(16, 16);
    const auto uvz = cam.project(grid.cell_center(seen));
    ASSERT_TRUE(uvz);
    buf.depth.at(static_cast<int>((*uvz)[0]), static_cast<int>((*uvz)[1])) = (*uvz)[2];
    Image<double> image(16, 16, 3, 0.2);
    const PredictorFrame frame{0, {0.0, cam}, &buf, &image};
    HeuristicPredictor h;
    const auto gs = decode_voxel_gaussians(grid, h.predict_voxels(grid, std::span(&frame, 1)));
    ASSERT_EQ(gs.size(), 8u);
    EXPECT_NEAR(gs[0].color.x(), 0.2, 1e-9);  // seen voxel sorts first
    EXPECT_NEAR(gs[4].color.x(), 0.5, 1e-9);  // hidden voxel falls back to gray
    EXPECT_NEAR(gs[0].scale.x(), 0.07, 1e-12);
}

TEST(Sky, IdentityModulation) {
    SkyModelParams p = SkyModelParams::random(3);
    p.scale_w.setZero(), p.scale_b.setZero(), p.shift_w.setZero(), p.shift_b.setZero();
    const Eigen::VectorXd c = Eigen::VectorXd::Random(kSkyDim);
    const Vec3 d = Vec3(0.3, -0.2, 0.9).normalized();
    const Vec3 expect = p.out_w * layer_norm(p.embed_w * direction_features(d) + p.embed_b) + p.out_b;
    EXPECT_NEAR((sky_eval(p, c, d) - expect).norm(), 0.0, 1e-12);
}

TEST(Sky, MatchesScalarReimplementation) {
    const SkyModelParams p = SkyModelParams::random(11);
    std::mt19937_64 rng(2);
    std::normal_distribution<double> N(0.0, 1.0);
    Eigen::VectorXd c(kSkyDim);
    for (int i = 0; i < kSkyDim; ++i) c[i] = N(rng);
    Vec3 first = Vec3::Zero();
    for (int trial = 0; trial < 20; ++trial) {
        const Vec3 d = Vec3(N(rng), N(rng), N(rng)).normalized();
        const Vec3 lib = sky_eval(p, c, d);
        const auto ref = scalar_sky_eval(p, c, d);
        EXPECT_TRUE(lib.allFinite());
        for (int k = 0; k < 3; ++k) EXPECT_NEAR(lib[k], ref[k], 1e-9);
        if (trial == 0) first = lib;
        else EXPECT_GT((lib - first).norm(), 1e-6);
        EXPECT_EQ(sky_eval(p, c, d), lib);
    }
}

TEST(Sky, EncoderEmptySingleAndPermutation) {
    const SkyModelParams p = SkyModelParams::random(4);
    EXPECT_EQ(sky_encode(p, {}), p.query);
    std::mt19937_64 rng(9);
    std::vector<SkyPatch> patches{random_patch(rng), random_patch(rng), random_patch(rng)};

    const SkyPatch &one = patches[0];
    const Eigen::VectorXd token = p.patch_w * one.pixels + p.patch_b + p.pos_w * direction_features(one.direction);
    const Eigen::VectorXd single = p.query + p.wo * (p.wv * token);
    EXPECT_NEAR((sky_encode(p, {one}) - single).norm(), 0.0, 1e-9);

    const Eigen::VectorXd base = sky_encode(p, patches);
    std::vector<int> order{0, 1, 2};
    int count = 0;
    do {
        std::vector<SkyPatch> permuted;
        for (int i : order) permuted.push_back(patches[static_cast<std::size_t>(i)]);
        EXPECT_NEAR((sky_encode(p, permuted) - base).norm(), 0.0, 1e-9);
        ++count;
    } while (std::next_permutation(order.begin(), order.end()));
    EXPECT_EQ(count, 6);
}

TEST(Sky, PatchesNeedSkyMajority) {
    const Camera cam = small_camera(16, 8);
    const Image<double> image(16, 8, 3, 0.7);
    Mask sky(16, 8, 1, 0);
    for (int v = 0; v < 8; ++v)
        for (int u = 0; u < 8; ++u) sky.at(u, v) = 1;  // left patch all sky
    for (int v = 0; v < 4; ++v)
        for (int u = 8; u < 16; ++u) sky.at(u, v) = 1;  // right patch exactly half
    const auto patches = sky_patches(image, sky, cam);
    ASSERT_EQ(patches.size(), 1u);
    EXPECT_NEAR(patches[0].pixels.sum(), 0.7 * 192, 1e-9);
    EXPECT_NEAR(patches[0].direction.norm(), 1.0, 1e-12);
}

TEST(Sky, FallbackIsGradient) {
    SkyState s;
    EXPECT_NEAR((s.color(Vec3::UnitZ()) - Vec3(0.30, 0.50, 0.85)).norm(), 0.0, 1e-12);
    EXPECT_NEAR((s.color(Vec3::UnitX()) - Vec3(0.85, 0.90, 0.95)).norm(), 0.0, 1e-12);
}

TEST(Extraction, MovingBoxRoundTrip) {
    const auto track = moving_track(7);
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    std::vector<Gaussian3D> canonical;
    for (int n = 0; n < 8; ++n) {
        Gaussian3D g;
        g.position = Vec3(1.9 * U(rng), 0.9 * U(rng), 0.7 * U(rng));
        g.rotation = Quat(U(rng), U(rng), U(rng), U(rng)).normalized();
        canonical.push_back(g);
    }
    std::vector<FrameGaussians> frames;
    for (double t : {0.0, 0.35, 1.0, 1.8}) {
        FrameGaussians f{t, {}, Image<std::int32_t>(4, 1, 1, 7)};
        const Rigid pose = *track_pose(track, t);
        for (const auto &g : canonical) f.gaussians.push_back(g.transformed(pose));
        frames.push_back(std::move(f));
    }
    frames[1].instance.at(0, 0) = 3;  // two Gaussians of another object
    const auto out = extract_dynamic_object(frames, track);
    ASSERT_EQ(out.size(), 4 * canonical.size() - 2);
    std::size_t n = 0;
    for (std::size_t f = 0; f < frames.size(); ++f)
        for (std::size_t k = 0; k < canonical.size(); ++k) {
            if (f == 1 && k < 2) continue;
            EXPECT_LE((out[n].position - canonical[k].position).norm(), 1e-6);
            EXPECT_LE(out[n].rotation.angularDistance(canonical[k].rotation), 1e-9);
            ++n;
        }
    conditions::BoxTrack other = track;
    other.instance_id = 99;
    EXPECT_TRUE(extract_dynamic_object(frames, other).empty());
}

TEST(Extraction, DropsGaussiansOutsideDilatedBox) {
    conditions::BoxTrack track;
    track.instance_id = 1;
    track.size = Vec3(2, 2, 2);
    track.poses = {{0.0, Vec3::Zero(), 0.0}};
    FrameGaussians f{0.0, std::vector<Gaussian3D>(2), Image<std::int32_t>(1, 1, 1, 1)};
    f.gaussians[0].position = Vec3(1.04, 0, 0);
    f.gaussians[1].position = Vec3(1.06, 0, 0);
    const auto out = extract_dynamic_object(std::span(&f, 1), track);
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(out[0].position.x(), 1.04);
}

TEST(TransformDynamic, TranslateComposeAndUnknown) {
    GaussianScene scene;
    std::mt19937_64 rng(8);
    scene.static_gaussians = {random_gaussian(rng)};
    GaussianObject obj{7, {random_gaussian(rng), random_gaussian(rng)}, moving_track(7)};
    for (auto &g : obj.canonical) g.position *= 0.2;
    scene.objects.push_back(obj);

    for (double t : {0.0, 0.5, 1.7}) {
        const auto before = posed_gaussians(scene, t);
        const auto same = posed_gaussians(transform_dynamic(scene, 7, scene.objects[0].track), t);
        EXPECT_EQ(max_position_error(before, same), 0.0);
        const auto moved = posed_gaussians(transform_dynamic(scene, 7, move_track(obj.track, Vec3(5, 0, 0), 0.0)), t);
        ASSERT_EQ(moved.size(), before.size());
        EXPECT_EQ(moved[0].gaussian.position, before[0].gaussian.position);
        for (std::size_t n = 1; n < moved.size(); ++n)
            EXPECT_LE((moved[n].gaussian.position - before[n].gaussian.position - Vec3(5, 0, 0)).norm(), 1e-9);
    }

    // two planar motions applied in turn equal their composed transform applied once
    const Rigid a = yaw_pose(Vec3(1, -2, 0.5), 0.7), b = yaw_pose(Vec3(-3, 0.5, 0), -1.9);
    const Rigid ab = b * a;
    const double ab_yaw = std::atan2(ab.linear()(1, 0), ab.linear()(0, 0));
    const auto twice = move_track(move_track(obj.track, a.translation(), 0.7), b.translation(), -1.9);
    const auto once = move_track(obj.track, ab.translation(), ab_yaw);
    for (double t : {0.0, 0.8, 2.0}) {
        const auto p2 = posed_gaussians(transform_dynamic(scene, 7, twice), t);
        const auto p1 = posed_gaussians(transform_dynamic(scene, 7, once), t);
        EXPECT_LE(max_position_error(p1, p2), 1e-9);
        const auto base = posed_gaussians(scene, t);
        for (std::size_t n = 1; n < base.size(); ++n)
            EXPECT_LE((ab * base[n].gaussian.position - p1[n].gaussian.position).norm(), 1e-9);
    }
    EXPECT_THROW(transform_dynamic(scene, 8, obj.track), UnknownInstance);
}

TEST(Splat, MatchesPerPixelOracle) {
    std::mt19937_64 rng(1234);
    std::vector<Gaussian3D> gs;
    for (int n = 0; n < 100; ++n) gs.push_back(random_gaussian(rng));
    Camera cam = small_camera(32, 32);
    cam.pose = Rigid::Identity();
    cam.pose.linear() = Eigen::AngleAxisd(0.05, Vec3::UnitY()).toRotationMatrix();
    const SkyState sky;
    const auto img = render_gaussians(gs, cam, sky);
    std::vector<oracle::SplatGaussian> ref;
    for (const auto &g : gs) ref.push_back({g.position, g.covariance(), g.opacity, g.color});
    double worst = 0.0;
    int covered = 0;
    for (int v = 0; v < 32; ++v)
        for (int u = 0; u < 32; ++u) {
            covered += img.alpha.at(u, v) > 0.5;
            const auto px = oracle::splat_pixel(ref, cam.pose, cam.fx, cam.fy, cam.cx, cam.cy, u, v,
                                                sky.color(cam.ray_direction(u, v)));
            for (int c = 0; c < 3; ++c) worst = std::max(worst, std::abs(img.rgb.at(u, v, c) - px.rgb[c]));
            worst = std::max(worst, std::abs(img.alpha.at(u, v) - px.alpha));
            worst = std::max(worst, std::abs(img.depth.at(u, v) - px.depth));
            EXPECT_GE(img.alpha.at(u, v), 0.0);
            EXPECT_LE(img.alpha.at(u, v), 1.0);
        }
    EXPECT_LE(worst, 1e-6);
    EXPECT_GT(covered, 256);
}

TEST(Splat, EmptySceneIsSky) {
    const Camera cam = small_camera(8, 8);
    GaussianScene scene;
    const auto img = render_splats(scene, cam, 0.0);
    for (int v = 0; v < 8; ++v)
        for (int u = 0; u < 8; ++u) {
            const Vec3 s = scene.sky.color(cam.ray_direction(u, v));
            for (int c = 0; c < 3; ++c) EXPECT_EQ(img.rgb.at(u, v, c), s[c]);
            EXPECT_EQ(img.alpha.at(u, v), 0.0);
        }
}

TEST(Splat, OcclusionAndZeroOpacity) {
    const Camera cam = small_camera(16, 16);
    Gaussian3D front, back;
    front.position = cam.position() + 4.0 * cam.ray_direction(8, 8);
    front.scale = Vec3::Constant(0.5);
    front.opacity = 1.0;
    front.color = Vec3(1, 0, 0);
    back = front;
    back.position = cam.position() + 9.0 * cam.ray_direction(8, 8);
    back.color = Vec3(0, 0, 1);
    GaussianScene scene;
    // alpha is capped at 0.99 per splat, so the opaque front surface is three coincident splats
    scene.static_gaussians = {back, front, front, front};
    const auto img = render_splats(scene, cam, 0.0);
    EXPECT_NEAR(img.rgb.at(8, 8, 0), 1.0, 1e-3);
    EXPECT_NEAR(img.rgb.at(8, 8, 2), 0.0, 1e-3);
    Gaussian3D ghost = front;
    ghost.position.z() -= 1.0;
    ghost.opacity = 0.0;
    scene.static_gaussians.push_back(ghost);
    const auto again = render_splats(scene, cam, 0.0);
    EXPECT_EQ(again.rgb, img.rgb);
    EXPECT_EQ(again.alpha, img.alpha);
}

TEST(Composite, PixelBranchEveryFourthFrame) {
    const Camera cam = small_camera(8, 8);
    auto buf = blank_buffers(8, 8);
    const Image<double> image(8, 8, 3, 0.4);
    std::vector<PredictorFrame> frames;
    for (std::size_t n = 0; n < 12; ++n) frames.push_back({n, {0.1 * n, cam}, &buf, &image});
    SparseVoxelGrid world(Vec3::Zero(), 0.2);
    world.set({3, 0, 0}, SemanticVoxel(SemanticLabel::Building));
    RecordingPredictor pred;
    const auto scene = composite_scene(world, frames, pred, {});
    EXPECT_EQ(pred.pixel_frames, (std::vector<std::size_t>{0, 4, 8}));
    EXPECT_EQ(pred.voxel_calls, 1u);
    // no mid-ground and no objects: static = voxel branch only, 8 children x 4 Gaussians
    EXPECT_EQ(scene.static_gaussians.size(), 32u);
    EXPECT_TRUE(scene.objects.empty());
}

TEST(Composite, MidgroundOnlyAndDynamicExtraction) {
    const Camera cam = small_camera(8, 8);
    auto buf = blank_buffers(8, 8);
    for (auto &m : buf.midground.values()) m = 1;
    const Image<double> image(8, 8, 3, 0.4);
    const std::vector<PredictorFrame> frames{{0, {0.0, cam}, &buf, &image}};
    HeuristicPredictor pred;
    const SparseVoxelGrid empty(Vec3::Zero(), 0.2);
    const auto scene = composite_scene(empty, frames, pred, {});
    EXPECT_EQ(scene.static_gaussians.size(), 128u);

    // a tracked car: its voxels leave the static grid, its pixels go to the object
    SparseVoxelGrid world(Vec3::Zero(), 0.2);
    world.set({0, 0, 0}, SemanticVoxel(SemanticLabel::Building));
    world.set({0, 0, 25}, SemanticVoxel(SemanticLabel::Car, 5));
    world.set({1, 0, 25}, SemanticVoxel(SemanticLabel::Car, 6));  // untracked id stays static
    conditions::BoxTrack track;
    track.instance_id = 5;
    track.size = Vec3(2, 2, 2);
    track.poses = {{0.0, Vec3(0, 0, 5), 0.0}};
    auto car_buf = blank_buffers(8, 8);
    for (int v = 3; v < 5; ++v)
        for (int u = 3; u < 5; ++u) car_buf.instance.at(u, v) = 5, car_buf.depth.at(u, v) = 5.0;
    const std::vector<PredictorFrame> car_frames{{0, {0.0, cam}, &car_buf, &image}};
    const auto tracks = std::vector<conditions::BoxTrack>{track};
    const auto s2 = composite_scene(world, car_frames, pred, tracks);
    EXPECT_EQ(s2.static_gaussians.size(), 2u * 8u * 4u);
    ASSERT_EQ(s2.objects.size(), 1u);
    EXPECT_EQ(s2.objects[0].instance_id, 5);
    EXPECT_EQ(s2.objects[0].canonical.size(), 8u);
    for (const auto &g : s2.objects[0].canonical) EXPECT_NEAR(g.position.z(), 0.0, 1e-9);
}

TEST(Composite, SkyVectorFromFirstFrame) {
    const Camera cam = small_camera(8, 8);
    auto buf = blank_buffers(8, 8);
    for (auto &s : buf.sky.values()) s = 1;
    const Image<double> image(8, 8, 3, 0.6);
    const std::vector<PredictorFrame> frames{{0, {0.0, cam}, &buf, &image}};
    HeuristicPredictor pred;
    const auto params = SkyModelParams::random(1);
    const auto scene = composite_scene(SparseVoxelGrid(Vec3::Zero(), 0.2), frames, pred, {}, params);
    ASSERT_TRUE(scene.sky.params);
    EXPECT_NEAR((scene.sky.c - sky_encode(params, sky_patches(image, buf.sky, cam))).norm(), 0.0, 1e-12);
    EXPECT_NE(scene.sky.c, params.query);
}

TEST(SceneIo, PlyAndManifestRoundTrip) {
    std::mt19937_64 rng(77);
    GaussianScene scene;
    for (int n = 0; n < 10; ++n) scene.static_gaussians.push_back(random_gaussian(rng));
    scene.objects.push_back({4, {random_gaussian(rng)}, moving_track(4)});
    scene.sky.params = SkyModelParams::random(2);
    scene.sky.c = Eigen::VectorXd::LinSpaced(kSkyDim, -1.0, 1.0);
    const auto dir = std::filesystem::temp_directory_path() / "voxworld_scene_io_test";
    std::filesystem::remove_all(dir);
    save_scene(dir, scene);
    const auto back = load_scene(dir);
    ASSERT_EQ(back.static_gaussians.size(), 10u);
    for (std::size_t n = 0; n < 10; ++n) {
        const auto &a = scene.static_gaussians[n], &b = back.static_gaussians[n];
        EXPECT_LE((a.position - b.position).norm(), 1e-5);
        EXPECT_LE((a.scale - b.scale).norm(), 1e-6);
        EXPECT_LE((a.color - b.color).norm(), 1e-6);
        EXPECT_NEAR(a.opacity, b.opacity, 1e-6);
        EXPECT_LE(a.rotation.angularDistance(b.rotation), 1e-6);
    }
    ASSERT_EQ(back.objects.size(), 1u);
    EXPECT_EQ(back.objects[0].track.poses.size(), 3u);
    ASSERT_TRUE(back.sky.params);
    EXPECT_EQ(back.sky.c, scene.sky.c);
    EXPECT_EQ(back.sky.params->wq, scene.sky.params->wq);
    const auto bytes = io::read_file(dir / "static.ply");
    const std::string head(bytes.begin(), bytes.begin() + 40);
    EXPECT_EQ(head.rfind("ply\nformat binary_little_endian 1.0\n", 0), 0u);
    std::filesystem::remove_all(dir);
}

TEST(ExternalPredictor, ReadsFileExchange) {
    const auto dir = std::filesystem::temp_directory_path() / "voxworld_external_predictor_test";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    const Camera cam = small_camera(4, 4);
    auto buf = blank_buffers(4, 4);
    const Image<double> image(4, 4, 3, 0.5);
    const PredictorFrame frame{3, {0.0, cam}, &buf, &image};
    PixelGaussianParams px(4, 4, 24, 0.25);
    write_pixel_params(dir, 3, px);
    SparseVoxelGrid grid(Vec3::Zero(), 0.1);
    grid.set({0, 0, 0}, SemanticVoxel(SemanticLabel::Road));
    write_voxel_params(dir, VoxelGaussianParams{std::vector<double>(56, -0.5)});
    ExternalPredictor ext(dir);
    EXPECT_EQ(ext.predict_pixels(frame), px);
    EXPECT_EQ(ext.predict_voxels(grid, std::span(&frame, 1)).values, std::vector<double>(56, -0.5));
    const PredictorFrame missing{4, {0.0, cam}, &buf, &image};
    EXPECT_THROW(ext.predict_pixels(missing), FormatError);
    grid.set({1, 0, 0}, SemanticVoxel(SemanticLabel::Road));
    EXPECT_THROW(ext.predict_voxels(grid, std::span(&frame, 1)), FormatError);
    EXPECT_THROW(ExternalPredictor(dir / "nope"), ConfigError);
    std::filesystem::remove_all(dir);
}
