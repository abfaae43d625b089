// Copyright Contributors to the voxworld Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Stages behind the CLI verbs that read or write image files.

#include "voxworld/buffers/buffer_io.hpp"
#include "voxworld/gaussians/composite.hpp"
#include "voxworld/gaussians/scene_io.hpp"
#include "voxworld/lidar/lidar.hpp"
#include "voxworld/scene/bundle.hpp"
#include "voxworld/scene/drive.hpp"

#include <regex>

namespace voxworld::scene {

/// Renders guidance buffers for a trajectory through the bundle world, with every track drawn as a
/// Car box, and writes them to `out`. Returns the number of frames written.
inline std::size_t render_bundle_buffers(const Bundle &bundle, const buffers::Trajectory &traj,
                                         const buffers::RenderOptions &opts, const std::filesystem::path &out) {
    traj.validate();
    const double vs = bundle.world.empty() ? 0.2 : bundle.world.voxel_size();
    const buffers::BufferRenderer renderer(bundle.world, box_objects(bundle.tracks, vs), opts);
    const auto centroids = renderer.window_centroids(traj);
    for (std::size_t n = 0; n < traj.frames.size(); ++n) {
        const int w = static_cast<int>(n / static_cast<std::size_t>(opts.window));
        const auto set = renderer.render_frame(traj.frames[n], centroids[static_cast<std::size_t>(w)], w);
        buffers::write_buffers(out, set, {n, traj.frames[n].t, traj.frames[n].camera, opts.normalization, bundle.seed});
    }
    return traj.frames.size();
}

/// Sorted frame indices with a frame_NNNNN.json sidecar in `dir`.
inline std::vector<std::size_t> list_buffer_frames(const std::filesystem::path &dir) {
    if (!std::filesystem::is_directory(dir)) throw ConfigError("buffer directory does not exist: " + dir.string());
    static const std::regex pattern(R"(frame_(\d{5,})\.json)");
    std::vector<std::size_t> out;
    for (const auto &entry : std::filesystem::directory_iterator(dir)) {
        std::smatch m;
        const auto name = entry.path().filename().string();
        if (std::regex_match(name, m, pattern)) out.push_back(std::stoul(m[1].str()));
    }
    std::sort(out.begin(), out.end());
    return out;
}

inline buffers::TimedCamera read_frame_camera(const std::filesystem::path &dir, std::size_t n) {
    try {
        const auto j = nlohmann::json::parse(io::read_text_file(dir / buffers::frame_file("frame", n, "json")));
        return {j.at("t").get<double>(), buffers::camera_from_json(j.at("camera"))};
    } catch (const nlohmann::json::exception &e) {
        throw FormatError(std::string("invalid frame sidecar: ") + e.what());
    }
}

/// 8- or 16-bit RGB image scaled to [0, 1].
inline buffers::Image<double> read_rgb_image(const std::filesystem::path &path) {
    const cv::Mat mat = buffers::detail::imread_checked(path, cv::IMREAD_UNCHANGED);
    if (mat.channels() != 3 || (mat.depth() != CV_8U && mat.depth() != CV_16U)) {
        throw FormatError("expected an 8- or 16-bit RGB image: " + path.string());
    }
    const double scale = mat.depth() == CV_8U ? 255.0 : 65535.0;
    buffers::Image<double> img(mat.cols, mat.rows, 3);
    for (int v = 0; v < mat.rows; ++v)
        for (int u = 0; u < mat.cols; ++u)
            for (int c = 0; c < 3; ++c) {
                const double x = mat.depth() == CV_8U ? mat.at<cv::Vec3b>(v, u)[2 - c] : mat.at<cv::Vec3w>(v, u)[2 - c];
                img.at(u, v, c) = x / scale;
            }
    return img;
}

struct ComposeInputs {
    std::filesystem::path buffers_dir;
    /// Directory of image_NNNNN.png captures; frames without one use the semantic colors.
    std::optional<std::filesystem::path> images_dir;
    std::optional<gaussians::SkyModelParams> sky;
    gaussians::CompositeOptions options;
};

/// Builds a Gaussian scene from the bundle world and previously exported buffers.
inline gaussians::GaussianScene compose_bundle(const Bundle &bundle, const ComposeInputs &in,
                                               gaussians::AttributePredictor &predictor) {
    const auto indices = list_buffer_frames(in.buffers_dir);
    std::vector<buffers::GuidanceBufferSet> sets;
    std::vector<buffers::Image<double>> images;
    std::vector<gaussians::PredictorFrame> frames;
    sets.reserve(indices.size());
    images.reserve(indices.size());
    for (const auto n : indices) {
        sets.push_back(buffers::read_buffers(in.buffers_dir, n));
        const auto image_path = in.images_dir ? *in.images_dir / buffers::frame_file("image", n, "png") : std::filesystem::path{};
        images.push_back(in.images_dir && std::filesystem::exists(image_path) ? read_rgb_image(image_path) : sets.back().semantic_rgb);
    }
    for (std::size_t k = 0; k < indices.size(); ++k) {
        frames.push_back({indices[k], read_frame_camera(in.buffers_dir, indices[k]), &sets[k], &images[k]});
    }
    return gaussians::composite_scene(bundle.world, frames, predictor, bundle.tracks, in.sky, in.options);
}

/// LiDAR sensor frame (x forward, y left, z up) of a camera built by forward_camera.
inline Rigid sensor_pose_of(const buffers::Camera &cam) {
    Mat3 body_from_cam;
    body_from_cam << 0, 0, 1, -1, 0, 0, 0, -1, 0;
    Rigid pose = Rigid::Identity();
    pose.linear() = cam.pose.linear() * body_from_cam.transpose();
    pose.translation() = cam.pose.translation();
    return pose;
}

/// One point cloud per trajectory frame, written as points_NNNNN.ply. Returns total returns.
inline std::size_t simulate_lidar(const gaussians::GaussianScene &scene, const buffers::Trajectory &traj,
                                  const lidar::LidarPattern &pattern, const std::filesystem::path &out) {
    traj.validate();
    const lidar::LidarSimulator sim(scene, pattern);
    std::size_t total = 0;
    for (std::size_t n = 0; n < traj.frames.size(); ++n) {
        const auto &f = traj.frames[n];
        const auto returns = sim.scan(sensor_pose_of(f.camera), f.t);
        io::write_file(out / buffers::frame_file("points", n, "ply"), lidar::encode_point_cloud(returns));
        total += returns.size();
    }
    return total;
}

/// Static Gaussians plus every object posed at time t, in one 3DGS point list.
inline std::vector<std::uint8_t> export_scene_ply(const gaussians::GaussianScene &scene, double t) {
    std::size_t count = scene.static_gaussians.size();
    for (const auto &obj : scene.objects)
        if (gaussians::track_pose(obj.track, t)) count += obj.canonical.size();
    const auto header = gaussians::gaussian_ply_header(count);
    io::ByteWriter w;
    w.reserve(header.size() + count * gaussians::kGaussianPlyProperties.size() * sizeof(float));
    w.put_string(header);
    for (const auto &g : scene.static_gaussians) gaussians::put_gaussian_row(w, g);
    for (const auto &obj : scene.objects) {
        const auto pose = gaussians::track_pose(obj.track, t);
        if (!pose) continue;
        for (const auto &g : obj.canonical) gaussians::put_gaussian_row(w, g.transformed(*pose));
    }
    return w.take();
}

} // namespace voxworld::scene
