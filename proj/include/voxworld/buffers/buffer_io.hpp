// Copyright Contributors to the voxworld Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Guidance buffer export. Per frame NNNNN in the output directory:
//   semantic_NNNNN.png    16-bit RGB, u16 = round((x + 1) / 2 * 65535) for x in [-1, 1]
//   coordinate_NNNNN.png  16-bit RGB, same mapping
//   depth_NNNNN.pfm       32-bit float, meters, 0 = no hit
//   instance_NNNNN.png    16-bit gray, instance id + 1, 0 = none
//   midground_NNNNN.png   8-bit gray, 255 = mid-ground
//   sky_NNNNN.png         8-bit gray, 255 = sky
//   frame_NNNNN.json      camera, timestamp, window index and centroid, K, seed, encodings

#include "voxworld/buffers/render.hpp"
#include "voxworld/core/binary_io.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <cstdio>
#include <filesystem>
#include <string>

namespace voxworld::buffers {

inline std::uint16_t encode_unit(double x) {
    const double clamped = std::clamp(x, -1.0, 1.0);
    return static_cast<std::uint16_t>(std::lround((clamped + 1.0) * 0.5 * 65535.0));
}

inline double decode_unit(std::uint16_t q) { return q / 65535.0 * 2.0 - 1.0; }

inline std::string frame_file(const char *stem, std::size_t frame, const char *ext) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s_%05zu.%s", stem, frame, ext);
    return buf;
}

namespace detail {

inline void imwrite_checked(const std::filesystem::path &path, const cv::Mat &mat) {
    std::filesystem::create_directories(path.parent_path());
    if (!cv::imwrite(path.string(), mat)) throw Error("could not write image " + path.string());
}

inline cv::Mat imread_checked(const std::filesystem::path &path, int flags) {
    cv::Mat mat = cv::imread(path.string(), flags);
    if (mat.empty()) throw FormatError("could not read image " + path.string());
    return mat;
}

// OpenCV stores color images as BGR.
inline cv::Mat rgb16(const Image<double> &img) {
    cv::Mat mat(img.height(), img.width(), CV_16UC3);
    for (int v = 0; v < img.height(); ++v)
        for (int u = 0; u < img.width(); ++u) {
            auto &px = mat.at<cv::Vec3w>(v, u);
            for (int c = 0; c < 3; ++c) px[2 - c] = encode_unit(img.at(u, v, c));
        }
    return mat;
}

inline Image<double> from_rgb16(const cv::Mat &mat) {
    if (mat.type() != CV_16UC3) throw FormatError("expected a 16-bit RGB image");
    Image<double> img(mat.cols, mat.rows, 3);
    for (int v = 0; v < mat.rows; ++v)
        for (int u = 0; u < mat.cols; ++u)
            for (int c = 0; c < 3; ++c) img.at(u, v, c) = decode_unit(mat.at<cv::Vec3w>(v, u)[2 - c]);
    return img;
}

inline cv::Mat mask8(const Mask &m) {
    cv::Mat mat(m.height(), m.width(), CV_8UC1);
    for (int v = 0; v < m.height(); ++v)
        for (int u = 0; u < m.width(); ++u) mat.at<std::uint8_t>(v, u) = m.at(u, v) ? 255 : 0;
    return mat;
}

inline Mask from_mask8(const cv::Mat &mat) {
    if (mat.type() != CV_8UC1) throw FormatError("expected an 8-bit mask image");
    Mask m(mat.cols, mat.rows, 1, 0);
    for (int v = 0; v < mat.rows; ++v)
        for (int u = 0; u < mat.cols; ++u) m.at(u, v) = mat.at<std::uint8_t>(v, u) != 0;
    return m;
}

} // namespace detail

struct BufferExportInfo {
    std::size_t frame_index = 0;
    double t = 0.0;
    Camera camera;
    double normalization = 100.0;
    std::uint64_t seed = 0;
};

inline void write_buffers(const std::filesystem::path &dir, const GuidanceBufferSet &b, const BufferExportInfo &info) {
    const auto n = info.frame_index;
    detail::imwrite_checked(dir / frame_file("semantic", n, "png"), detail::rgb16(b.semantic));
    detail::imwrite_checked(dir / frame_file("coordinate", n, "png"), detail::rgb16(b.coordinate));

    cv::Mat depth(b.depth.height(), b.depth.width(), CV_32FC1);
    for (int v = 0; v < depth.rows; ++v)
        for (int u = 0; u < depth.cols; ++u) depth.at<float>(v, u) = static_cast<float>(b.depth.at(u, v));
    detail::imwrite_checked(dir / frame_file("depth", n, "pfm"), depth);

    cv::Mat inst(b.instance.height(), b.instance.width(), CV_16UC1);
    for (int v = 0; v < inst.rows; ++v)
        for (int u = 0; u < inst.cols; ++u) {
            const std::int32_t id = b.instance.at(u, v);
            if (id < -1 || id > 65534) throw FormatError("instance id does not fit the 16-bit instance image");
            inst.at<std::uint16_t>(v, u) = static_cast<std::uint16_t>(id + 1);
        }
    detail::imwrite_checked(dir / frame_file("instance", n, "png"), inst);
    detail::imwrite_checked(dir / frame_file("midground", n, "png"), detail::mask8(b.midground));
    detail::imwrite_checked(dir / frame_file("sky", n, "png"), detail::mask8(b.sky));

    const nlohmann::json sidecar = {
        {"frame", n},
        {"t", info.t},
        {"camera", camera_to_json(info.camera)},
        {"window", b.window_index},
        {"window_centroid", {b.window_centroid.x(), b.window_centroid.y(), b.window_centroid.z()}},
        {"normalization_m", info.normalization},
        {"seed", info.seed},
        {"encoding", {{"semantic", "u16 = round((x + 1) / 2 * 65535)"},
                      {"coordinate", "u16 = round((x + 1) / 2 * 65535)"},
                      {"depth", "f32 meters, 0 = no hit"},
                      {"instance", "u16 = id + 1, 0 = none"},
                      {"midground", "u8 255 = mid-ground"},
                      {"sky", "u8 255 = sky"}}}};
    io::write_text_file(dir / frame_file("frame", n, "json"), sidecar.dump(2) + "\n");
}

/// Reads back an exported frame. Semantic and coordinate values carry 16-bit quantization,
/// depth carries f32 rounding; semantic_rgb is reconstructed from the rescaled values.
inline GuidanceBufferSet read_buffers(const std::filesystem::path &dir, std::size_t n) {
    GuidanceBufferSet b;
    b.semantic = detail::from_rgb16(detail::imread_checked(dir / frame_file("semantic", n, "png"), cv::IMREAD_UNCHANGED));
    b.semantic_rgb = b.semantic;
    for (auto &x : b.semantic_rgb.values()) x = 0.5 * (x + 1.0);
    b.coordinate = detail::from_rgb16(detail::imread_checked(dir / frame_file("coordinate", n, "png"), cv::IMREAD_UNCHANGED));
    const cv::Mat depth = detail::imread_checked(dir / frame_file("depth", n, "pfm"), cv::IMREAD_UNCHANGED);
    if (depth.type() != CV_32FC1) throw FormatError("expected a single-channel float depth image");
    b.depth = Image<double>(depth.cols, depth.rows, 1);
    for (int v = 0; v < depth.rows; ++v)
        for (int u = 0; u < depth.cols; ++u) b.depth.at(u, v) = depth.at<float>(v, u);
    const cv::Mat inst = detail::imread_checked(dir / frame_file("instance", n, "png"), cv::IMREAD_UNCHANGED);
    if (inst.type() != CV_16UC1) throw FormatError("expected a 16-bit instance image");
    b.instance = Image<std::int32_t>(inst.cols, inst.rows, 1);
    for (int v = 0; v < inst.rows; ++v)
        for (int u = 0; u < inst.cols; ++u) b.instance.at(u, v) = static_cast<std::int32_t>(inst.at<std::uint16_t>(v, u)) - 1;
    b.midground = detail::from_mask8(detail::imread_checked(dir / frame_file("midground", n, "png"), cv::IMREAD_UNCHANGED));
    b.sky = detail::from_mask8(detail::imread_checked(dir / frame_file("sky", n, "png"), cv::IMREAD_UNCHANGED));
    const auto sidecar = nlohmann::json::parse(io::read_text_file(dir / frame_file("frame", n, "json")));
    b.window_index = sidecar.at("window").get<int>();
    const auto &c = sidecar.at("window_centroid");
    b.window_centroid = Vec3(c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>());
    return b;
}

} // namespace voxworld::buffers
