// Copyright Contributors to the voxworld Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Drive streaming protocol, version 1.
//
// Each WebSocket binary message holds one protocol message: a sequence of length-prefixed
// records (u32 little-endian byte count, then the bytes). The first record is a UTF-8 JSON
// header with a "type" tag and a "blobs" count; that many binary records follow. A text
// WebSocket message is accepted as a header-only message (blobs = 0).
//
// server -> client
//   {"type":"hello","protocol":"voxworld-drive","version":1,"session":id,"tick_hz":hz,
//    "preview":{"width":w,"height":h},"blobs":0}
//   {"type":"frame","tick":n,"t":s,"pose":{"position":[x,y,z],"heading":rad,"speed":m/s,
//    "steer":rad,"camera":{...}},"preview":{"width":w,"height":h,"semantic":"u8 rgb row-major",
//    "depth":"f32 meters row-major, 0 = no hit"},"blobs":2}  + semantic u8[h*w*3] + depth f32[h*w]
//   {"type":"trajectory","trajectory":{trajectory file},"blobs":0}
//   {"type":"error","code":"malformed"|"bad_control"|"unknown_type"|"unknown_session"|"internal",
//    "message":"...","blobs":0}
//
// client -> server
//   {"type":"control","throttle":[-1,1],"steer":[-1,1],"dt":s}   answered by one "frame"
//   {"type":"export"}                                              answered by "trajectory"

#include "voxworld/buffers/render.hpp"
#include "voxworld/core/binary_io.hpp"
#include "voxworld/scene/drive.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace voxworld::scene::stream {

inline constexpr const char *kProtocolName = "voxworld-drive";
inline constexpr int kProtocolVersion = 1;
inline constexpr std::size_t kMaxBlobs = 8;
inline constexpr std::size_t kMaxMessageBytes = 64u << 20;

struct Message {
    nlohmann::json header;
    std::vector<std::vector<std::uint8_t>> blobs;

    [[nodiscard]] std::string type() const { return header.value("type", std::string{}); }
};

inline std::vector<std::uint8_t> encode(const Message &msg) {
    auto header = msg.header;
    header["blobs"] = msg.blobs.size();
    const auto text = header.dump();
    io::ByteWriter w;
    w.put(static_cast<std::uint32_t>(text.size()));
    w.put_string(text);
    for (const auto &blob : msg.blobs) {
        w.put(static_cast<std::uint32_t>(blob.size()));
        w.put_bytes(blob);
    }
    return w.take();
}

/// Throws ProtocolError on truncated, oversized or trailing data and on a non-object header.
inline Message decode(std::span<const std::uint8_t> bytes) {
    if (bytes.size() > kMaxMessageBytes) throw ProtocolError("message exceeds size limit");
    Message msg;
    try {
        io::ByteReader r(bytes);
        const auto head = r.get_bytes(r.get<std::uint32_t>());
        msg.header = nlohmann::json::parse(head.begin(), head.end());
        if (!msg.header.is_object()) throw ProtocolError("message header must be a JSON object");
        const auto &count = msg.header.contains("blobs") ? msg.header["blobs"] : nlohmann::json(0);
        if (!count.is_number_unsigned() && !(count.is_number_integer() && count.get<int>() >= 0)) {
            throw ProtocolError("blob count must be a non-negative integer");
        }
        if (count.get<std::size_t>() > kMaxBlobs) throw ProtocolError("too many blobs");
        for (std::size_t n = 0; n < count.get<std::size_t>(); ++n) {
            const auto blob = r.get_bytes(r.get<std::uint32_t>());
            msg.blobs.emplace_back(blob.begin(), blob.end());
        }
        if (r.remaining() != 0) throw ProtocolError("trailing bytes after message");
    } catch (const FormatError &e) {
        throw ProtocolError(std::string("truncated message: ") + e.what());
    } catch (const nlohmann::json::exception &e) {
        throw ProtocolError(std::string("malformed message header: ") + e.what());
    }
    return msg;
}

/// Header-only message from a text frame.
inline Message decode_text(std::string_view text) {
    Message msg;
    try {
        msg.header = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception &e) {
        throw ProtocolError(std::string("malformed message header: ") + e.what());
    }
    if (!msg.header.is_object()) throw ProtocolError("message header must be a JSON object");
    if (msg.header.value("blobs", 0) != 0) throw ProtocolError("text messages cannot carry blobs");
    return msg;
}

inline Message make_hello(const DriveSession &s) {
    return {{{"type", "hello"},
             {"protocol", kProtocolName},
             {"version", kProtocolVersion},
             {"session", s.id()},
             {"tick_hz", s.config().tick_hz},
             {"preview", {{"width", s.config().preview_width}, {"height", s.config().preview_height}}}},
            {}};
}

inline Message make_error(const std::string &code, const std::string &message) {
    return {{{"type", "error"}, {"code", code}, {"message", message}}, {}};
}

inline Message make_control(const ControlInput &c) {
    return {{{"type", "control"}, {"throttle", c.throttle}, {"steer", c.steer}, {"dt", c.dt}}, {}};
}

inline ControlInput parse_control(const Message &msg) {
    const auto &h = msg.header;
    ControlInput c;
    for (const char *key : {"throttle", "steer", "dt"}) {
        if (!h.contains(key) || !h[key].is_number()) throw ProtocolError(std::string("control needs a numeric '") + key + "'");
    }
    c.throttle = h["throttle"].get<double>();
    c.steer = h["steer"].get<double>();
    c.dt = h["dt"].get<double>();
    c.validate();
    return c;
}

/// Frame message for the session's current pose with a rendered preview.
inline Message make_frame(const DriveSession &s, const buffers::GuidanceBufferSet &preview) {
    const auto &st = s.state();
    const int w = preview.depth.width(), h = preview.depth.height();
    std::vector<std::uint8_t> rgb(static_cast<std::size_t>(w) * h * 3);
    std::vector<float> depth(static_cast<std::size_t>(w) * h);
    for (int v = 0; v < h; ++v)
        for (int u = 0; u < w; ++u) {
            const auto n = static_cast<std::size_t>(v) * w + u;
            for (int c = 0; c < 3; ++c) {
                rgb[n * 3 + c] = static_cast<std::uint8_t>(std::lround(std::clamp(preview.semantic_rgb.at(u, v, c), 0.0, 1.0) * 255.0));
            }
            depth[n] = static_cast<float>(preview.depth.at(u, v));
        }
    Message msg;
    msg.header = {{"type", "frame"},
                  {"tick", s.tick()},
                  {"t", s.time()},
                  {"pose",
                   {{"position", conditions::vec3_to_json(st.position)},
                    {"heading", st.heading},
                    {"speed", st.speed},
                    {"steer", st.steer},
                    {"camera", buffers::camera_to_json(s.camera())}}},
                  {"preview",
                   {{"width", w},
                    {"height", h},
                    {"semantic", "u8 rgb row-major"},
                    {"depth", "f32 meters row-major, 0 = no hit"}}}};
    msg.blobs.push_back(std::move(rgb));
    msg.blobs.push_back(io::pack_f32(depth));
    return msg;
}

inline Message make_trajectory(const DriveSession &s) {
    return {{{"type", "trajectory"}, {"trajectory", buffers::trajectory_to_json(s.trajectory())}}, {}};
}

} // namespace voxworld::scene::stream
