// Copyright Contributors to the voxworld Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Denoiser plug-in protocol.
//
// A plug-in is a child process that reads requests on stdin and writes responses on stdout.
// Every message is a sequence of length-prefixed records: u32 little-endian byte count, then the
// bytes. The first record of a message is a UTF-8 JSON header whose "blobs" field says how many
// binary records follow.
//
//   request  {"protocol":"voxworld-denoiser","version":1,"type":"predict","timestep":t,
//             "alpha_bar":ab,"null_condition":bool,"N":n,"C":c,"condition_channels":s,"blobs":2}
//            + latent f32[N^3*C] + conditions f32[N^3*s]      (channel-last, i-major)
//   response {"status":"ok","blobs":1} + v f32[N^3*C]
//            {"status":"error","message":"...","blobs":0}
//   request  {"type":"shutdown","blobs":0}                    (plug-in exits, no response)

#include "voxworld/core/binary_io.hpp"
#include "voxworld/core/errors.hpp"
#include "voxworld/outpaint/denoiser.hpp"

#include <json.hpp>

#include <csignal>
#include <cerrno>
#include <optional>
#include <string>
#include <vector>

#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

namespace voxworld::outpaint::plugin {

inline constexpr int kProtocolVersion = 1;
inline constexpr std::uint32_t kMaxRecordBytes = 1u << 30;

struct Message {
    nlohmann::json header;
    std::vector<std::vector<std::uint8_t>> blobs;
};

inline void write_all(int fd, const void *data, std::size_t n) {
    const auto *p = static_cast<const char *>(data);
    while (n > 0) {
        const ssize_t w = ::write(fd, p, n);
        if (w < 0) {
            if (errno == EINTR) continue;
            throw ProtocolError("plug-in channel write failed");
        }
        p += w;
        n -= static_cast<std::size_t>(w);
    }
}

/// Reads exactly n bytes. Returns false on EOF before the first byte; throws on a truncated read.
inline bool read_all(int fd, void *data, std::size_t n) {
    auto *p = static_cast<char *>(data);
    std::size_t got = 0;
    while (got < n) {
        const ssize_t r = ::read(fd, p + got, n - got);
        if (r < 0) {
            if (errno == EINTR) continue;
            throw ProtocolError("plug-in channel read failed");
        }
        if (r == 0) {
            if (got == 0) return false;
            throw ProtocolError("plug-in channel closed mid-record");
        }
        got += static_cast<std::size_t>(r);
    }
    return true;
}

inline void write_record(int fd, std::span<const std::uint8_t> bytes) {
    if (bytes.size() > kMaxRecordBytes) throw ProtocolError("record too large");
    const auto len = static_cast<std::uint32_t>(bytes.size());
    write_all(fd, &len, sizeof(len));
    write_all(fd, bytes.data(), bytes.size());
}

inline std::optional<std::vector<std::uint8_t>> read_record(int fd) {
    std::uint32_t len = 0;
    if (!read_all(fd, &len, sizeof(len))) return std::nullopt;
    if (len > kMaxRecordBytes) throw ProtocolError("record length exceeds limit");
    std::vector<std::uint8_t> bytes(len);
    if (len > 0 && !read_all(fd, bytes.data(), len)) throw ProtocolError("plug-in channel closed mid-record");
    return bytes;
}

inline void write_message(int fd, const Message &msg) {
    auto header = msg.header;
    header["blobs"] = msg.blobs.size();
    const auto text = header.dump();
    write_record(fd, {reinterpret_cast<const std::uint8_t *>(text.data()), text.size()});
    for (const auto &blob : msg.blobs) write_record(fd, blob);
}

/// nullopt on clean EOF between messages.
inline std::optional<Message> read_message(int fd) {
    auto head = read_record(fd);
    if (!head) return std::nullopt;
    Message msg;
    try {
        msg.header = nlohmann::json::parse(head->begin(), head->end());
    } catch (const nlohmann::json::exception &e) {
        throw ProtocolError(std::string("malformed message header: ") + e.what());
    }
    if (!msg.header.is_object()) throw ProtocolError("message header must be a JSON object");
    const auto count = msg.header.value("blobs", 0);
    if (count < 0 || count > 16) throw ProtocolError("invalid blob count");
    for (int n = 0; n < count; ++n) {
        auto blob = read_record(fd);
        if (!blob) throw ProtocolError("channel closed before all blobs arrived");
        msg.blobs.push_back(std::move(*blob));
    }
    return msg;
}

inline Message make_predict_request(const DenoiseRequest &req) {
    Message msg;
    msg.header = {{"protocol", "voxworld-denoiser"},
                  {"version", kProtocolVersion},
                  {"type", "predict"},
                  {"timestep", req.timestep},
                  {"alpha_bar", req.alpha_bar},
                  {"null_condition", req.null_condition},
                  {"N", req.x_t.extent()},
                  {"C", req.x_t.channels()},
                  {"condition_channels", req.conditions.channels()}};
    msg.blobs.push_back(io::pack_f32(req.x_t.values()));
    const std::vector<float> cond(req.conditions.values().begin(), req.conditions.values().end());
    msg.blobs.push_back(io::pack_f32(cond));
    return msg;
}

/// Plug-in side: answers predict requests with `denoiser` until shutdown or EOF.
inline void serve(int in_fd, int out_fd, Denoiser &denoiser) {
    while (auto msg = read_message(in_fd)) {
        const auto type = msg->header.value("type", std::string{});
        if (type == "shutdown") return;
        Message reply;
        try {
            if (type != "predict") throw ProtocolError("unknown request type '" + type + "'");
            if (msg->header.value("version", 0) != kProtocolVersion) throw ProtocolError("protocol version mismatch");
            if (msg->blobs.size() != 2) throw ProtocolError("predict needs latent and condition blobs");
            const int n = msg->header.at("N").get<int>();
            const int c = msg->header.at("C").get<int>();
            const int s = msg->header.at("condition_channels").get<int>();
            ChunkFrame frame;
            frame.extent = n;
            const LatentCube x(frame, c, io::unpack_f32(msg->blobs[0]));
            const auto cf = io::unpack_f32(msg->blobs[1]);
            const ConditionVolume cond(frame, s, std::vector<double>(cf.begin(), cf.end()));
            const auto v = denoiser.predict_v({x, msg->header.at("timestep").get<int>(),
                                               msg->header.at("alpha_bar").get<double>(), cond,
                                               msg->header.at("null_condition").get<bool>()});
            reply.header = {{"status", "ok"}};
            reply.blobs.push_back(io::pack_f32(v));
        } catch (const std::exception &e) {
            reply.header = {{"status", "error"}, {"message", e.what()}};
            reply.blobs.clear();
        }
        write_message(out_fd, reply);
    }
}

/// Host side: spawns the plug-in command and forwards every prediction over its stdin/stdout.
/// SIGPIPE is ignored process-wide so a dying plug-in surfaces as ProtocolError.
class ExternalDenoiser final : public Denoiser {
  public:
    explicit ExternalDenoiser(std::vector<std::string> argv) {
        if (argv.empty()) throw ConfigError("external denoiser command is empty");
        std::signal(SIGPIPE, SIG_IGN);
        int to_child[2], from_child[2];
        if (::pipe(to_child) != 0) throw ProtocolError("pipe() failed");
        if (::pipe(from_child) != 0) {
            ::close(to_child[0]);
            ::close(to_child[1]);
            throw ProtocolError("pipe() failed");
        }
        pid_ = ::fork();
        if (pid_ < 0) throw ProtocolError("fork() failed");
        if (pid_ == 0) {
            ::dup2(to_child[0], STDIN_FILENO);
            ::dup2(from_child[1], STDOUT_FILENO);
            ::close(to_child[0]);
            ::close(to_child[1]);
            ::close(from_child[0]);
            ::close(from_child[1]);
            std::vector<char *> args;
            for (auto &a : argv) args.push_back(a.data());
            args.push_back(nullptr);
            ::execvp(args[0], args.data());
            ::_exit(127);
        }
        ::close(to_child[0]);
        ::close(from_child[1]);
        write_fd_ = to_child[1];
        read_fd_ = from_child[0];
    }

    ExternalDenoiser(const ExternalDenoiser &) = delete;
    ExternalDenoiser &operator=(const ExternalDenoiser &) = delete;

    ~ExternalDenoiser() override {
        try {
            write_message(write_fd_, Message{{{"type", "shutdown"}}, {}});
        } catch (...) {
        }
        ::close(write_fd_);
        ::close(read_fd_);
        int status = 0;
        ::waitpid(pid_, &status, 0);
    }

    std::vector<float> predict_v(const DenoiseRequest &req) override {
        write_message(write_fd_, make_predict_request(req));
        auto reply = read_message(read_fd_);
        if (!reply) throw ProtocolError("denoiser plug-in closed its output");
        if (reply->header.value("status", std::string{}) != "ok") {
            throw ProtocolError("denoiser plug-in error: " + reply->header.value("message", std::string("unknown")));
        }
        if (reply->blobs.size() != 1) throw ProtocolError("denoiser plug-in reply lacks the v blob");
        auto v = io::unpack_f32(reply->blobs[0]);
        if (v.size() != req.x_t.values().size()) throw ProtocolError("denoiser plug-in returned the wrong shape");
        return v;
    }

  private:
    pid_t pid_ = -1;
    int write_fd_ = -1;
    int read_fd_ = -1;
};

} // namespace voxworld::outpaint::plugin
