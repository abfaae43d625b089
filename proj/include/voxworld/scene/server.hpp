// Copyright Contributors to the voxworld Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Drive session service over HTTP and WebSocket.
//
//   POST   /sessions                   201 {"session": id, "hello": {...}}
//   DELETE /sessions/{id}              204, 404 for unknown ids
//   GET    /sessions/{id}/trajectory   200 trajectory file, 404 for unknown ids
//   GET    /bundle                     200 {"chunk_layout", "ego", "drive", "time", "palette_sha256"}
//   GET    /sessions/{id}/stream       WebSocket upgrade carrying the drive streaming protocol
//
// Every session is owned by one loop thread; HTTP and WebSocket handlers only enqueue work on
// it. The bundle and the voxel renderer are shared read-only by all sessions.

#include "voxworld/scene/bundle.hpp"
#include "voxworld/scene/drive.hpp"
#include "voxworld/scene/stream_protocol.hpp"

#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <atomic>
#include <condition_variable>
#include <deque>
#include <functional>
#include <future>
#include <mutex>
#include <random>
#include <thread>

#include <sys/socket.h>

namespace voxworld::scene {

/// Serializes all access to one DriveSession on a dedicated thread.
class SessionLoop {
  public:
    explicit SessionLoop(DriveSession session) : session_(std::move(session)), thread_([this] { run(); }) {}

    SessionLoop(const SessionLoop &) = delete;
    SessionLoop &operator=(const SessionLoop &) = delete;

    ~SessionLoop() {
        {
            std::lock_guard lock(mutex_);
            stopping_ = true;
        }
        cv_.notify_one();
        thread_.join();
    }

    /// Runs `fn(session)` on the loop thread and returns its result.
    template <typename F>
    auto call(F fn) -> std::invoke_result_t<F, DriveSession &> {
        using R = std::invoke_result_t<F, DriveSession &>;
        auto task = std::make_shared<std::packaged_task<R()>>([this, fn = std::move(fn)]() mutable { return fn(session_); });
        auto result = task->get_future();
        {
            std::lock_guard lock(mutex_);
            if (stopping_) throw Error("session loop is shutting down");
            queue_.emplace_back([task] { (*task)(); });
        }
        cv_.notify_one();
        return result.get();
    }

  private:
    void run() {
        for (;;) {
            std::function<void()> job;
            {
                std::unique_lock lock(mutex_);
                cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
                if (queue_.empty()) return;
                job = std::move(queue_.front());
                queue_.pop_front();
            }
            job();
        }
    }

    DriveSession session_;
    std::mutex mutex_;
    std::condition_variable cv_;
    std::deque<std::function<void()>> queue_;
    bool stopping_ = false;
    std::thread thread_;
};

/// Transport-independent session registry. No method throws on client input; failures become
/// error messages or empty results.
class SessionService {
  public:
    explicit SessionService(Bundle bundle, double preview_voxel_size = 0.2)
        : bundle_(std::make_unique<Bundle>(std::move(bundle))) {
        bundle_->drive.validate();
        const double vs = bundle_->world.empty() ? preview_voxel_size : bundle_->world.voxel_size();
        renderer_ = std::make_unique<buffers::BufferRenderer>(bundle_->world, box_objects(bundle_->tracks, vs));
    }

    [[nodiscard]] const Bundle &bundle() const { return *bundle_; }

    std::string create() {
        std::lock_guard lock(mutex_);
        std::string id;
        do {
            char buf[17];
            std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(rng_()));
            id = buf;
        } while (sessions_.count(id));
        sessions_.emplace(id, std::make_shared<SessionLoop>(DriveSession(id, bundle_->drive, bundle_->ego, bundle_->time)));
        return id;
    }

    bool close(const std::string &id) {
        std::shared_ptr<SessionLoop> loop;
        {
            std::lock_guard lock(mutex_);
            auto it = sessions_.find(id);
            if (it == sessions_.end()) return false;
            loop = std::move(it->second);
            sessions_.erase(it);
        }
        return true;
    }

    [[nodiscard]] std::size_t session_count() const {
        std::lock_guard lock(mutex_);
        return sessions_.size();
    }

    [[nodiscard]] bool exists(const std::string &id) const { return find(id) != nullptr; }

    std::optional<buffers::Trajectory> trajectory(const std::string &id) {
        auto loop = find(id);
        if (!loop) return std::nullopt;
        return loop->call([](DriveSession &s) { return s.trajectory(); });
    }

    std::optional<stream::Message> hello(const std::string &id) {
        auto loop = find(id);
        if (!loop) return std::nullopt;
        return loop->call([](DriveSession &s) { return stream::make_hello(s); });
    }

    /// Answers one client message.
    stream::Message handle(const std::string &id, const stream::Message &msg) {
        auto loop = find(id);
        if (!loop) return stream::make_error("unknown_session", "no session '" + id + "'");
        const auto type = msg.type();
        try {
            if (type == "control") {
                const auto control = stream::parse_control(msg);
                return loop->call([&](DriveSession &s) {
                    s.apply(control);
                    return stream::make_frame(s, render_preview(s));
                });
            }
            if (type == "export") return loop->call([](DriveSession &s) { return stream::make_trajectory(s); });
            return stream::make_error("unknown_type", "unknown message type '" + type + "'");
        } catch (const ProtocolError &e) {
            return stream::make_error("bad_control", e.what());
        } catch (const std::exception &e) {
            return stream::make_error("internal", e.what());
        }
    }

    stream::Message handle_bytes(const std::string &id, std::span<const std::uint8_t> bytes) {
        try {
            return handle(id, stream::decode(bytes));
        } catch (const std::exception &e) {
            return stream::make_error("malformed", e.what());
        }
    }

    stream::Message handle_text(const std::string &id, std::string_view text) {
        try {
            return handle(id, stream::decode_text(text));
        } catch (const std::exception &e) {
            return stream::make_error("malformed", e.what());
        }
    }

    [[nodiscard]] nlohmann::json bundle_info() const {
        return {{"chunk_layout", layout_to_json(bundle_->layout)},
                {"ego", ego_to_json(bundle_->ego)},
                {"drive", drive_to_json(bundle_->drive)},
                {"time", bundle_->time},
                {"palette_sha256", palette_sha256()}};
    }

  private:
    [[nodiscard]] std::shared_ptr<SessionLoop> find(const std::string &id) const {
        std::lock_guard lock(mutex_);
        auto it = sessions_.find(id);
        return it == sessions_.end() ? nullptr : it->second;
    }

    [[nodiscard]] buffers::GuidanceBufferSet render_preview(const DriveSession &s) const {
        return renderer_->render_frame({s.time(), s.preview_camera()}, s.state().position, 0);
    }

    std::unique_ptr<Bundle> bundle_;
    std::unique_ptr<buffers::BufferRenderer> renderer_;
    mutable std::mutex mutex_;
    std::map<std::string, std::shared_ptr<SessionLoop>> sessions_;
    std::mt19937_64 rng_{std::random_device{}()};
};

/// Blocking HTTP/WebSocket front end for a SessionService. One detached thread per connection;
/// stop() shuts the open sockets down and waits for those threads to finish.
class DriveServer {
  public:
    using tcp = boost::asio::ip::tcp;

    DriveServer(SessionService &service, const std::string &address, unsigned short port)
        : service_(service), acceptor_(ioc_) {
        boost::system::error_code ec;
        const auto addr = boost::asio::ip::make_address(address, ec);
        if (ec) throw ConfigError("invalid bind address '" + address + "'");
        const tcp::endpoint ep(addr, port);
        acceptor_.open(ep.protocol());
        acceptor_.set_option(boost::asio::socket_base::reuse_address(true));
        acceptor_.bind(ep, ec);
        if (ec) throw Error("cannot bind " + address + ":" + std::to_string(port) + ": " + ec.message());
        acceptor_.listen();
    }

    ~DriveServer() { stop(); }

    [[nodiscard]] unsigned short port() const { return acceptor_.local_endpoint().port(); }

    /// Accepts connections on a background thread.
    void start() {
        accept_thread_ = std::thread([this] { accept_loop(); });
    }

    /// Blocks the caller until stop() is called from elsewhere.
    void run() { accept_loop(); }

    void stop() {
        if (stopped_.exchange(true)) return;
        boost::system::error_code ec;
        ::shutdown(acceptor_.native_handle(), SHUT_RDWR);
        acceptor_.close(ec);
        {
            std::lock_guard lock(mutex_);
            for (const auto fd : open_) ::shutdown(fd, SHUT_RDWR);
        }
        if (accept_thread_.joinable()) accept_thread_.join();
        std::unique_lock lock(mutex_);
        idle_.wait(lock, [&] { return active_ == 0; });
    }

  private:
    void accept_loop() {
        while (!stopped_) {
            boost::system::error_code ec;
            tcp::socket socket(ioc_);
            acceptor_.accept(socket, ec);
            if (ec) {
                if (stopped_) return;
                continue;
            }
            std::lock_guard lock(mutex_);
            if (stopped_) return;
            open_.insert(socket.native_handle());
            ++active_;
            std::thread([this, s = std::move(socket)]() mutable { connection(std::move(s)); }).detach();
        }
    }

    void connection(tcp::socket socket) {
        const auto fd = socket.native_handle();
        try {
            serve(socket);
        } catch (const std::exception &) {
        }
        boost::system::error_code ec;
        std::lock_guard lock(mutex_);
        open_.erase(fd);
        socket.shutdown(tcp::socket::shutdown_both, ec);
        socket.close(ec);
        if (--active_ == 0) idle_.notify_all();
    }

    static std::vector<std::string> split_path(std::string_view target) {
        target = target.substr(0, target.find('?'));
        std::vector<std::string> parts;
        std::size_t pos = 0;
        while (pos < target.size()) {
            const auto next = target.find('/', pos);
            const auto end = next == std::string_view::npos ? target.size() : next;
            if (end > pos) parts.emplace_back(target.substr(pos, end - pos));
            pos = end + 1;
        }
        return parts;
    }

    template <typename Body>
    static void cors(boost::beast::http::response<Body> &res) {
        res.set(boost::beast::http::field::access_control_allow_origin, "*");
        res.set(boost::beast::http::field::access_control_allow_methods, "GET, POST, DELETE, OPTIONS");
    }

    static boost::beast::http::response<boost::beast::http::string_body> json_response(
        boost::beast::http::status status, const nlohmann::json &body, unsigned version, bool keep_alive) {
        boost::beast::http::response<boost::beast::http::string_body> res(status, version);
        res.set(boost::beast::http::field::content_type, "application/json");
        cors(res);
        res.keep_alive(keep_alive);
        res.body() = body.is_null() ? std::string{} : body.dump() + "\n";
        res.prepare_payload();
        return res;
    }

    void serve(tcp::socket &socket) {
        namespace http = boost::beast::http;
        boost::beast::flat_buffer buffer;
        for (;;) {
            http::request_parser<http::string_body> parser;
            parser.body_limit(1u << 20);
            boost::system::error_code ec;
            http::read(socket, buffer, parser, ec);
            if (ec) return;
            auto req = parser.release();
            const auto parts = split_path(std::string_view(req.target().data(), req.target().size()));
            if (boost::beast::websocket::is_upgrade(req)) {
                if (parts.size() == 3 && parts[0] == "sessions" && parts[2] == "stream" && service_.exists(parts[1])) {
                    stream_session(socket, std::move(req), parts[1]);
                } else {
                    http::write(socket, json_response(http::status::not_found, {{"error", "unknown_session"}}, req.version(), false), ec);
                }
                return;
            }
            auto res = route(req, parts);
            http::write(socket, res, ec);
            if (ec || !res.keep_alive()) return;
        }
    }

    boost::beast::http::response<boost::beast::http::string_body> route(
        const boost::beast::http::request<boost::beast::http::string_body> &req, const std::vector<std::string> &parts) {
        namespace http = boost::beast::http;
        const auto v = req.version();
        const bool ka = req.keep_alive();
        const auto m = req.method();
        const auto error = [&](http::status s, const std::string &code, const std::string &msg) {
            return json_response(s, {{"error", code}, {"message", msg}}, v, ka);
        };
        try {
            if (m == http::verb::options) return json_response(http::status::no_content, nullptr, v, ka);
            if (parts.size() == 1 && parts[0] == "bundle" && m == http::verb::get) {
                return json_response(http::status::ok, service_.bundle_info(), v, ka);
            }
            if (parts.size() == 1 && parts[0] == "sessions" && m == http::verb::post) {
                const auto id = service_.create();
                const auto hello = service_.hello(id);
                return json_response(http::status::created, {{"session", id}, {"hello", hello ? hello->header : nullptr}}, v, ka);
            }
            if (parts.size() == 2 && parts[0] == "sessions" && m == http::verb::delete_) {
                if (!service_.close(parts[1])) return error(http::status::not_found, "unknown_session", "no session '" + parts[1] + "'");
                return json_response(http::status::no_content, nullptr, v, ka);
            }
            if (parts.size() == 3 && parts[0] == "sessions" && parts[2] == "trajectory" && m == http::verb::get) {
                const auto traj = service_.trajectory(parts[1]);
                if (!traj) return error(http::status::not_found, "unknown_session", "no session '" + parts[1] + "'");
                return json_response(http::status::ok, buffers::trajectory_to_json(*traj), v, ka);
            }
            return error(http::status::not_found, "not_found", "no route for " + std::string(req.target()));
        } catch (const std::exception &e) {
            return error(http::status::internal_server_error, "internal", e.what());
        }
    }

    void stream_session(tcp::socket &socket, boost::beast::http::request<boost::beast::http::string_body> req,
                        const std::string &id) {
        namespace websocket = boost::beast::websocket;
        websocket::stream<tcp::socket &> ws(socket);
        ws.read_message_max(stream::kMaxMessageBytes);
        ws.accept(req);
        ws.binary(true);
        const auto send = [&](const stream::Message &msg) {
            const auto bytes = stream::encode(msg);
            ws.write(boost::asio::buffer(bytes));
        };
        const auto hello = service_.hello(id);
        if (!hello) {
            send(stream::make_error("unknown_session", "no session '" + id + "'"));
            return;
        }
        send(*hello);
        boost::beast::flat_buffer buffer;
        for (;;) {
            boost::system::error_code ec;
            buffer.clear();
            ws.read(buffer, ec);
            if (ec == websocket::error::closed || ec) return;
            const auto data = buffer.cdata();
            const std::span<const std::uint8_t> bytes(static_cast<const std::uint8_t *>(data.data()), data.size());
            const auto reply = ws.got_text()
                                   ? service_.handle_text(id, {reinterpret_cast<const char *>(bytes.data()), bytes.size()})
                                   : service_.handle_bytes(id, bytes);
            send(reply);
            if (reply.type() == "error" && reply.header.value("code", std::string{}) == "unknown_session") {
                ws.close(websocket::close_code::normal, ec);
                return;
            }
        }
    }

    SessionService &service_;
    boost::asio::io_context ioc_;
    tcp::acceptor acceptor_;
    std::thread accept_thread_;
    std::atomic<bool> stopped_{false};
    std::mutex mutex_;
    std::condition_variable idle_;
    std::set<int> open_;
    std::size_t active_ = 0;
};

} // namespace voxworld::scene
