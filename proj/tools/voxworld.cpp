// Copyright Contributors to the voxworld Project
// SPDX-License-Identifier: Apache-2.0

// voxworld command-line tool.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or config error, 3 data or format error,
// 4 plug-in or protocol error.

#include "voxworld/scene/pipeline.hpp"
#include "voxworld/scene/server.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <iostream>

namespace {

using namespace voxworld;
namespace fs = std::filesystem;

enum ExitCode { kOk = 0, kRuntime = 1, kUsage = 2, kData = 3, kProtocol = 4 };

std::vector<outpaint::ChunkIndex> parse_chunks(const std::vector<std::string> &specs) {
    std::vector<outpaint::ChunkIndex> out;
    for (const auto &s : specs) {
        int x = 0, y = 0;
        char tail = 0;
        if (std::sscanf(s.c_str(), "%d,%d%c", &x, &y, &tail) != 2) throw ConfigError("chunk must be 'x,y', got '" + s + "'");
        out.push_back({x, y});
    }
    if (out.empty()) throw ConfigError("no chunks requested");
    return out;
}

buffers::Trajectory read_trajectory(const fs::path &path) {
    try {
        return buffers::trajectory_from_json(nlohmann::json::parse(io::read_text_file(path)));
    } catch (const nlohmann::json::parse_error &e) {
        throw ConfigError(std::string("trajectory is not valid JSON: ") + e.what());
    }
}

std::unique_ptr<gaussians::AttributePredictor> make_predictor(const std::string &spec) {
    if (spec == "heuristic") return std::make_unique<gaussians::HeuristicPredictor>();
    if (spec.rfind("external:", 0) == 0 && spec.size() > 9) {
        return std::make_unique<gaussians::ExternalPredictor>(scene::resolve_data_path(spec.substr(9)));
    }
    throw ConfigError("predictor must be 'heuristic' or 'external:PATH'");
}

void log(const std::string &msg) { std::cerr << "voxworld: " << msg << "\n"; }

int run_generate(const fs::path &config, const fs::path &out) {
    const auto cfg = scene::load_generate_config(scene::resolve_data_path(config));
    const auto bundle = scene::generate_bundle(cfg, scene::resolve_data_path(out));
    log("wrote bundle " + bundle.dir.string() + " with " + std::to_string(bundle.layout.order.size()) + " chunks and " +
        std::to_string(bundle.world.size()) + " voxels");
    return kOk;
}

int run_outpaint(const fs::path &dir, const std::vector<std::string> &chunks) {
    auto bundle = scene::load_bundle(scene::resolve_data_path(dir));
    auto denoiser = scene::make_denoiser(scene::bundle_denoiser(bundle));
    scene::extend_bundle(bundle, parse_chunks(chunks), *denoiser);
    log("bundle now has " + std::to_string(bundle.layout.order.size()) + " chunks");
    return kOk;
}

int run_render_buffers(const fs::path &dir, const fs::path &trajectory, int window, double normalization, const fs::path &out) {
    const auto bundle = scene::load_bundle(scene::resolve_data_path(dir));
    buffers::RenderOptions opts;
    opts.window = window;
    opts.normalization = normalization;
    const auto n = scene::render_bundle_buffers(bundle, read_trajectory(scene::resolve_data_path(trajectory)), opts,
                                                scene::resolve_data_path(out));
    log("wrote " + std::to_string(n) + " buffer frames");
    return kOk;
}

int run_compose(const fs::path &dir, const fs::path &buffers_dir, const std::optional<fs::path> &images,
                const std::string &predictor_spec, const std::optional<fs::path> &sky, int stride, bool no_subdivide, const fs::path &out) {
    const auto bundle = scene::load_bundle(scene::resolve_data_path(dir));
    auto predictor = make_predictor(predictor_spec);
    scene::ComposeInputs in;
    in.buffers_dir = scene::resolve_data_path(buffers_dir);
    if (images) in.images_dir = scene::resolve_data_path(*images);
    if (sky) {
        in.sky = gaussians::sky_params_from_json(nlohmann::json::parse(io::read_text_file(scene::resolve_data_path(*sky))));
    }
    in.options.pixel_stride = stride;
    in.options.subdivide = !no_subdivide;
    const auto result = scene::compose_bundle(bundle, in, *predictor);
    gaussians::save_scene(scene::resolve_data_path(out), result);
    log("wrote scene with " + std::to_string(result.static_gaussians.size()) + " static Gaussians and " +
        std::to_string(result.objects.size()) + " objects");
    return kOk;
}

int run_lidar(const fs::path &scene_dir, const fs::path &trajectory, const fs::path &pattern_path, const fs::path &out) {
    const auto g = gaussians::load_scene(scene::resolve_data_path(scene_dir));
    const auto pattern =
        lidar::pattern_from_json(nlohmann::json::parse(io::read_text_file(scene::resolve_data_path(pattern_path))));
    const auto total = scene::simulate_lidar(g, read_trajectory(scene::resolve_data_path(trajectory)), pattern,
                                             scene::resolve_data_path(out));
    log("wrote " + std::to_string(total) + " returns");
    return kOk;
}

int run_export_ply(const fs::path &scene_dir, double t, const fs::path &out) {
    const auto g = gaussians::load_scene(scene::resolve_data_path(scene_dir));
    io::write_file(scene::resolve_data_path(out), scene::export_scene_ply(g, t));
    return kOk;
}

int run_serve(const fs::path &dir, const std::string &bind, unsigned short port) {
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);
    scene::SessionService service(scene::load_bundle(scene::resolve_data_path(dir)));
    scene::DriveServer server(service, bind, port);
    server.start();
    std::cout << "listening on " << bind << ":" << server.port() << std::endl;
    int sig = 0;
    sigwait(&signals, &sig);
    server.stop();
    return kOk;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"voxworld: generate, render and drive voxel worlds"};
    app.require_subcommand(1);

    fs::path config, out, bundle_dir, trajectory, buffers_dir, scene_dir, pattern;
    std::optional<fs::path> images, sky;
    std::vector<std::string> chunks;
    int window = 25, stride = 4;
    double normalization = 100.0, time = 0.0;
    bool no_subdivide = false;
    std::string predictor = "heuristic", bind = "127.0.0.1";
    unsigned short port = 8080;

    auto *gen = app.add_subcommand("generate", "Outpaint and decode a world bundle from a config");
    gen->add_option("--config", config, "Generate config JSON")->required();
    gen->add_option("--out", out, "Bundle directory")->required();

    auto *outp = app.add_subcommand("outpaint", "Extend a bundle with more chunks");
    outp->add_option("--bundle,--scene", bundle_dir, "Bundle directory")->required();
    outp->add_option("--chunk", chunks, "Chunk index 'x,y' (repeatable)")->required();

    auto *rb = app.add_subcommand("render-buffers", "Render guidance buffers along a trajectory");
    rb->add_option("--scene", bundle_dir, "Bundle directory")->required();
    rb->add_option("--trajectory", trajectory, "Trajectory JSON")->required();
    rb->add_option("--frames", window, "Frames per coordinate normalization window")->check(CLI::PositiveNumber);
    rb->add_option("--normalization", normalization, "Coordinate normalization K in meters")->check(CLI::PositiveNumber);
    rb->add_option("--out", out, "Output directory")->required();

    auto *comp = app.add_subcommand("compose", "Build a Gaussian scene from a bundle and its buffers");
    comp->add_option("--scene", bundle_dir, "Bundle directory")->required();
    comp->add_option("--buffers", buffers_dir, "Directory written by render-buffers")->required();
    comp->add_option("--images", images, "Directory of image_NNNNN.png captures");
    comp->add_option("--predictor", predictor, "heuristic or external:PATH");
    comp->add_option("--sky-params", sky, "Sky model parameters JSON");
    comp->add_option("--pixel-stride", stride, "Run the pixel branch on every n-th frame")->check(CLI::PositiveNumber);
    comp->add_flag("--no-subdivide", no_subdivide, "Keep the world voxel size in the voxel branch");
    comp->add_option("--out", out, "Gaussian scene directory")->required();

    auto *lid = app.add_subcommand("lidar-sim", "Cast LiDAR beams into a Gaussian scene along a trajectory");
    lid->add_option("--scene", scene_dir, "Gaussian scene directory")->required();
    lid->add_option("--trajectory", trajectory, "Trajectory JSON")->required();
    lid->add_option("--pattern", pattern, "Beam pattern JSON")->required();
    lid->add_option("--out", out, "Output directory")->required();

    auto *srv = app.add_subcommand("serve", "Serve drive sessions over HTTP and WebSocket");
    srv->add_option("--scene", bundle_dir, "Bundle directory")->required();
    srv->add_option("--bind", bind, "Bind address");
    srv->add_option("--port", port, "TCP port, 0 picks a free one");

    auto *ply = app.add_subcommand("export-ply", "Export a Gaussian scene at one time as a single 3DGS PLY");
    ply->add_option("--scene", scene_dir, "Gaussian scene directory")->required();
    ply->add_option("--time", time, "Scene time in seconds");
    ply->add_option("--out", out, "Output PLY file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*gen) return run_generate(config, out);
        if (*outp) return run_outpaint(bundle_dir, chunks);
        if (*rb) return run_render_buffers(bundle_dir, trajectory, window, normalization, out);
        if (*comp) return run_compose(bundle_dir, buffers_dir, images, predictor, sky, stride, no_subdivide, out);
        if (*lid) return run_lidar(scene_dir, trajectory, pattern, out);
        if (*srv) return run_serve(bundle_dir, bind, port);
        if (*ply) return run_export_ply(scene_dir, time, out);
    } catch (const ConfigError &e) {
        log(std::string("config error: ") + e.what());
        return kUsage;
    } catch (const ProtocolError &e) {
        log(std::string("protocol error: ") + e.what());
        return kProtocol;
    } catch (const FormatError &e) {
        log(std::string("data error: ") + e.what());
        return kData;
    } catch (const nlohmann::json::exception &e) {
        log(std::string("data error: ") + e.what());
        return kData;
    } catch (const std::exception &e) {
        log(std::string("error: ") + e.what());
        return kRuntime;
    }
    return kUsage;
}
