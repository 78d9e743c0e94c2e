// Copyright Contributors to the splatcap project
// SPDX-License-Identifier: Apache-2.0
//
#include "commands.hpp"

#include <splatcap/camera_path.hpp>
#include <splatcap/colmap.hpp>
#include <splatcap/dataset.hpp>
#include <splatcap/error.hpp>
#include <splatcap/image_io.hpp>
#include <splatcap/ply.hpp>
#include <splatcap/rasterizer.hpp>
#include <splatcap/service/config.hpp>
#include <splatcap/service/service.hpp>
#include <splatcap/synthetic.hpp>
#include <splatcap/trainer.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <vector>

namespace splatcap::cli {

namespace fs = std::filesystem;

namespace {

Vec3 parse_vec3(const std::string& text, const std::string& what) {
    Vec3 v;
    std::istringstream in(text);
    std::string part;
    int i = 0;
    while (std::getline(in, part, ',')) {
        if (i == 3) break;
        try {
            std::size_t used = 0;
            v[i] = std::stod(part, &used);
            if (used != part.size()) throw std::invalid_argument(part);
        } catch (const std::logic_error&) {
            throw InvalidParameter(what + " must be three comma-separated numbers, got '" + text + "'");
        }
        ++i;
    }
    if (i != 3 || in.rdbuf()->in_avail() > 0) {
        throw InvalidParameter(what + " must be three comma-separated numbers, got '" + text + "'");
    }
    return v;
}

double percentile(std::vector<double> values, double p) {
    std::sort(values.begin(), values.end());
    const double pos = p * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string fmt(const Vec3& v) { return fmt(v[0]) + " " + fmt(v[1]) + " " + fmt(v[2]); }

std::string frame_name(int i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "frame_%04d.png", i);
    return buf;
}

} // namespace

Resolution parse_resolution(const std::string& text) {
    const auto x = text.find('x');
    Resolution r;
    try {
        if (x == std::string::npos) throw std::invalid_argument(text);
        std::size_t a = 0, b = 0;
        r.width = std::stoi(text.substr(0, x), &a);
        r.height = std::stoi(text.substr(x + 1), &b);
        if (a != x || b != text.size() - x - 1) throw std::invalid_argument(text);
    } catch (const std::logic_error&) {
        throw InvalidParameter("resolution must look like WxH, got '" + text + "'");
    }
    if (r.width < 1 || r.height < 1) throw InvalidParameter("resolution must be at least 1x1");
    return r;
}

int cmd_info(const InfoOptions& o) {
    const auto cloud = load_splat_ply(o.model);
    std::cout << "count: " << cloud.size() << '\n';
    std::cout << "sh_degree: " << cloud.active_sh_degree << '\n';
    if (cloud.empty()) return 0;
    Vec3 lo = cloud.splats.front().position, hi = lo;
    std::vector<double> opacity, scale;
    for (const auto& s : cloud.splats) {
        lo = lo.cwiseMin(s.position);
        hi = hi.cwiseMax(s.position);
        opacity.push_back(activate_opacity(s.opacity_logit));
        scale.push_back(std::exp(s.log_scale.maxCoeff()));
    }
    std::cout << "bbox_min: " << fmt(lo) << '\n' << "bbox_max: " << fmt(hi) << '\n';
    for (const auto& [name, values] : {std::pair{"opacity", &opacity}, std::pair{"scale", &scale}}) {
        std::cout << name << "_p05: " << fmt(percentile(*values, 0.05)) << '\n'
                  << name << "_p50: " << fmt(percentile(*values, 0.50)) << '\n'
                  << name << "_p95: " << fmt(percentile(*values, 0.95)) << '\n';
    }
    return 0;
}

int cmd_convert(const ConvertOptions& o) {
    const auto cloud = load_splat_ply(o.input);
    if (o.format == "binary") {
        save_splat_ply(o.output, cloud);
    } else if (o.format == "ascii") {
        write_file(o.output, write_splat_ply_ascii(cloud));
    } else {
        throw InvalidParameter("format must be 'binary' or 'ascii', got '" + o.format + "'");
    }
    std::cout << "wrote " << cloud.size() << " splats to " << o.output << " (" << o.format << ")\n";
    return 0;
}

int cmd_render(const RenderOptions& o) {
    const auto cloud = load_splat_ply(o.model);
    const Vec3 background = parse_vec3(o.background, "background");
    std::vector<Camera> cameras;
    if (o.cameras) {
        const auto sparse = read_colmap_sparse(*o.cameras);
        for (const auto& img : sparse.images) cameras.push_back(sparse.camera_for(img));
    } else {
        const auto res = parse_resolution(o.resolution);
        auto path = default_orbit(cloud, o.frames);
        if (o.center) path.center = parse_vec3(*o.center, "center");
        if (o.radius) path.radius = *o.radius;
        path.height = o.height ? *o.height : 0.3 * path.radius;
        cameras = orbit_cameras(path, pinhole_intrinsics(res.width, res.height, o.fov_deg));
    }
    fs::create_directories(o.out_dir);
    for (std::size_t i = 0; i < cameras.size(); ++i) {
        const auto out = render(cloud, cameras[i], background, {16, o.workers});
        save_png(fs::path(o.out_dir) / frame_name(static_cast<int>(i)), out.image);
    }
    std::cout << "rendered " << cameras.size() << " frames to " << o.out_dir << '\n';
    return 0;
}

int cmd_train(const TrainOptions& o) {
    TrainConfig config;
    if (o.config) {
        if (!fs::exists(*o.config)) throw NotFound("config file not found: " + *o.config);
        config = service::parse_train_config(read_file(*o.config), config);
    }
    if (o.iterations) config.iterations = *o.iterations;
    if (o.seed) config.seed = *o.seed;
    if (o.downscale) config.downscale = *o.downscale;
    if (o.workers) config.workers = *o.workers;
    if (o.holdout_every) config.holdout_every = *o.holdout_every;
    config.validate();

    const auto dataset = load_dataset_directory(o.dataset, config.downscale);
    std::optional<SplatCloud> initial;
    if (o.init) initial = load_splat_ply(*o.init);
    const auto result = train(dataset, config, initial);

    fs::create_directories(o.out_dir);
    save_splat_ply(fs::path(o.out_dir) / "model.ply", result.cloud);
    const auto log = format_metrics_log(result.report);
    write_file(fs::path(o.out_dir) / "metrics.log", log);
    std::cout << log;
    const auto& last = result.report.final_checkpoint();
    std::cout << "splats: " << result.cloud.size() << '\n';
    std::cout << "final_psnr: " << fmt(last.train_psnr) << (last.saturated ? " (saturated)" : "") << '\n';
    if (result.report.holdout_views > 0) std::cout << "holdout_psnr: " << fmt(last.holdout_psnr) << '\n';
    return 0;
}

int cmd_bench(const BenchOptions& o) {
    const auto cloud = load_splat_ply(o.model);
    const auto res = parse_resolution(o.resolution);
    if (o.frames < 1) throw InvalidParameter("frames must be at least 1");
    if (o.warmup < 0) throw InvalidParameter("warmup must be non-negative");
    const auto cameras = orbit_cameras(default_orbit(cloud, o.frames), pinhole_intrinsics(res.width, res.height, 60.0));
    for (int i = 0; i < o.warmup; ++i) render(cloud, cameras[i % cameras.size()], Vec3::Zero(), {16, o.workers});
    std::vector<double> ms;
    for (const auto& camera : cameras) {
        const auto t0 = std::chrono::steady_clock::now();
        render(cloud, camera, Vec3::Zero(), {16, o.workers});
        ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
    }
    const double median = percentile(ms, 0.5);
    std::cout << "splats: " << cloud.size() << '\n'
              << "resolution: " << res.width << 'x' << res.height << '\n'
              << "frames: " << ms.size() << '\n'
              << "ms_median: " << fmt(median) << '\n'
              << "ms_p95: " << fmt(percentile(ms, 0.95)) << '\n'
              << "fps_median: " << fmt(1000.0 / std::max(median, 1e-6)) << '\n';
    return 0;
}

int cmd_serve(const ServeOptions& o) {
    // Signals are taken synchronously below; block them before any thread starts.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    auto config = service::load_service_config(
        o.config ? std::optional<fs::path>(*o.config) : std::nullopt, service::environment_overrides());
    if (o.listen) {
        const auto colon = o.listen->rfind(':');
        if (colon == std::string::npos) throw InvalidParameter("listen address must be host:port");
        config.host = o.listen->substr(0, colon);
        try {
            config.port = std::stoi(o.listen->substr(colon + 1));
        } catch (const std::logic_error&) {
            throw InvalidParameter("listen address has an invalid port: " + *o.listen);
        }
    }
    if (o.data_root) config.data_root = *o.data_root;
    config.validate();

    service::PipelineService svc(config);
    svc.start();
    std::cout << "listening on http://" << config.host << ':' << svc.port() << std::endl;
    int sig = 0;
    sigwait(&signals, &sig);
    std::cout << "shutting down" << std::endl;
    svc.stop();
    return 0;
}

int cmd_synth(const SynthOptions& o) {
    const auto res = parse_resolution(o.resolution);
    SyntheticSpec spec;
    spec.splats = o.splats;
    spec.views = o.views;
    spec.width = res.width;
    spec.height = res.height;
    spec.seed = o.seed;
    spec.position_noise = o.noise;
    const auto scene = make_synthetic_scene(spec);
    write_synthetic_dataset(o.out_dir, scene);
    std::cout << "wrote synthetic dataset with " << scene.truth.size() << " splats and "
              << scene.images.size() << " views to " << o.out_dir << '\n';
    return 0;
}

} // namespace splatcap::cli
