// Copyright Contributors to the splatcap project
// SPDX-License-Identifier: Apache-2.0
//
#include "commands.hpp"

#include <CLI11.hpp>

#include <exception>
#include <functional>
#include <iostream>

using namespace splatcap::cli;

int main(int argc, char** argv) {
    CLI::App app{"splatcap: Gaussian splat capture, training and rendering"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "splatcap 0.1.0");
    std::function<int()> run;

    InfoOptions info;
    auto* c_info = app.add_subcommand("info", "Summarize a splat PLY file");
    c_info->add_option("model", info.model, "Splat PLY file")->required();
    c_info->callback([&] { run = [&] { return cmd_info(info); }; });

    ConvertOptions convert;
    auto* c_convert = app.add_subcommand("convert", "Convert a splat PLY between binary and ASCII");
    c_convert->add_option("input", convert.input, "Input PLY")->required();
    c_convert->add_option("output", convert.output, "Output PLY")->required();
    c_convert->add_option("--format", convert.format, "binary or ascii")->capture_default_str();
    c_convert->callback([&] { run = [&] { return cmd_convert(convert); }; });

    RenderOptions render;
    auto* c_render = app.add_subcommand("render", "Render PNG frames along an orbit or COLMAP poses");
    c_render->add_option("model", render.model, "Splat PLY file")->required();
    c_render->add_option("--out", render.out_dir, "Output directory")->required();
    c_render->add_option("--resolution", render.resolution, "Frame size WxH")->capture_default_str();
    c_render->add_option("--frames", render.frames, "Orbit frame count")->capture_default_str();
    c_render->add_option("--fov", render.fov_deg, "Horizontal field of view, degrees")->capture_default_str();
    c_render->add_option("--radius", render.radius, "Orbit radius");
    c_render->add_option("--height", render.height, "Orbit height above the center");
    c_render->add_option("--center", render.center, "Orbit center x,y,z");
    c_render->add_option("--background", render.background, "Background r,g,b in [0,1]")->capture_default_str();
    c_render->add_option("--cameras", render.cameras, "COLMAP sparse model whose poses to render");
    c_render->add_option("--workers", render.workers, "Render threads (0 = all cores)")->capture_default_str();
    c_render->callback([&] { run = [&] { return cmd_render(render); }; });

    TrainOptions train;
    auto* c_train = app.add_subcommand("train", "Train a splat model from a dataset directory");
    c_train->add_option("dataset", train.dataset, "Directory with sparse/ and images/")->required();
    c_train->add_option("--out", train.out_dir, "Output directory")->required();
    c_train->add_option("--iterations", train.iterations, "Optimization steps");
    c_train->add_option("--seed", train.seed, "RNG seed");
    c_train->add_option("--config", train.config, "JSON file of training parameters");
    c_train->add_option("--init", train.init, "Start from this PLY instead of the sparse points");
    c_train->add_option("--downscale", train.downscale, "Integer image downscale factor");
    c_train->add_option("--workers", train.workers, "Render threads (0 = all cores)");
    c_train->add_option("--holdout-every", train.holdout_every, "Hold out every k-th view for evaluation");
    c_train->callback([&] { run = [&] { return cmd_train(train); }; });

    BenchOptions bench;
    auto* c_bench = app.add_subcommand("bench", "Time rendering along an orbit");
    c_bench->add_option("model", bench.model, "Splat PLY file")->required();
    c_bench->add_option("--resolution", bench.resolution, "Frame size WxH")->capture_default_str();
    c_bench->add_option("--frames", bench.frames, "Timed frames")->capture_default_str();
    c_bench->add_option("--warmup", bench.warmup, "Untimed frames first")->capture_default_str();
    c_bench->add_option("--workers", bench.workers, "Render threads (0 = all cores)")->capture_default_str();
    c_bench->callback([&] { run = [&] { return cmd_bench(bench); }; });

    ServeOptions serve;
    auto* c_serve = app.add_subcommand("serve", "Run the capture processing service");
    c_serve->add_option("--config", serve.config, "Service configuration JSON");
    c_serve->add_option("--listen", serve.listen, "Listen address host:port");
    c_serve->add_option("--data-root", serve.data_root, "Job storage directory");
    c_serve->callback([&] { run = [&] { return cmd_serve(serve); }; });

    SynthOptions synth;
    auto* c_synth = app.add_subcommand("synth", "Write a synthetic dataset with known ground truth");
    c_synth->add_option("out", synth.out_dir, "Output directory")->required();
    c_synth->add_option("--splats", synth.splats, "Ground-truth splat count")->capture_default_str();
    c_synth->add_option("--views", synth.views, "Camera count")->capture_default_str();
    c_synth->add_option("--resolution", synth.resolution, "Image size WxH")->capture_default_str();
    c_synth->add_option("--seed", synth.seed, "RNG seed")->capture_default_str();
    c_synth->add_option("--noise", synth.noise, "Init position noise, fraction of scene extent")
        ->capture_default_str();
    c_synth->callback([&] { run = [&] { return cmd_synth(synth); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) { // --help, --version
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    try {
        return run();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
