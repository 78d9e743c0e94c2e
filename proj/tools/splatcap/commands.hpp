// Copyright Contributors to the splatcap project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace splatcap::cli {

struct Resolution {
    int width = 0;
    int height = 0;
};

/// Parses "WxH" with both sides ≥ 1.
Resolution parse_resolution(const std::string& text);

struct InfoOptions {
    std::string model;
};

struct ConvertOptions {
    std::string input;
    std::string output;
    std::string format = "binary";
};

struct RenderOptions {
    std::string model;
    std::string out_dir;
    std::string resolution = "640x480";
    int frames = 1;
    double fov_deg = 60.0;
    std::optional<double> radius;
    std::optional<double> height;
    std::optional<std::string> center;
    std::string background = "0,0,0";
    std::optional<std::string> cameras; // COLMAP model for keyframe poses
    int workers = 1;
};

struct TrainOptions {
    std::string dataset;
    std::string out_dir;
    std::optional<int> iterations;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> config;
    std::optional<std::string> init;
    std::optional<int> downscale;
    std::optional<int> workers;
    std::optional<int> holdout_every;
};

struct BenchOptions {
    std::string model;
    std::string resolution = "640x480";
    int frames = 30;
    int warmup = 2;
    int workers = 1;
};

struct ServeOptions {
    std::optional<std::string> config;
    std::optional<std::string> listen;
    std::optional<std::string> data_root;
};

struct SynthOptions {
    std::string out_dir;
    int splats = 20;
    int views = 8;
    std::string resolution = "64x64";
    std::uint64_t seed = 7;
    double noise = 0.01;
};

int cmd_info(const InfoOptions& o);
int cmd_convert(const ConvertOptions& o);
int cmd_render(const RenderOptions& o);
int cmd_train(const TrainOptions& o);
int cmd_bench(const BenchOptions& o);
int cmd_serve(const ServeOptions& o);
int cmd_synth(const SynthOptions& o);

} // namespace splatcap::cli
