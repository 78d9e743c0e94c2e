// Copyright Contributors to the splatcap project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "splatcap/trainer.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace splatcap::service {

inline constexpr std::size_t kMinFrames = 8;

struct ServiceConfig {
    std::string host = "127.0.0.1";
    int port = 8080; // 0 picks a free port
    std::filesystem::path data_root = "splatcap-data";
    int workers = 1;
    std::string frame_extractor =
        "ffmpeg -hide_banner -loglevel error -i {input} -vf fps={fps} {output}/frame_%05d.png";
    std::string sfm =
        "colmap automatic_reconstructor --workspace_path {output} --image_path {input} "
        "--sparse 1 --dense 0 && mv {output}/sparse/0/* {output}/";
    double fps = 2.0;
    std::uint64_t max_upload_bytes = std::uint64_t{512} << 20;
    int stage_timeout_s = 1800;
    TrainConfig train;

    /// Throws InvalidParameter naming the offending field.
    void validate() const;

    std::string listen_address() const { return host + ":" + std::to_string(port); }
};

/// Applies the keys of a JSON object onto `base`. Keys match TrainConfig
/// field names; `background` is a 3-element array. Unknown keys are errors.
TrainConfig parse_train_config(std::string_view json_text, TrainConfig base = {});

std::string train_config_to_json(const TrainConfig& config);

/// Builds a config from defaults, then the optional JSON file, then the
/// environment. Variables are `SPLATCAP_<KEY>` for top-level keys and
/// `SPLATCAP_TRAIN_<KEY>` for train fields, with the key uppercased; values
/// that parse as JSON are taken as such, anything else as a string.
ServiceConfig load_service_config(const std::optional<std::filesystem::path>& file,
                                  const std::map<std::string, std::string>& env);

/// The `SPLATCAP_*` subset of the process environment.
std::map<std::string, std::string> environment_overrides();

} // namespace splatcap::service
