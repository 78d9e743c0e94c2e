// Copyright Contributors to the splatcap project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "splatcap/camera.hpp"
#include "splatcap/colmap.hpp"
#include "splatcap/image.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace splatcap {

struct TrainingView {
    std::string name;
    Camera camera;
    ImageBuffer image;
};

struct TrainingDataset {
    std::vector<TrainingView> views; // same order as the sparse model's images
    std::vector<SparsePoint> seed_points;
};

/// Scales intrinsics for an integer box-filter downscale. Pixel centers sit
/// at integer coordinates, so the principal point maps as (c + 0.5) / f - 0.5.
CameraIntrinsics downscale_intrinsics(const CameraIntrinsics& intrinsics, int factor);

/// Decodes every image of `sparse` from `image_dir` (concurrently, order
/// preserved). Fails atomically: NotFound names the first missing image,
/// DimensionMismatch names an image whose size disagrees with its camera.
TrainingDataset assemble_dataset(const SparseModel& sparse, const std::filesystem::path& image_dir,
                                 int downscale_factor = 1);

/// Dataset directory layout: `<root>/sparse` (or `<root>/sparse/0`) holds the
/// COLMAP model and `<root>/images` the frames; either falls back to `<root>`.
TrainingDataset load_dataset_directory(const std::filesystem::path& root, int downscale_factor = 1);

} // namespace splatcap
