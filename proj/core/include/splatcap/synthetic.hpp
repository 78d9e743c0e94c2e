// Copyright Contributors to the splatcap project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "splatcap/colmap.hpp"
#include "splatcap/gaussian.hpp"
#include "splatcap/image.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace splatcap {

/// Known-answer scene: a random splat cloud seen from an orbit of cameras.
struct SyntheticSpec {
    int splats = 20;
    int views = 8;
    int width = 64;
    int height = 64;
    std::uint64_t seed = 7;
    double position_noise = 0.01; // σ of the init perturbation, fraction of scene extent
    double orbit_radius = 3.0;
    double orbit_height = 0.8;
    double fov_deg = 60.0;
};

struct SyntheticScene {
    SplatCloud truth;
    SplatCloud perturbed; // truth with jittered positions
    SparseModel sparse;   // one PINHOLE camera, one image per view, one point per splat
    std::vector<ImageBuffer> images; // 8-bit quantized renders of `truth`, in view order
    double extent = 0.0;
};

/// Deterministic for a given spec. Views are rendered on a black background
/// from the cameras exactly as read back from `sparse`.
SyntheticScene make_synthetic_scene(const SyntheticSpec& spec);

/// Writes `images/view_NNN.png`, `sparse/{cameras,images,points3D}.bin`,
/// `truth.ply` and `init.ply` below `root`.
void write_synthetic_dataset(const std::filesystem::path& root, const SyntheticScene& scene);

} // namespace splatcap
