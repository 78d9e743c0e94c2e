// Copyright Contributors to the splatcap project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "splatcap/gaussian.hpp"
#include "splatcap/rasterizer.hpp"
#include "splatcap/rng.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace splatcap {

struct DensifyConfig {
    double grad_threshold = 2e-4;          // mean |∂L/∂mean2d| in normalized-device units
    double percent_dense = 0.01;           // clone/split boundary as a fraction of scene extent
    double split_factor = 1.6;
    double prune_opacity = 0.005;
    bool prune_large = false;              // enables the two size caps below
    double max_screen_radius = 20.0;       // px
    double max_world_scale_fraction = 0.1; // of scene extent
};

struct DensifyResult {
    SplatCloud cloud;
    /// For output splat i: the input index it was kept from, or -1 for a new splat.
    std::vector<std::int64_t> source;
    RenderStats stats; // reset, sized to the new cloud
    std::size_t cloned = 0;
    std::size_t split = 0;
    std::size_t pruned = 0;
};

/// Applies clone, split and prune rules to `cloud` using statistics
/// accumulated since the previous call. `position_grad_sum` holds the summed
/// world-space position gradients (may be empty; clones are then not offset).
/// Output order: surviving input splats in input order, then new splats in
/// the order their parents appear. Split sampling draws three normals per
/// child from `rng`, parents in index order.
DensifyResult densify_and_prune(const SplatCloud& cloud, const RenderStats& stats,
                                std::span<const Vec3> position_grad_sum, const DensifyConfig& config,
                                double scene_extent, Rng& rng);

/// Clamps every opacity logit to at most logit(max_opacity).
void reset_opacity(SplatCloud& cloud, double max_opacity = 0.01);

} // namespace splatcap
