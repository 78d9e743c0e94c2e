// Copyright Contributors to the splatcap project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "splatcap/camera.hpp"
#include "splatcap/gaussian.hpp"
#include "splatcap/image.hpp"
#include "splatcap/rasterizer.hpp"

#include <vector>

namespace splatcap {

struct LossConfig {
    double lambda_dssim = 0.2;
    Vec3 background = Vec3::Zero();
};

/// Gradients use the Splat layout: each field holds ∂loss/∂(that field).
using SplatGradient = Splat;

struct BackwardResult {
    double loss = 0.0;
    ImageBuffer image;                    // the forward render
    std::vector<SplatGradient> gradients; // one per splat, zero when not visible
    RenderStats stats;                    // this view only; grad fields populated
};

/// Renders `cloud` from `camera`, evaluates the photometric loss against
/// `target` and back-propagates analytically to every splat parameter.
/// Per-pixel forward state is recomputed during the reverse traversal.
BackwardResult backward(const SplatCloud& cloud, const Camera& camera, const ImageBuffer& target,
                        const LossConfig& config, const RenderOptions& options = {});

} // namespace splatcap
