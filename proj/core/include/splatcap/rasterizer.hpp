// Copyright Contributors to the splatcap project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "splatcap/camera.hpp"
#include "splatcap/gaussian.hpp"
#include "splatcap/image.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace splatcap {

inline constexpr double kCovarianceBlur = 0.3;       // px², added to cov2d diagonal
inline constexpr double kMaxSplatAlpha = 0.99;       // per-pixel contribution clamp
inline constexpr double kMinSplatAlpha = 1.0 / 255.0;
inline constexpr double kTransmittanceCutoff = 1e-4;

struct ProjectedSplat {
    Vec2 mean2d = Vec2::Zero();
    Mat2 cov2d = Mat2::Identity();
    Mat2 conic = Mat2::Identity(); // cov2d⁻¹
    double depth = 0.0;
    Vec3 rgb = Vec3::Zero();
    double alpha = 0.0;
    int radius = 0; // ceil(3·sqrt(λmax(cov2d)))
    // Inclusive pixel bounds of the region where alpha·G can reach 1/255.
    int x_min = 0, x_max = -1, y_min = 0, y_max = -1;
};

/// Per-splat render statistics; the gradient fields are filled by backward()
/// and summed over views by accumulate().
struct RenderStats {
    std::vector<std::uint8_t> visible;
    std::vector<double> max_radius;
    std::vector<double> grad_norm_sum; // Σ |∂L/∂mean2d| in normalized-device units
    std::vector<std::uint32_t> grad_count;

    explicit RenderStats(std::size_t n = 0)
        : visible(n, 0), max_radius(n, 0.0), grad_norm_sum(n, 0.0), grad_count(n, 0) {}

    std::size_t size() const noexcept { return visible.size(); }

    /// Adds `frame` into this accumulator (radius takes the max).
    void accumulate(const RenderStats& frame);
};

struct RenderOptions {
    int tile_size = 16;
    int workers = 1; // 0 = hardware concurrency; output is identical for any value
};

struct RenderOutput {
    ImageBuffer image;
    RenderStats stats;
};

/// Projects one splat. Returns nullopt when it lies at or in front of the
/// near plane or its footprint misses the image.
std::optional<ProjectedSplat> project_splat(const Splat& splat, const Camera& camera,
                                            int sh_degree);

/// Stable ascending sort by depth; returns the permutation (indices into the input).
std::vector<std::uint32_t> depth_sort(std::span<const double> depths);

/// Tiled forward renderer. Throws InvalidParameter for a zero-sized image.
RenderOutput render(const SplatCloud& cloud, const Camera& camera, const Vec3& background,
                    const RenderOptions& options = {});

/// Brute-force oracle: every pixel composites every depth-sorted splat in
/// front of the near plane. Same per-pixel arithmetic as render().
ImageBuffer render_reference(const SplatCloud& cloud, const Camera& camera,
                             const Vec3& background);

} // namespace splatcap
