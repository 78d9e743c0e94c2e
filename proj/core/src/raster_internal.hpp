// Copyright Contributors to the splatcap project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "splatcap/rasterizer.hpp"

#include <cmath>

namespace splatcap::detail {

/// Projection plus the intermediate quantities backward() needs.
struct ProjectionContext {
    ProjectedSplat projected;
    Vec3 cam_pos = Vec3::Zero();   // camera-space mean
    Vec3 view_vec = Vec3::Zero();  // world mean - camera center (unnormalized)
    Eigen::Matrix<double, 2, 3> jacobian = Eigen::Matrix<double, 2, 3>::Zero();
    Mat3 cov3d = Mat3::Zero();
    Mat3 rotation = Mat3::Identity(); // of the normalized quaternion
    Vec3 scale = Vec3::Ones();
    std::array<bool, 3> rgb_clamped{};
};

/// Near-plane culling only; computes the footprint but does not clip it.
std::optional<ProjectionContext> project_with_context(const Splat& splat, const Camera& camera,
                                                      int sh_degree);

/// The fields compositing reads, packed contiguously in depth order.
struct PackedSplat {
    double mx, my;              // mean2d
    double ca, cb, cc;          // conic (0,0), (0,1), (1,1)
    double alpha;
    double min_power;           // below this exponent alpha·G < 1/255
    Vec3 rgb;
    int x_min, x_max, y_min, y_max;
    std::uint32_t index;        // cloud index
};

/// Sorted, binned frame ready for compositing.
struct Frame {
    std::vector<std::optional<ProjectionContext>> contexts; // per cloud index
    std::vector<std::uint32_t> order;                       // visible indices, depth sorted
    std::vector<PackedSplat> packed;                        // parallel to `order`
    int tile_size = 16;
    int tiles_x = 0;
    int tiles_y = 0;
    std::vector<std::uint32_t> tile_offsets; // CSR over tiles
    std::vector<std::uint32_t> tile_entries; // positions in `packed`, ascending (depth order)
};

Frame prepare_frame(const SplatCloud& cloud, const Camera& camera, const RenderOptions& options);

/// Gaussian falloff term and clamped per-pixel contribution.
struct PixelWeight {
    double gaussian; // G = exp(-½ dᵀ conic d)
    double g;        // min(0.99, alpha·G)
    bool clamped;    // alpha·G exceeded 0.99
};

inline PixelWeight pixel_weight(const ProjectedSplat& s, double px, double py) {
    const double dx = px - s.mean2d.x();
    const double dy = py - s.mean2d.y();
    const double power =
        -0.5 * (s.conic(0, 0) * dx * dx + 2.0 * s.conic(0, 1) * dx * dy + s.conic(1, 1) * dy * dy);
    const double gaussian = std::exp(power);
    const double raw = s.alpha * gaussian;
    return {gaussian, std::min(kMaxSplatAlpha, raw), raw > kMaxSplatAlpha};
}

/// Same arithmetic as the ProjectedSplat overload. `skip` is set, and the
/// exponential avoided, only when the result is certain to fall below 1/255.
inline PixelWeight pixel_weight(const PackedSplat& s, double px, double py, bool& skip) {
    const double dx = px - s.mx;
    const double dy = py - s.my;
    const double power = -0.5 * (s.ca * dx * dx + 2.0 * s.cb * dx * dy + s.cc * dy * dy);
    skip = power < s.min_power;
    if (skip) return {0.0, 0.0, false};
    const double gaussian = std::exp(power);
    const double raw = s.alpha * gaussian;
    return {gaussian, std::min(kMaxSplatAlpha, raw), raw > kMaxSplatAlpha};
}

} // namespace splatcap::detail
