// Copyright Contributors to the splatcap project
// SPDX-License-Identifier: Apache-2.0
//
#include "splatcap/rasterizer.hpp"

#include "raster_internal.hpp"
#include "splatcap/error.hpp"
#include "splatcap/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace splatcap {

void RenderStats::accumulate(const RenderStats& frame) {
    if (frame.size() != size()) {
        throw InvalidParameter("render stats size mismatch");
    }
    for (std::size_t i = 0; i < size(); ++i) {
        visible[i] = visible[i] | frame.visible[i];
        max_radius[i] = std::max(max_radius[i], frame.max_radius[i]);
        grad_norm_sum[i] += frame.grad_norm_sum[i];
        grad_count[i] += frame.grad_count[i];
    }
}

namespace detail {

std::optional<ProjectionContext> project_with_context(const Splat& splat, const Camera& camera,
                                                      int sh_degree) {
    ProjectionContext ctx;
    ctx.cam_pos = camera.rotation * splat.position + camera.translation;
    const double z = ctx.cam_pos.z();
    if (!(z > camera.near_plane)) {
        return std::nullopt;
    }
    const auto& k = camera.intrinsics;
    const double x = ctx.cam_pos.x();
    const double y = ctx.cam_pos.y();
    auto& p = ctx.projected;
    p.depth = z;
    p.mean2d = Vec2(k.fx * x / z + k.cx, k.fy * y / z + k.cy);

    ctx.rotation = quaternion_to_rotation(splat.rotation);
    ctx.scale = splat.log_scale.array().exp();
    const Mat3 m = ctx.rotation * ctx.scale.asDiagonal();
    ctx.cov3d = m * m.transpose();

    const double inv_z = 1.0 / z;
    const double inv_z2 = inv_z * inv_z;
    ctx.jacobian << k.fx * inv_z, 0.0, -k.fx * x * inv_z2, 0.0, k.fy * inv_z, -k.fy * y * inv_z2;
    const Eigen::Matrix<double, 2, 3> t = ctx.jacobian * camera.rotation;
    p.cov2d = t * ctx.cov3d * t.transpose();
    p.cov2d(1, 0) = p.cov2d(0, 1);
    p.cov2d(0, 0) += kCovarianceBlur;
    p.cov2d(1, 1) += kCovarianceBlur;

    const double det = p.cov2d(0, 0) * p.cov2d(1, 1) - p.cov2d(0, 1) * p.cov2d(0, 1);
    if (!(det > 0.0) || !std::isfinite(det)) {
        return std::nullopt;
    }
    p.conic << p.cov2d(1, 1) / det, -p.cov2d(0, 1) / det, -p.cov2d(0, 1) / det, p.cov2d(0, 0) / det;

    const double mid = 0.5 * (p.cov2d(0, 0) + p.cov2d(1, 1));
    const double lambda_max = mid + std::sqrt(std::max(0.0, mid * mid - det));
    p.radius = static_cast<int>(std::ceil(3.0 * std::sqrt(lambda_max)));

    ctx.view_vec = splat.position - camera.center();
    const double dist = ctx.view_vec.norm();
    const Vec3 dir = dist > 0.0 ? Vec3(ctx.view_vec / dist) : Vec3(0.0, 0.0, 1.0);
    const auto basis = sh_basis(dir, sh_degree);
    const int n = sh_coeffs_for_degree(sh_degree);
    for (int c = 0; c < 3; ++c) {
        double acc = 0.5;
        for (int i = 0; i < n; ++i) acc += splat.sh(c, i) * basis[i];
        ctx.rgb_clamped[c] = acc < 0.0;
        p.rgb[c] = std::max(acc, 0.0);
    }
    p.alpha = activate_opacity(splat.opacity_logit);

    // Footprint: all pixels where alpha·G ≥ 1/255, i.e. dᵀ conic d ≤ 2·ln(255·alpha).
    const double level = 2.0 * std::log(p.alpha / kMinSplatAlpha);
    if (!(level >= 0.0)) {
        p.x_min = 0;
        p.x_max = -1;
        p.y_min = 0;
        p.y_max = -1;
        return ctx;
    }
    const double pad = 1e-6;
    const double hx = std::sqrt(level * p.cov2d(0, 0)) * (1.0 + pad) + pad;
    const double hy = std::sqrt(level * p.cov2d(1, 1)) * (1.0 + pad) + pad;
    constexpr double kLimit = 1 << 30;
    p.x_min = static_cast<int>(std::clamp(std::floor(p.mean2d.x() - hx), -kLimit, kLimit));
    p.x_max = static_cast<int>(std::clamp(std::ceil(p.mean2d.x() + hx), -kLimit, kLimit));
    p.y_min = static_cast<int>(std::clamp(std::floor(p.mean2d.y() - hy), -kLimit, kLimit));
    p.y_max = static_cast<int>(std::clamp(std::ceil(p.mean2d.y() + hy), -kLimit, kLimit));
    return ctx;
}

namespace {

bool footprint_hits_image(const ProjectedSplat& p, int width, int height) {
    return p.x_max >= 0 && p.y_max >= 0 && p.x_min <= width - 1 && p.y_min <= height - 1 &&
           p.x_min <= p.x_max && p.y_min <= p.y_max;
}

} // namespace

Frame prepare_frame(const SplatCloud& cloud, const Camera& camera, const RenderOptions& options) {
    validate(camera);
    if (options.tile_size < 1) throw InvalidParameter("tile size must be positive");
    Frame frame;
    const int width = camera.width();
    const int height = camera.height();
    frame.tile_size = options.tile_size;
    frame.tiles_x = (width + options.tile_size - 1) / options.tile_size;
    frame.tiles_y = (height + options.tile_size - 1) / options.tile_size;

    const std::size_t n = cloud.size();
    frame.contexts.resize(n);
    parallel_for(n, resolve_workers(options.workers), [&](int, std::size_t i) {
        auto ctx = project_with_context(cloud.splats[i], camera, cloud.active_sh_degree);
        if (ctx && footprint_hits_image(ctx->projected, width, height)) {
            frame.contexts[i] = std::move(ctx);
        }
    });

    std::vector<std::uint32_t> visible;
    std::vector<double> depths;
    for (std::size_t i = 0; i < n; ++i) {
        if (frame.contexts[i]) {
            visible.push_back(static_cast<std::uint32_t>(i));
            depths.push_back(frame.contexts[i]->projected.depth);
        }
    }
    const auto perm = depth_sort(depths);
    frame.order.resize(perm.size());
    frame.packed.resize(perm.size());
    for (std::size_t i = 0; i < perm.size(); ++i) {
        const auto idx = visible[perm[i]];
        frame.order[i] = idx;
        const auto& p = frame.contexts[idx]->projected;
        // The margin keeps the shortcut away from the exact 1/255 boundary.
        const double min_power = std::log(kMinSplatAlpha / p.alpha) - 1e-6;
        frame.packed[i] = {p.mean2d.x(), p.mean2d.y(), p.conic(0, 0), p.conic(0, 1), p.conic(1, 1),
                           p.alpha,      min_power,    p.rgb,        p.x_min,      p.x_max,
                           p.y_min,      p.y_max,      idx};
    }

    // Bin into tiles (CSR); traversal in depth order keeps every tile list sorted.
    const std::size_t tile_count = static_cast<std::size_t>(frame.tiles_x) * frame.tiles_y;
    std::vector<std::uint32_t> counts(tile_count + 1, 0);
    auto tile_range = [&](const ProjectedSplat& p) {
        const int tx0 = std::max(0, p.x_min) / options.tile_size;
        const int tx1 = std::min(width - 1, p.x_max) / options.tile_size;
        const int ty0 = std::max(0, p.y_min) / options.tile_size;
        const int ty1 = std::min(height - 1, p.y_max) / options.tile_size;
        return std::array<int, 4>{tx0, tx1, ty0, ty1};
    };
    for (const auto idx : frame.order) {
        const auto [tx0, tx1, ty0, ty1] = tile_range(frame.contexts[idx]->projected);
        for (int ty = ty0; ty <= ty1; ++ty) {
            for (int tx = tx0; tx <= tx1; ++tx) ++counts[static_cast<std::size_t>(ty) * frame.tiles_x + tx + 1];
        }
    }
    std::partial_sum(counts.begin(), counts.end(), counts.begin());
    frame.tile_offsets = counts;
    frame.tile_entries.resize(counts.back());
    std::vector<std::uint32_t> cursor(counts.begin(), counts.end() - 1);
    for (std::uint32_t pos = 0; pos < frame.order.size(); ++pos) {
        const auto [tx0, tx1, ty0, ty1] = tile_range(frame.contexts[frame.order[pos]]->projected);
        for (int ty = ty0; ty <= ty1; ++ty) {
            for (int tx = tx0; tx <= tx1; ++tx) {
                frame.tile_entries[cursor[static_cast<std::size_t>(ty) * frame.tiles_x + tx]++] = pos;
            }
        }
    }
    return frame;
}

} // namespace detail

std::optional<ProjectedSplat> project_splat(const Splat& splat, const Camera& camera, int sh_degree) {
    auto ctx = detail::project_with_context(splat, camera, sh_degree);
    if (!ctx || !detail::footprint_hits_image(ctx->projected, camera.width(), camera.height())) {
        return std::nullopt;
    }
    return ctx->projected;
}

std::vector<std::uint32_t> depth_sort(std::span<const double> depths) {
    std::vector<std::uint32_t> order(depths.size());
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return depths[a] < depths[b]; });
    return order;
}

RenderOutput render(const SplatCloud& cloud, const Camera& camera, const Vec3& background,
                    const RenderOptions& options) {
    const auto frame = detail::prepare_frame(cloud, camera, options);
    const int width = camera.width();
    const int height = camera.height();

    RenderOutput out{ImageBuffer(width, height), RenderStats(cloud.size())};
    for (const auto idx : frame.order) {
        out.stats.visible[idx] = 1;
        out.stats.max_radius[idx] = frame.contexts[idx]->projected.radius;
    }

    const std::size_t tile_count = static_cast<std::size_t>(frame.tiles_x) * frame.tiles_y;
    parallel_for(tile_count, resolve_workers(options.workers), [&](int, std::size_t tile) {
        const int tx = static_cast<int>(tile % frame.tiles_x);
        const int ty = static_cast<int>(tile / frame.tiles_x);
        const auto begin = frame.tile_entries.begin() + frame.tile_offsets[tile];
        const auto end = frame.tile_entries.begin() + frame.tile_offsets[tile + 1];
        const int x0 = tx * frame.tile_size;
        const int y0 = ty * frame.tile_size;
        const int x1 = std::min(width, x0 + frame.tile_size);
        const int y1 = std::min(height, y0 + frame.tile_size);
        for (int py = y0; py < y1; ++py) {
            for (int px = x0; px < x1; ++px) {
                double t = 1.0;
                Vec3 color = Vec3::Zero();
                for (auto it = begin; it != end; ++it) {
                    const auto& s = frame.packed[*it];
                    if (px < s.x_min || px > s.x_max || py < s.y_min || py > s.y_max) continue;
                    bool skip;
                    const auto w = detail::pixel_weight(s, px, py, skip);
                    if (skip || w.g < kMinSplatAlpha) continue;
                    color += (t * w.g) * s.rgb;
                    t *= 1.0 - w.g;
                    if (t < kTransmittanceCutoff) break;
                }
                out.image.set_pixel(px, py, color + t * background);
            }
        }
    });
    return out;
}

ImageBuffer render_reference(const SplatCloud& cloud, const Camera& camera, const Vec3& background) {
    validate(camera);
    std::vector<ProjectedSplat> projected;
    for (const auto& splat : cloud.splats) {
        if (auto ctx = detail::project_with_context(splat, camera, cloud.active_sh_degree)) {
            projected.push_back(ctx->projected);
        }
    }
    std::vector<double> depths(projected.size());
    std::transform(projected.begin(), projected.end(), depths.begin(),
                   [](const ProjectedSplat& p) { return p.depth; });
    const auto order = depth_sort(depths);

    ImageBuffer image(camera.width(), camera.height());
    for (int py = 0; py < camera.height(); ++py) {
        for (int px = 0; px < camera.width(); ++px) {
            double t = 1.0;
            Vec3 color = Vec3::Zero();
            for (const auto idx : order) {
                const auto w = detail::pixel_weight(projected[idx], px, py);
                if (w.g < kMinSplatAlpha) continue;
                color += (t * w.g) * projected[idx].rgb;
                t *= 1.0 - w.g;
                if (t < kTransmittanceCutoff) break;
            }
            image.set_pixel(px, py, color + t * background);
        }
    }
    return image;
}

} // namespace splatcap
