// Copyright Contributors to the splatcap project
// SPDX-License-Identifier: Apache-2.0
//
#include "splatcap/backward.hpp"

#include "raster_internal.hpp"
#include "splatcap/error.hpp"
#include "splatcap/metrics.hpp"
#include "splatcap/parallel.hpp"

#include <cmath>

namespace splatcap {

namespace {

/// Screen-space gradients of one splat, accumulated over pixels.
struct ScreenGradient {
    Vec2 mean2d = Vec2::Zero();
    Mat2 conic = Mat2::Zero(); // full-matrix form, symmetric
    Vec3 rgb = Vec3::Zero();
    double alpha = 0.0;

    void add(const ScreenGradient& o) {
        mean2d += o.mean2d;
        conic += o.conic;
        rgb += o.rgb;
        alpha += o.alpha;
    }
};

struct Contribution {
    std::uint32_t index; // position in Frame::packed
    double g;
    double gaussian;
    bool clamped;
    double transmittance; // before this splat
};

/// ∂L/∂q for q = (w, x, y, z) given ∂L/∂R, through normalization.
Vec4 rotation_backward(const Vec4& q_raw, const Mat3& d_rot) {
    const double norm = q_raw.norm();
    const Vec4 q = q_raw / norm;
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    const auto& g = d_rot;
    Vec4 dq;
    dq[0] = 2.0 * (-z * g(0, 1) + y * g(0, 2) + z * g(1, 0) - x * g(1, 2) - y * g(2, 0) + x * g(2, 1));
    dq[1] = 2.0 * (y * g(0, 1) + z * g(0, 2) + y * g(1, 0) - 2.0 * x * g(1, 1) - w * g(1, 2) +
                   z * g(2, 0) + w * g(2, 1) - 2.0 * x * g(2, 2));
    dq[2] = 2.0 * (-2.0 * y * g(0, 0) + x * g(0, 1) + w * g(0, 2) + x * g(1, 0) + z * g(1, 2) -
                   w * g(2, 0) + z * g(2, 1) - 2.0 * y * g(2, 2));
    dq[3] = 2.0 * (-2.0 * z * g(0, 0) - w * g(0, 1) + x * g(0, 2) + w * g(1, 0) - 2.0 * z * g(1, 1) +
                   y * g(1, 2) + x * g(2, 0) + y * g(2, 1));
    return (dq - q * q.dot(dq)) / norm;
}

/// Propagates screen-space gradients of one splat back to its parameters.
SplatGradient project_backward(const Splat& splat, const detail::ProjectionContext& ctx,
                               const ScreenGradient& sg, const Camera& camera, int sh_degree) {
    SplatGradient grad;
    grad.rotation.setZero();
    const auto& p = ctx.projected;
    const auto& k = camera.intrinsics;

    // Opacity.
    grad.opacity_logit = sg.alpha * p.alpha * (1.0 - p.alpha);

    // Color: SH coefficients and the view direction.
    const double dist = ctx.view_vec.norm();
    const Vec3 dir = dist > 0.0 ? Vec3(ctx.view_vec / dist) : Vec3(0.0, 0.0, 1.0);
    const auto basis = sh_basis(dir, sh_degree);
    const auto basis_grad = sh_basis_gradient(dir, sh_degree);
    const int ncoeff = sh_coeffs_for_degree(sh_degree);
    Vec3 d_dir = Vec3::Zero();
    for (int c = 0; c < 3; ++c) {
        if (ctx.rgb_clamped[c]) continue;
        for (int i = 0; i < ncoeff; ++i) {
            grad.sh(c, i) = sg.rgb[c] * basis[i];
            d_dir += (sg.rgb[c] * splat.sh(c, i)) * basis_grad[i];
        }
    }
    Vec3 d_position = Vec3::Zero();
    if (dist > 0.0) {
        d_position += (d_dir - dir * dir.dot(d_dir)) / dist;
    }

    // Conic -> 2D covariance: d(Σ⁻¹) = −Σ⁻¹ dΣ Σ⁻¹.
    const Mat2 d_cov2d = -p.conic * sg.conic * p.conic;

    // 2D covariance -> 3D covariance and Jacobian; cov2d = T Σ Tᵀ, T = J W.
    const Eigen::Matrix<double, 2, 3> t = ctx.jacobian * camera.rotation;
    const Mat3 d_cov3d = t.transpose() * d_cov2d * t;
    const Eigen::Matrix<double, 2, 3> d_t = 2.0 * d_cov2d * t * ctx.cov3d;
    const Eigen::Matrix<double, 2, 3> d_j = d_t * camera.rotation.transpose();

    // Camera-space position via the mean and the Jacobian.
    const double x = ctx.cam_pos.x(), y = ctx.cam_pos.y(), z = ctx.cam_pos.z();
    const double inv_z = 1.0 / z, inv_z2 = inv_z * inv_z, inv_z3 = inv_z2 * inv_z;
    Vec3 d_cam;
    d_cam.x() = sg.mean2d.x() * k.fx * inv_z - d_j(0, 2) * k.fx * inv_z2;
    d_cam.y() = sg.mean2d.y() * k.fy * inv_z - d_j(1, 2) * k.fy * inv_z2;
    d_cam.z() = -sg.mean2d.x() * k.fx * x * inv_z2 - sg.mean2d.y() * k.fy * y * inv_z2 -
                d_j(0, 0) * k.fx * inv_z2 + d_j(0, 2) * 2.0 * k.fx * x * inv_z3 -
                d_j(1, 1) * k.fy * inv_z2 + d_j(1, 2) * 2.0 * k.fy * y * inv_z3;
    d_position += camera.rotation.transpose() * d_cam;
    grad.position = d_position;

    // 3D covariance -> scale and rotation; Σ = M Mᵀ, M = R S.
    const Mat3 m = ctx.rotation * ctx.scale.asDiagonal();
    const Mat3 d_m = 2.0 * d_cov3d * m;
    for (int i = 0; i < 3; ++i) {
        const double d_scale = d_m.col(i).dot(ctx.rotation.col(i));
        grad.log_scale[i] = d_scale * ctx.scale[i];
    }
    const Mat3 d_rot = d_m * ctx.scale.asDiagonal();
    grad.rotation = rotation_backward(splat.rotation, d_rot);
    return grad;
}

} // namespace

BackwardResult backward(const SplatCloud& cloud, const Camera& camera, const ImageBuffer& target,
                        const LossConfig& config, const RenderOptions& options) {
    const auto frame = detail::prepare_frame(cloud, camera, options);
    const int width = camera.width();
    const int height = camera.height();
    if (target.width() != width || target.height() != height) {
        throw DimensionMismatch("target image does not match the camera resolution");
    }
    const std::size_t n = cloud.size();
    const std::size_t tile_count = static_cast<std::size_t>(frame.tiles_x) * frame.tiles_y;
    const int workers = std::max(1, std::min<int>(resolve_workers(options.workers),
                                                  static_cast<int>(std::max<std::size_t>(tile_count, 1))));
    const Vec3 background = config.background;

    BackwardResult result;
    result.image = ImageBuffer(width, height);
    result.stats = RenderStats(n);
    for (const auto idx : frame.order) {
        result.stats.visible[idx] = 1;
        result.stats.max_radius[idx] = frame.contexts[idx]->projected.radius;
    }

    auto tile_bounds = [&](std::size_t tile) {
        const int tx = static_cast<int>(tile % frame.tiles_x);
        const int ty = static_cast<int>(tile / frame.tiles_x);
        const int x0 = tx * frame.tile_size;
        const int y0 = ty * frame.tile_size;
        return std::array<int, 4>{x0, y0, std::min(width, x0 + frame.tile_size),
                                  std::min(height, y0 + frame.tile_size)};
    };

    // Forward pass, identical arithmetic to render().
    parallel_for(tile_count, workers, [&](int, std::size_t tile) {
        const auto [x0, y0, x1, y1] = tile_bounds(tile);
        const auto begin = frame.tile_entries.begin() + frame.tile_offsets[tile];
        const auto end = frame.tile_entries.begin() + frame.tile_offsets[tile + 1];
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
                result.image.set_pixel(px, py, color + t * background);
            }
        }
    });

    const auto loss = photometric_loss_with_gradient(result.image, target, config.lambda_dssim);
    result.loss = loss.value;

    // Reverse traversal. Each worker owns a private accumulator; they are
    // summed in worker order, so results depend only on the worker count.
    std::vector<std::vector<ScreenGradient>> partial(workers, std::vector<ScreenGradient>(n));
    parallel_for(tile_count, workers, [&](int worker, std::size_t tile) {
        auto& acc = partial[worker];
        const auto [x0, y0, x1, y1] = tile_bounds(tile);
        const auto begin = frame.tile_entries.begin() + frame.tile_offsets[tile];
        const auto end = frame.tile_entries.begin() + frame.tile_offsets[tile + 1];
        std::vector<Contribution> contributions;
        for (int py = y0; py < y1; ++py) {
            for (int px = x0; px < x1; ++px) {
                contributions.clear();
                double t = 1.0;
                for (auto it = begin; it != end; ++it) {
                    const auto& s = frame.packed[*it];
                    if (px < s.x_min || px > s.x_max || py < s.y_min || py > s.y_max) continue;
                    bool skip;
                    const auto w = detail::pixel_weight(s, px, py, skip);
                    if (skip || w.g < kMinSplatAlpha) continue;
                    contributions.push_back({*it, w.g, w.gaussian, w.clamped, t});
                    t *= 1.0 - w.g;
                    if (t < kTransmittanceCutoff) break;
                }
                const Vec3 d_pixel = loss.d_rendered.pixel(px, py);
                Vec3 behind = background; // color composited behind the current splat
                for (auto c = contributions.rbegin(); c != contributions.rend(); ++c) {
                    const auto& s = frame.packed[c->index];
                    auto& sg = acc[s.index];
                    sg.rgb += (c->transmittance * c->g) * d_pixel;
                    const double d_g = c->transmittance * d_pixel.dot(s.rgb - behind);
                    behind = c->g * s.rgb + (1.0 - c->g) * behind;
                    if (c->clamped) continue;
                    sg.alpha += d_g * c->gaussian;
                    const double d_gauss = d_g * s.alpha;
                    const Vec2 d(px - s.mx, py - s.my);
                    const double scale = d_gauss * c->gaussian;
                    sg.mean2d += scale * Vec2(s.ca * d.x() + s.cb * d.y(), s.cb * d.x() + s.cc * d.y());
                    sg.conic += (-0.5 * scale) * (d * d.transpose());
                }
            }
        }
    });
    std::vector<ScreenGradient> screen(n);
    for (const auto& part : partial) {
        for (const auto idx : frame.order) screen[idx].add(part[idx]);
    }

    result.gradients.assign(n, SplatGradient{});
    for (auto& g : result.gradients) g.rotation.setZero();
    parallel_for(frame.order.size(), resolve_workers(options.workers), [&](int, std::size_t k) {
        const auto idx = frame.order[k];
        const auto& sg = screen[idx];
        result.gradients[idx] =
            project_backward(cloud.splats[idx], *frame.contexts[idx], sg, camera, cloud.active_sh_degree);
        const Vec2 ndc(sg.mean2d.x() * 0.5 * width, sg.mean2d.y() * 0.5 * height);
        result.stats.grad_norm_sum[idx] = ndc.norm();
        result.stats.grad_count[idx] = 1;
    });
    return result;
}

} // namespace splatcap
