// Copyright Contributors to the splatcap project
// SPDX-License-Identifier: Apache-2.0
//
#include "splatcap/densify.hpp"

#include "splatcap/error.hpp"

#include <algorithm>
#include <cmath>

namespace splatcap {

DensifyResult densify_and_prune(const SplatCloud& cloud, const RenderStats& stats,
                                std::span<const Vec3> position_grad_sum, const DensifyConfig& config,
                                double scene_extent, Rng& rng) {
    const std::size_t n = cloud.size();
    if (stats.size() != n) throw InvalidParameter("densify: stats do not match the cloud");
    if (!position_grad_sum.empty() && position_grad_sum.size() != n) {
        throw InvalidParameter("densify: gradient sums do not match the cloud");
    }
    if (!(config.split_factor > 0.0)) throw InvalidParameter("densify: split factor must be positive");

    DensifyResult out;
    out.cloud.active_sh_degree = cloud.active_sh_degree;
    std::vector<Splat> added;
    const double size_boundary = config.percent_dense * scene_extent;
    const double log_split = std::log(config.split_factor);

    for (std::size_t i = 0; i < n; ++i) {
        const Splat& s = cloud.splats[i];
        const double max_scale = std::exp(s.log_scale.maxCoeff());
        bool prune = activate_opacity(s.opacity_logit) < config.prune_opacity;
        if (config.prune_large) {
            prune = prune || stats.max_radius[i] > config.max_screen_radius ||
                    max_scale > config.max_world_scale_fraction * scene_extent;
        }
        if (prune) {
            ++out.pruned;
            continue;
        }
        const double mean_grad =
            stats.grad_count[i] > 0 ? stats.grad_norm_sum[i] / stats.grad_count[i] : 0.0;
        if (!(mean_grad > config.grad_threshold)) {
            out.cloud.splats.push_back(s);
            out.source.push_back(static_cast<std::int64_t>(i));
            continue;
        }
        if (max_scale <= size_boundary) {
            // Clone: the copy moves half a standard deviation down the gradient.
            Splat clone = s;
            if (!position_grad_sum.empty()) {
                const double norm = position_grad_sum[i].norm();
                if (norm > 0.0) clone.position -= (0.5 * max_scale / norm) * position_grad_sum[i];
            }
            out.cloud.splats.push_back(s);
            out.source.push_back(static_cast<std::int64_t>(i));
            added.push_back(clone);
            ++out.cloned;
        } else {
            const Mat3 rot = quaternion_to_rotation(s.rotation);
            const Vec3 scale = s.log_scale.array().exp();
            for (int k = 0; k < 2; ++k) {
                Vec3 z;
                for (int a = 0; a < 3; ++a) z[a] = rng.normal() * scale[a];
                Splat child = s;
                child.position = s.position + rot * z;
                child.log_scale = s.log_scale.array() - log_split;
                added.push_back(child);
            }
            ++out.split;
        }
    }
    for (auto& s : added) {
        out.cloud.splats.push_back(std::move(s));
        out.source.push_back(-1);
    }
    out.stats = RenderStats(out.cloud.size());
    return out;
}

void reset_opacity(SplatCloud& cloud, double max_opacity) {
    const double cap = opacity_logit(max_opacity);
    for (auto& s : cloud.splats) s.opacity_logit = std::min(s.opacity_logit, cap);
}

} // namespace splatcap
