// Copyright Contributors to the splatcap project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "splatcap/backward.hpp"
#include "splatcap/gaussian.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace splatcap {

/// Learning rate per parameter group.
struct LearningRates {
    double position = 1.6e-4;
    double sh_dc = 2.5e-3;
    double sh_rest = 2.5e-3 / 20.0;
    double opacity = 5e-2;
    double scale = 5e-3;
    double rotation = 1e-3;
};

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-15;
};

/// First and second moments in the Splat layout, plus the shared step count.
struct AdamState {
    std::vector<Splat> first;
    std::vector<Splat> second;
    std::int64_t step = 0;

    explicit AdamState(std::size_t n = 0);

    std::size_t size() const noexcept { return first.size(); }

    /// Rebuilds the state after densification: entry i copies the moments of
    /// source[i], or starts from zero when source[i] < 0.
    AdamState remapped(std::span<const std::int64_t> source) const;

    void reset_opacity_moments();
};

/// Zero-initialized Splat (all fields zero, including the quaternion).
Splat zero_splat();

/// One bias-corrected Adam update of every splat parameter.
void adam_step(std::span<Splat> params, std::span<const SplatGradient> grads, AdamState& state,
               const LearningRates& lr, const AdamConfig& config = {});

} // namespace splatcap
