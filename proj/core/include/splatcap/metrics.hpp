// Copyright Contributors to the splatcap project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "splatcap/image.hpp"

namespace splatcap {

/// Peak signal-to-noise ratio for peak 1. Identical images give +infinity.
double psnr(const ImageBuffer& a, const ImageBuffer& b);

double mean_absolute_error(const ImageBuffer& a, const ImageBuffer& b);

/// Mean SSIM over all pixels and channels. 11×11 Gaussian window (σ = 1.5),
/// C1 = 0.01², C2 = 0.03². Near the border the window is truncated to the
/// image and renormalized, so constant images give the closed-form value.
double ssim(const ImageBuffer& a, const ImageBuffer& b);

/// (1 − λ)·L1 + λ·(1 − SSIM).
double photometric_loss(const ImageBuffer& rendered, const ImageBuffer& target, double lambda_dssim);

struct LossGradient {
    double value = 0.0;
    ImageBuffer d_rendered; // ∂loss/∂rendered, same layout as the image
};

LossGradient photometric_loss_with_gradient(const ImageBuffer& rendered, const ImageBuffer& target,
                                            double lambda_dssim);

} // namespace splatcap
