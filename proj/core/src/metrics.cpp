// Copyright Contributors to the splatcap project
// SPDX-License-Identifier: Apache-2.0
//
#include "splatcap/metrics.hpp"

#include "splatcap/error.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <vector>

namespace splatcap {

namespace {

constexpr int kRadius = 5;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

void check_sizes(const ImageBuffer& a, const ImageBuffer& b) {
    if (!a.same_size(b)) {
        throw DimensionMismatch("image sizes differ: " + std::to_string(a.width()) + "x" +
                                std::to_string(a.height()) + " vs " + std::to_string(b.width()) +
                                "x" + std::to_string(b.height()));
    }
}

const std::array<double, 2 * kRadius + 1>& kernel() {
    static const auto k = [] {
        std::array<double, 2 * kRadius + 1> w{};
        double sum = 0.0;
        for (int i = -kRadius; i <= kRadius; ++i) {
            w[i + kRadius] = std::exp(-(i * i) / (2.0 * kSigma * kSigma));
            sum += w[i + kRadius];
        }
        for (auto& v : w) v /= sum;
        return w;
    }();
    return k;
}

/// Single-channel plane, row-major.
using Plane = std::vector<double>;

/// In-bounds kernel mass for every coordinate along an axis of length n.
std::vector<double> window_mass(int n) {
    const auto& k = kernel();
    std::vector<double> z(n, 0.0);
    for (int i = 0; i < n; ++i) {
        for (int o = -kRadius; o <= kRadius; ++o) {
            if (i + o >= 0 && i + o < n) z[i] += k[o + kRadius];
        }
    }
    return z;
}

/// Separable truncated Gaussian filter; `normalize` divides by the in-bounds
/// mass (forward pass), otherwise applies the raw transpose.
Plane filter(const Plane& in, int w, int h, bool normalize, const std::vector<double>& zx,
             const std::vector<double>& zy) {
    const auto& k = kernel();
    Plane tmp(in.size(), 0.0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int o = -kRadius; o <= kRadius; ++o) {
                const int xx = x + o;
                if (xx >= 0 && xx < w) acc += k[o + kRadius] * in[static_cast<std::size_t>(y) * w + xx];
            }
            tmp[static_cast<std::size_t>(y) * w + x] = normalize ? acc / zx[x] : acc;
        }
    }
    Plane out(in.size(), 0.0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int o = -kRadius; o <= kRadius; ++o) {
                const int yy = y + o;
                if (yy >= 0 && yy < h) acc += k[o + kRadius] * tmp[static_cast<std::size_t>(yy) * w + x];
            }
            out[static_cast<std::size_t>(y) * w + x] = normalize ? acc / zy[y] : acc;
        }
    }
    return out;
}

Plane channel(const ImageBuffer& img, int c) {
    Plane p(img.pixel_count());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = img.data()[i * 3 + c];
    return p;
}

/// Σ over pixels of the SSIM map for one channel; optionally writes ∂Σ/∂a.
double ssim_channel(const Plane& a, const Plane& b, int w, int h, Plane* grad) {
    const auto zx = window_mass(w);
    const auto zy = window_mass(h);
    const std::size_t n = a.size();
    Plane aa(n), bb(n), ab(n);
    for (std::size_t i = 0; i < n; ++i) {
        aa[i] = a[i] * a[i];
        bb[i] = b[i] * b[i];
        ab[i] = a[i] * b[i];
    }
    const Plane mu_a = filter(a, w, h, true, zx, zy);
    const Plane mu_b = filter(b, w, h, true, zx, zy);
    const Plane e_aa = filter(aa, w, h, true, zx, zy);
    const Plane e_bb = filter(bb, w, h, true, zx, zy);
    const Plane e_ab = filter(ab, w, h, true, zx, zy);

    double total = 0.0;
    Plane d_mu(grad ? n : 0), d_saa(grad ? n : 0), d_sab(grad ? n : 0);
    for (std::size_t i = 0; i < n; ++i) {
        const double ma = mu_a[i], mb = mu_b[i];
        const double saa = e_aa[i] - ma * ma;
        const double sbb = e_bb[i] - mb * mb;
        const double sab = e_ab[i] - ma * mb;
        const double n1 = 2.0 * ma * mb + kC1;
        const double n2 = 2.0 * sab + kC2;
        const double d1 = ma * ma + mb * mb + kC1;
        const double d2 = saa + sbb + kC2;
        const double s = (n1 * n2) / (d1 * d2);
        total += s;
        if (grad) {
            const double ds_dsaa = -s / d2;
            const double ds_dsab = 2.0 * n1 / (d1 * d2);
            const double ds_dma = 2.0 * mb * n2 / (d1 * d2) - s * 2.0 * ma / d1;
            // Chain through saa = E[a²] − μa² and sab = E[ab] − μa·μb.
            const double z = zx[i % w] * zy[i / w];
            d_mu[i] = (ds_dma - 2.0 * ma * ds_dsaa - mb * ds_dsab) / z;
            d_saa[i] = ds_dsaa / z;
            d_sab[i] = ds_dsab / z;
        }
    }
    if (grad) {
        const Plane g_mu = filter(d_mu, w, h, false, zx, zy);
        const Plane g_saa = filter(d_saa, w, h, false, zx, zy);
        const Plane g_sab = filter(d_sab, w, h, false, zx, zy);
        grad->resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            (*grad)[i] = g_mu[i] + 2.0 * a[i] * g_saa[i] + b[i] * g_sab[i];
        }
    }
    return total;
}

} // namespace

double psnr(const ImageBuffer& a, const ImageBuffer& b) {
    check_sizes(a, b);
    double sum = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i) {
        const double d = a.data()[i] - b.data()[i];
        sum += d * d;
    }
    if (a.data().empty()) throw InvalidParameter("psnr of empty images");
    const double mse = sum / static_cast<double>(a.data().size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

double mean_absolute_error(const ImageBuffer& a, const ImageBuffer& b) {
    check_sizes(a, b);
    double sum = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i) sum += std::abs(a.data()[i] - b.data()[i]);
    return a.data().empty() ? 0.0 : sum / static_cast<double>(a.data().size());
}

double ssim(const ImageBuffer& a, const ImageBuffer& b) {
    check_sizes(a, b);
    if (a.data().empty()) throw InvalidParameter("ssim of empty images");
    double total = 0.0;
    for (int c = 0; c < 3; ++c) {
        total += ssim_channel(channel(a, c), channel(b, c), a.width(), a.height(), nullptr);
    }
    return total / static_cast<double>(a.data().size());
}

double photometric_loss(const ImageBuffer& rendered, const ImageBuffer& target, double lambda) {
    const double l1 = mean_absolute_error(rendered, target);
    if (lambda == 0.0) return l1;
    return (1.0 - lambda) * l1 + lambda * (1.0 - ssim(rendered, target));
}

LossGradient photometric_loss_with_gradient(const ImageBuffer& rendered, const ImageBuffer& target,
                                            double lambda) {
    check_sizes(rendered, target);
    if (lambda < 0.0 || lambda > 1.0) throw InvalidParameter("lambda_dssim must be in [0, 1]");
    const auto& r = rendered.data();
    const auto& t = target.data();
    const double count = static_cast<double>(r.size());
    if (r.empty()) throw InvalidParameter("loss of empty images");

    LossGradient out{0.0, ImageBuffer(rendered.width(), rendered.height())};
    auto& g = out.d_rendered.data();
    double l1 = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        const double d = r[i] - t[i];
        l1 += std::abs(d);
        g[i] = (1.0 - lambda) * static_cast<double>((d > 0.0) - (d < 0.0)) / count;
    }
    l1 /= count;
    out.value = (1.0 - lambda) * l1;
    if (lambda > 0.0) {
        double total = 0.0;
        Plane grad;
        for (int c = 0; c < 3; ++c) {
            total += ssim_channel(channel(rendered, c), channel(target, c), rendered.width(),
                                  rendered.height(), &grad);
            for (std::size_t i = 0; i < grad.size(); ++i) g[i * 3 + c] -= lambda * grad[i] / count;
        }
        out.value += lambda * (1.0 - total / count);
    }
    return out;
}

} // namespace splatcap
