// Copyright Contributors to the splatcap project
// SPDX-License-Identifier: Apache-2.0
//
#include "sh_oracle.hpp"

#include <cmath>
#include <numbers>

namespace splatcap::testkit {

namespace {

double factorial(int n) {
    double f = 1.0;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
}

/// P_l^m(x) for m ≥ 0 by the standard upward recurrence.
double legendre(int l, int m, double x) {
    double pmm = 1.0;
    const double somx2 = std::sqrt(std::max(0.0, (1.0 - x) * (1.0 + x)));
    double fact = 1.0;
    for (int i = 1; i <= m; ++i) {
        pmm *= -fact * somx2;
        fact += 2.0;
    }
    if (l == m) return pmm;
    double pmmp1 = x * (2.0 * m + 1.0) * pmm;
    if (l == m + 1) return pmmp1;
    double pll = 0.0;
    for (int ll = m + 2; ll <= l; ++ll) {
        pll = ((2.0 * ll - 1.0) * x * pmmp1 - (ll + m - 1.0) * pmm) / (ll - m);
        pmm = pmmp1;
        pmmp1 = pll;
    }
    return pll;
}

} // namespace

double sh_oracle(int l, int m, const Vec3& dir) {
    const Vec3 d = dir.normalized();
    const double theta = std::acos(std::clamp(d.z(), -1.0, 1.0));
    const double phi = std::atan2(d.y(), d.x());
    const int am = std::abs(m);
    const double k = std::sqrt((2.0 * l + 1.0) / (4.0 * std::numbers::pi) * factorial(l - am) / factorial(l + am));
    const double p = legendre(l, am, std::cos(theta));
    if (m == 0) return k * p;
    if (m > 0) return std::sqrt(2.0) * k * std::cos(m * phi) * p;
    return std::sqrt(2.0) * k * std::sin(am * phi) * p;
}

Vec3 eval_sh_oracle(const ShCoeffs& sh, const Vec3& dir, int degree) {
    Vec3 rgb = Vec3::Constant(0.5);
    for (int l = 0; l <= degree; ++l) {
        for (int m = -l; m <= l; ++m) {
            const int k = l * l + m + l;
            const double y = sh_oracle(l, m, dir);
            for (int c = 0; c < 3; ++c) rgb[c] += sh(c, k) * y;
        }
    }
    return rgb.cwiseMax(0.0);
}

} // namespace splatcap::testkit
