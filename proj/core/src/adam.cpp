// Copyright Contributors to the splatcap project
// SPDX-License-Identifier: Apache-2.0
//
#include "splatcap/adam.hpp"

#include "splatcap/error.hpp"

#include <cmath>

namespace splatcap {

Splat zero_splat() {
    Splat s;
    s.rotation.setZero();
    return s;
}

AdamState::AdamState(std::size_t n) : first(n, zero_splat()), second(n, zero_splat()) {}

AdamState AdamState::remapped(std::span<const std::int64_t> source) const {
    AdamState out(source.size());
    out.step = step;
    for (std::size_t i = 0; i < source.size(); ++i) {
        if (source[i] >= 0) {
            out.first[i] = first[static_cast<std::size_t>(source[i])];
            out.second[i] = second[static_cast<std::size_t>(source[i])];
        }
    }
    return out;
}

void AdamState::reset_opacity_moments() {
    for (auto& m : first) m.opacity_logit = 0.0;
    for (auto& v : second) v.opacity_logit = 0.0;
}

namespace {

struct Update {
    double beta1, beta2, epsilon, correction1, correction2;

    void apply(double* p, const double* g, double* m, double* v, int n, double lr) const {
        for (int i = 0; i < n; ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            const double m_hat = m[i] / correction1;
            const double v_hat = v[i] / correction2;
            p[i] -= lr * m_hat / (std::sqrt(v_hat) + epsilon);
        }
    }
};

} // namespace

void adam_step(std::span<Splat> params, std::span<const SplatGradient> grads, AdamState& state,
               const LearningRates& lr, const AdamConfig& config) {
    if (grads.size() != params.size() || state.size() != params.size()) {
        throw InvalidParameter("adam_step: parameter, gradient and state sizes differ");
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const Update u{config.beta1, config.beta2, config.epsilon, 1.0 - std::pow(config.beta1, t),
                   1.0 - std::pow(config.beta2, t)};
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i];
        const auto& g = grads[i];
        auto& m = state.first[i];
        auto& v = state.second[i];
        u.apply(p.position.data(), g.position.data(), m.position.data(), v.position.data(), 3,
                lr.position);
        u.apply(p.log_scale.data(), g.log_scale.data(), m.log_scale.data(), v.log_scale.data(), 3,
                lr.scale);
        u.apply(p.rotation.data(), g.rotation.data(), m.rotation.data(), v.rotation.data(), 4,
                lr.rotation);
        u.apply(&p.opacity_logit, &g.opacity_logit, &m.opacity_logit, &v.opacity_logit, 1,
                lr.opacity);
        for (int c = 0; c < 3; ++c) {
            // Row-major: coefficient 0 is the DC term, 1..15 the rest.
            u.apply(&p.sh(c, 0), &g.sh(c, 0), &m.sh(c, 0), &v.sh(c, 0), 1, lr.sh_dc);
            u.apply(&p.sh(c, 1), &g.sh(c, 1), &m.sh(c, 1), &v.sh(c, 1), kShCoeffCount - 1,
                    lr.sh_rest);
        }
    }
}

} // namespace splatcap
