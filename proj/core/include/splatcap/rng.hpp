// Copyright Contributors to the splatcap project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstdint>
#include <random>

namespace splatcap {

/// Seedable generator with implementation-independent derived draws.
/// std::mt19937_64's raw output is fully specified by the standard; the
/// distributions below are written out so that sequences do not depend on
/// the standard library in use.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : mEngine(seed) {}

    std::uint64_t next_u64() { return mEngine(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(mEngine() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n) by rejection (unbiased).
    std::uint64_t index(std::uint64_t n);

    /// Standard normal via Box–Muller; consumes two uniforms per call.
    double normal();

private:
    std::mt19937_64 mEngine;
};

} // namespace splatcap
