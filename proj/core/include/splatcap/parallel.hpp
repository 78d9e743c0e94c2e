// Copyright Contributors to the splatcap project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace splatcap {

/// Resolves a requested worker count; 0 means "all hardware threads".
inline int resolve_workers(int requested) {
    if (requested > 0) return requested;
    return std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
}

/// Runs fn(worker, index) for index in [0, n). Indices are statically
/// interleaved across workers (worker k gets k, k + workers, ...), so the
/// assignment depends only on n and the worker count. The first exception
/// thrown by any worker is rethrown after all workers join.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
    workers = std::max(1, std::min<int>(workers, static_cast<int>(std::max<std::size_t>(n, 1))));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(0, i);
        return;
    }
    std::vector<std::exception_ptr> errors(workers);
    {
        std::vector<std::jthread> threads;
        threads.reserve(workers);
        for (int w = 0; w < workers; ++w) {
            threads.emplace_back([&, w] {
                try {
                    for (std::size_t i = w; i < n; i += workers) fn(w, i);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

} // namespace splatcap
