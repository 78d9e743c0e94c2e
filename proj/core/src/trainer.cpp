// Copyright Contributors to the splatcap project
// SPDX-License-Identifier: Apache-2.0
//
#include "splatcap/trainer.hpp"

#include "splatcap/backward.hpp"
#include "splatcap/densify.hpp"
#include "splatcap/metrics.hpp"
#include "splatcap/rasterizer.hpp"
#include "splatcap/rng.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace splatcap {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

/// Uniform hash grid for three-nearest-neighbour queries.
class PointGrid {
public:
    explicit PointGrid(const std::vector<Vec3>& points) : mPoints(points) {
        Vec3 lo = points.front(), hi = points.front();
        for (const auto& p : points) {
            lo = lo.cwiseMin(p);
            hi = hi.cwiseMax(p);
        }
        mOrigin = lo;
        const double span = (hi - lo).maxCoeff();
        mCell = span > 0.0 ? span / std::max(1.0, std::cbrt(static_cast<double>(points.size()))) : 1.0;
        for (int a = 0; a < 3; ++a) {
            mDims[a] = static_cast<int>(std::floor((hi[a] - lo[a]) / mCell)) + 1;
        }
        for (std::size_t i = 0; i < points.size(); ++i) mCells[key(cell_of(points[i]))].push_back(i);
    }

    /// Mean distance to the three nearest other points.
    double mean_knn3(std::size_t query) const {
        const Vec3& q = mPoints[query];
        const auto c = cell_of(q);
        std::array<double, 3> best;
        best.fill(std::numeric_limits<double>::infinity());
        const int max_ring = std::max({mDims[0], mDims[1], mDims[2]});
        for (int r = 0; r <= max_ring; ++r) {
            visit_shell(c, r, [&](std::size_t j) {
                if (j == query) return;
                const double d = (mPoints[j] - q).norm();
                if (d < best[2]) {
                    best[2] = d;
                    std::sort(best.begin(), best.end());
                }
            });
            // Any point outside shell r lies at least r cells away.
            if (best[2] <= r * mCell) break;
        }
        return (best[0] + best[1] + best[2]) / 3.0;
    }

private:
    using Cell = std::array<int, 3>;

    Cell cell_of(const Vec3& p) const {
        Cell c;
        for (int a = 0; a < 3; ++a) {
            c[a] = std::clamp(static_cast<int>(std::floor((p[a] - mOrigin[a]) / mCell)), 0, mDims[a] - 1);
        }
        return c;
    }

    static std::int64_t key(const Cell& c) {
        return (static_cast<std::int64_t>(c[0]) << 42) ^ (static_cast<std::int64_t>(c[1]) << 21) ^ c[2];
    }

    template <typename Fn>
    void visit_shell(const Cell& c, int r, Fn&& fn) const {
        for (int dz = -r; dz <= r; ++dz) {
            for (int dy = -r; dy <= r; ++dy) {
                for (int dx = -r; dx <= r; ++dx) {
                    if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != r) continue;
                    const Cell n{c[0] + dx, c[1] + dy, c[2] + dz};
                    if (n[0] < 0 || n[1] < 0 || n[2] < 0 || n[0] >= mDims[0] || n[1] >= mDims[1] ||
                        n[2] >= mDims[2]) {
                        continue;
                    }
                    const auto it = mCells.find(key(n));
                    if (it == mCells.end()) continue;
                    for (const auto j : it->second) fn(j);
                }
            }
        }
    }

    const std::vector<Vec3>& mPoints;
    Vec3 mOrigin;
    double mCell = 1.0;
    std::array<int, 3> mDims{1, 1, 1};
    std::unordered_map<std::int64_t, std::vector<std::size_t>> mCells;
};

struct Evaluation {
    double loss = 0.0;
    double psnr = 0.0;
    bool saturated = false;
};

Evaluation evaluate(const SplatCloud& cloud, const TrainingDataset& dataset,
                    const std::vector<std::size_t>& views, const TrainConfig& config,
                    const RenderOptions& options) {
    Evaluation e;
    if (views.empty()) {
        e.loss = e.psnr = std::numeric_limits<double>::quiet_NaN();
        return e;
    }
    double psnr_sum = 0.0;
    std::size_t finite = 0;
    for (const auto v : views) {
        const auto& view = dataset.views[v];
        const auto out = render(cloud, view.camera, config.background, options);
        e.loss += photometric_loss(out.image, view.image, config.lambda_dssim);
        const double p = psnr(out.image, view.image);
        if (std::isfinite(p)) {
            psnr_sum += p;
            ++finite;
        } else {
            e.saturated = true;
        }
    }
    e.loss /= static_cast<double>(views.size());
    e.psnr = finite > 0 ? psnr_sum / static_cast<double>(finite)
                        : std::numeric_limits<double>::infinity();
    return e;
}

} // namespace

void TrainConfig::validate() const {
    auto fail = [](const std::string& field, const std::string& rule) {
        throw InvalidParameter("train config: " + field + " " + rule);
    };
    if (iterations < 0) fail("iterations", "must be non-negative");
    if (!(lambda_dssim >= 0.0 && lambda_dssim <= 1.0)) fail("lambda_dssim", "must be in [0, 1]");
    const std::array<std::pair<const char*, double>, 10> positive{{
        {"position_lr_init", position_lr_init},
        {"position_lr_final", position_lr_final},
        {"sh_lr", sh_lr},
        {"opacity_lr", opacity_lr},
        {"scale_lr", scale_lr},
        {"rotation_lr", rotation_lr},
        {"grad_threshold", grad_threshold},
        {"percent_dense", percent_dense},
        {"prune_opacity", prune_opacity},
        {"max_screen_radius", max_screen_radius},
    }};
    for (const auto& [name, value] : positive) {
        if (!(value > 0.0) || !std::isfinite(value)) fail(name, "must be positive");
    }
    if (densify_interval < 1) fail("densify_interval", "must be positive");
    if (densify_from < 0) fail("densify_from", "must be non-negative");
    if (densify_from >= densify_until) fail("densify_from", "must be less than densify_until");
    if (opacity_reset_interval < 0) fail("opacity_reset_interval", "must be non-negative");
    if (sh_promote_interval < 0) fail("sh_promote_interval", "must be non-negative");
    if (checkpoint_interval < 1) fail("checkpoint_interval", "must be positive");
    if (holdout_every < 0 || holdout_every == 1) fail("holdout_every", "must be 0 or at least 2");
    if (downscale < 1) fail("downscale", "must be at least 1");
    if (workers < 0) fail("workers", "must be non-negative");
    if (!background.allFinite()) fail("background", "must be finite");
}

std::string format_metrics_log(const TrainReport& report) {
    std::ostringstream out;
    out.precision(9);
    for (const auto& c : report.checkpoints) {
        out << c.iteration << ' ' << c.splat_count << ' ' << c.loss << ' ' << c.train_psnr << ' '
            << c.elapsed_s << '\n';
    }
    return out.str();
}

SplatCloud seed_from_points(const std::vector<SparsePoint>& points) {
    if (points.size() < 4) {
        throw InsufficientSeed("at least 4 sparse points are required to seed, got " +
                               std::to_string(points.size()));
    }
    std::vector<Vec3> xyz(points.size());
    std::transform(points.begin(), points.end(), xyz.begin(), [](const SparsePoint& p) { return p.xyz; });
    const PointGrid grid(xyz);

    SplatCloud cloud;
    cloud.active_sh_degree = 0;
    cloud.splats.resize(points.size());
    const double logit = opacity_logit(0.1);
    for (std::size_t i = 0; i < points.size(); ++i) {
        Splat& s = cloud.splats[i];
        s.position = points[i].xyz;
        // Coincident points would give log(0).
        const double dist = std::max(grid.mean_knn3(i), 1e-7);
        s.log_scale = Vec3::Constant(std::log(dist));
        s.opacity_logit = logit;
        for (int c = 0; c < 3; ++c) s.sh(c, 0) = (points[i].rgb[c] / 255.0 - 0.5) / kShC0;
    }
    return cloud;
}

SplatCloud seed_from_points(const SparseModel& sparse) { return seed_from_points(sparse.points); }

double scene_extent(const std::vector<TrainingView>& views) {
    if (views.empty()) return 1.0;
    Vec3 centroid = Vec3::Zero();
    for (const auto& v : views) centroid += v.camera.center();
    centroid /= static_cast<double>(views.size());
    double radius = 0.0;
    for (const auto& v : views) radius = std::max(radius, (v.camera.center() - centroid).norm());
    return radius > 1e-9 ? radius : 1.0;
}

TrainResult train(const TrainingDataset& dataset, const TrainConfig& config,
                  const std::optional<SplatCloud>& initial, const ProgressCallback& progress) {
    config.validate();
    if (dataset.views.empty()) throw InvalidParameter("training dataset has no views");
    const auto start = Clock::now();

    TrainResult result;
    auto& report = result.report;
    auto& cloud = result.cloud;

    std::vector<std::size_t> train_views, holdout_views;
    for (std::size_t i = 0; i < dataset.views.size(); ++i) {
        const bool held = config.holdout_every > 0 && i % config.holdout_every == 0;
        (held ? holdout_views : train_views).push_back(i);
    }
    if (train_views.empty()) throw InvalidParameter("no training views left after holdout");
    report.train_views = train_views.size();
    report.holdout_views = holdout_views.size();

    auto stage = Clock::now();
    cloud = initial ? *initial : seed_from_points(dataset.seed_points);
    report.stages.push_back({"seed", seconds_since(stage)});

    const RenderOptions options{16, config.workers};
    const double extent = scene_extent(dataset.views);
    double eval_seconds = 0.0;

    auto checkpoint = [&](int iteration) {
        const auto t0 = Clock::now();
        const auto tr = evaluate(cloud, dataset, train_views, config, options);
        const auto ho = evaluate(cloud, dataset, holdout_views, config, options);
        eval_seconds += seconds_since(t0);
        report.checkpoints.push_back({iteration, cloud.size(), tr.loss, tr.psnr, ho.psnr,
                                      tr.saturated || ho.saturated, seconds_since(start)});
    };
    checkpoint(0);
    if (progress && !progress({0, config.iterations})) throw TrainingCancelled();

    const auto optimize_start = Clock::now();
    Rng rng(config.seed);
    AdamState adam(cloud.size());
    RenderStats window(cloud.size());
    std::vector<Vec3> grad_sum(cloud.size(), Vec3::Zero());
    std::vector<std::size_t> epoch;
    std::size_t epoch_pos = 0;
    const int densify_until = std::min(config.densify_until, config.iterations);
    const LossConfig loss_config{config.lambda_dssim, config.background};
    bool opacity_was_reset = false;

    for (int it = 1; it <= config.iterations; ++it) {
        const double t = static_cast<double>(it) / config.iterations;
        LearningRates lr;
        lr.position = extent * std::exp((1.0 - t) * std::log(config.position_lr_init) +
                                        t * std::log(config.position_lr_final));
        lr.sh_dc = config.sh_lr;
        lr.sh_rest = config.sh_lr / 20.0;
        lr.opacity = config.opacity_lr;
        lr.scale = config.scale_lr;
        lr.rotation = config.rotation_lr;

        if (config.sh_promote_interval > 0 && it % config.sh_promote_interval == 0 &&
            cloud.active_sh_degree < kMaxShDegree) {
            ++cloud.active_sh_degree;
        }

        // Shuffled epochs: Fisher-Yates over the training views.
        if (epoch_pos == epoch.size()) {
            epoch = train_views;
            for (std::size_t i = epoch.size(); i > 1; --i) std::swap(epoch[i - 1], epoch[rng.index(i)]);
            epoch_pos = 0;
        }
        const auto& view = dataset.views[epoch[epoch_pos++]];

        auto br = backward(cloud, view.camera, view.image, loss_config, options);
        if (!std::isfinite(br.loss)) {
            const double nan = std::numeric_limits<double>::quiet_NaN();
            report.checkpoints.push_back({it, cloud.size(), br.loss, nan, nan, false, seconds_since(start)});
            throw TrainingDiverged("non-finite loss at iteration " + std::to_string(it) + " on view " +
                                       view.name,
                                   report);
        }
        adam_step(cloud.splats, br.gradients, adam, lr);

        if (it < densify_until) {
            window.accumulate(br.stats);
            for (std::size_t i = 0; i < cloud.size(); ++i) grad_sum[i] += br.gradients[i].position;

            if (it > config.densify_from && it % config.densify_interval == 0) {
                DensifyConfig dc;
                dc.grad_threshold = config.grad_threshold;
                dc.percent_dense = config.percent_dense;
                dc.prune_opacity = config.prune_opacity;
                dc.max_screen_radius = config.max_screen_radius;
                dc.prune_large = opacity_was_reset;
                auto d = densify_and_prune(cloud, window, grad_sum, dc, extent, rng);
                cloud = std::move(d.cloud);
                adam = adam.remapped(d.source);
                window = std::move(d.stats);
                grad_sum.assign(cloud.size(), Vec3::Zero());
            }
            if (config.opacity_reset_interval > 0 && it % config.opacity_reset_interval == 0) {
                reset_opacity(cloud);
                adam.reset_opacity_moments();
                opacity_was_reset = true;
            }
        }

        if (it % config.checkpoint_interval == 0 || it == config.iterations) checkpoint(it);
        if (progress && !progress({it, config.iterations})) throw TrainingCancelled();
    }
    report.stages.push_back({"optimize", seconds_since(optimize_start) - eval_seconds});
    report.stages.push_back({"evaluate", eval_seconds});
    return result;
}

} // namespace splatcap
