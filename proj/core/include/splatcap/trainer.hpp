// Copyright Contributors to the splatcap project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "splatcap/adam.hpp"
#include "splatcap/colmap.hpp"
#include "splatcap/dataset.hpp"
#include "splatcap/error.hpp"
#include "splatcap/gaussian.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace splatcap {

struct TrainConfig {
    int iterations = 30000;
    double position_lr_init = 1.6e-4; // scaled by the scene extent
    double position_lr_final = 1.6e-6;
    double sh_lr = 2.5e-3;            // DC; higher orders use sh_lr / 20
    double opacity_lr = 5e-2;
    double scale_lr = 5e-3;
    double rotation_lr = 1e-3;
    double lambda_dssim = 0.2;
    int densify_interval = 100;
    int densify_from = 500;
    int densify_until = 15000;        // capped at `iterations`
    double grad_threshold = 2e-4;
    double percent_dense = 0.01;      // clone/split boundary = percent_dense · scene extent
    double prune_opacity = 0.005;
    double max_screen_radius = 20.0;
    int opacity_reset_interval = 3000;
    int sh_promote_interval = 1000;
    int checkpoint_interval = 1000;
    int holdout_every = 0;            // every k-th view is held out; 0 disables
    std::uint64_t seed = 0;
    Vec3 background = Vec3::Zero();
    int downscale = 1;
    int workers = 1;

    /// Throws InvalidParameter naming the first offending field.
    void validate() const;
};

struct TrainCheckpoint {
    int iteration = 0;
    std::size_t splat_count = 0;
    double loss = 0.0;         // mean over training views
    double train_psnr = 0.0;   // mean over training views
    double holdout_psnr = 0.0; // NaN without held-out views
    bool saturated = false;    // some view rendered exactly (PSNR = +inf)
    double elapsed_s = 0.0;
};

struct StageTiming {
    std::string stage;
    double seconds = 0.0;
};

struct TrainReport {
    std::vector<TrainCheckpoint> checkpoints;
    std::vector<StageTiming> stages;
    std::size_t train_views = 0;
    std::size_t holdout_views = 0;

    const TrainCheckpoint& final_checkpoint() const { return checkpoints.back(); }
};

/// One line per checkpoint: `iter count loss psnr elapsed_s`.
std::string format_metrics_log(const TrainReport& report);

struct TrainProgress {
    int iteration = 0;
    int total = 0;
};

/// Return false to cancel training.
using ProgressCallback = std::function<bool(const TrainProgress&)>;

struct TrainResult {
    SplatCloud cloud;
    TrainReport report;
};

class TrainingCancelled : public Error {
public:
    TrainingCancelled() : Error("training cancelled") {}
};

/// Thrown on a non-finite loss; carries the report up to and including a
/// diagnostic checkpoint for the failing iteration.
class TrainingDiverged : public Error {
public:
    TrainingDiverged(const std::string& what, TrainReport report)
        : Error(what), mReport(std::move(report)) {}
    const TrainReport& report() const noexcept { return mReport; }

private:
    TrainReport mReport;
};

/// One isotropic splat per point, sized by the mean distance to its three
/// nearest neighbours.
SplatCloud seed_from_points(const std::vector<SparsePoint>& points);
SplatCloud seed_from_points(const SparseModel& sparse);

/// Radius of the bounding sphere of the camera centers, about their centroid.
double scene_extent(const std::vector<TrainingView>& views);

/// Trains from `initial` when given, otherwise from the dataset's seed points.
TrainResult train(const TrainingDataset& dataset, const TrainConfig& config,
                  const std::optional<SplatCloud>& initial = std::nullopt,
                  const ProgressCallback& progress = {});

} // namespace splatcap
