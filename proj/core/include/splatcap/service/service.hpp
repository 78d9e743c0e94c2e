// Copyright Contributors to the splatcap project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "splatcap/error.hpp"
#include "splatcap/service/config.hpp"
#include "splatcap/service/job.hpp"

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace splatcap::service {

class PayloadTooLarge : public Error {
public:
    using Error::Error;
};

/// HTTP front end plus a worker pool driving jobs through the pipeline:
/// frame extraction, SfM, training, artifact export. Job records live on
/// disk, so a new instance on the same data root resumes unfinished jobs.
class PipelineService {
public:
    explicit PipelineService(ServiceConfig config);
    ~PipelineService();

    PipelineService(const PipelineService&) = delete;
    PipelineService& operator=(const PipelineService&) = delete;

    /// Reloads persisted jobs, starts workers and binds the listener.
    /// Throws IoError naming the address when binding fails.
    void start();

    /// Stops accepting requests and interrupts running stages; interrupted
    /// jobs keep their state on disk and resume on the next start.
    void stop();

    /// Bound port (resolved when the configured port is 0).
    int port() const;

    const ServiceConfig& config() const;

    /// Persists the payload and queues a job. Throws PayloadTooLarge or
    /// PayloadError.
    JobRecord submit(std::string_view payload);

    /// Snapshot with live training progress; nullopt for unknown ids.
    std::optional<JobRecord> job(const std::string& id) const;

    std::vector<JobRecord> jobs() const;

    /// Cancels and deletes a job; false for unknown ids.
    bool remove(const std::string& id);

    /// JSON view served by GET /jobs/{id}.
    static std::string job_view_json(const JobRecord& job);

private:
    struct Impl;
    std::unique_ptr<Impl> mImpl;
};

} // namespace splatcap::service
