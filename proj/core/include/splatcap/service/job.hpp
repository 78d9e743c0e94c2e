// Copyright Contributors to the splatcap project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace splatcap::service {

enum class JobState { Queued, Extracting, Sfm, Training, Ready, Failed };

/// Lowercase wire name ("queued", "sfm", ...).
std::string_view to_string(JobState state);
std::optional<JobState> parse_job_state(std::string_view name);

bool is_terminal(JobState state);

/// Forward along Queued → Extracting → Sfm → Training → Ready (stages may be
/// skipped), or from any non-terminal state to Failed.
bool is_legal_transition(JobState from, JobState to);

/// What an upload turned out to contain.
enum class PayloadKind { Video, Frames, FramesWithSparse };

std::string_view to_string(PayloadKind kind);
std::optional<PayloadKind> parse_payload_kind(std::string_view name);

struct Transition {
    JobState from;
    JobState to;
    std::string at; // UTC timestamp

    bool operator==(const Transition&) const = default;
};

struct JobRecord {
    std::string id;
    JobState state = JobState::Queued;
    PayloadKind payload = PayloadKind::Video;
    std::string payload_file; // name inside the job directory
    std::string created;
    std::string updated;
    int progress_iteration = 0;
    int progress_total = 0;
    std::string error;
    std::vector<Transition> transitions;

    bool operator==(const JobRecord&) const = default;
};

/// Current UTC time as `YYYY-MM-DDTHH:MM:SS.mmmZ`.
std::string utc_timestamp();

/// 128-bit random identifier, hex encoded.
std::string new_job_id();

/// Ids are produced by new_job_id; anything else is rejected before it can
/// reach the filesystem.
bool is_valid_job_id(std::string_view id);

/// Moves `job` to `to`, appending to its transition log. Throws
/// InvalidParameter on an illegal edge.
void transition(JobRecord& job, JobState to);

std::string job_to_json(const JobRecord& job);
JobRecord job_from_json(std::string_view text);

/// File-per-job persistence: `<root>/jobs/<id>/job.json`.
class JobStore {
public:
    explicit JobStore(std::filesystem::path root);

    std::filesystem::path job_dir(const std::string& id) const;

    /// Atomic replace via a temporary file and rename.
    void save(const JobRecord& job) const;

    std::optional<JobRecord> load(const std::string& id) const;

    /// All persisted jobs ordered by creation time then id. Unreadable
    /// records are skipped and reported in `warnings`.
    std::vector<JobRecord> load_all(std::vector<std::string>* warnings = nullptr) const;

    void remove(const std::string& id) const;

private:
    std::filesystem::path mRoot;
};

} // namespace splatcap::service
