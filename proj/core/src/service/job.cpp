// Copyright Contributors to the splatcap project
// SPDX-License-Identifier: Apache-2.0
//
#include "splatcap/service/job.hpp"

#include "splatcap/error.hpp"
#include "splatcap/ply.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <random>

namespace splatcap::service {

namespace {

constexpr std::array<std::string_view, 6> kStateNames{"queued", "extracting", "sfm",
                                                      "training", "ready", "failed"};
constexpr std::array<std::string_view, 3> kPayloadNames{"video", "frames", "frames+sparse"};

} // namespace

std::string_view to_string(JobState state) { return kStateNames[static_cast<int>(state)]; }

std::optional<JobState> parse_job_state(std::string_view name) {
    for (std::size_t i = 0; i < kStateNames.size(); ++i) {
        if (kStateNames[i] == name) return static_cast<JobState>(i);
    }
    return std::nullopt;
}

bool is_terminal(JobState state) { return state == JobState::Ready || state == JobState::Failed; }

bool is_legal_transition(JobState from, JobState to) {
    if (is_terminal(from)) return false;
    if (to == JobState::Failed) return true;
    return static_cast<int>(to) > static_cast<int>(from);
}

std::string_view to_string(PayloadKind kind) { return kPayloadNames[static_cast<int>(kind)]; }

std::optional<PayloadKind> parse_payload_kind(std::string_view name) {
    for (std::size_t i = 0; i < kPayloadNames.size(); ++i) {
        if (kPayloadNames[i] == name) return static_cast<PayloadKind>(i);
    }
    return std::nullopt;
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count();
    const std::time_t secs = static_cast<std::time_t>(ms / 1000);
    std::tm tm{};
    gmtime_r(&secs, &tm);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900,
                  tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec,
                  static_cast<int>(ms % 1000));
    return buf;
}

std::string new_job_id() {
    static thread_local std::mt19937_64 engine{[] {
        std::random_device rd;
        std::seed_seq seq{rd(), rd(), rd(), rd()};
        return std::mt19937_64(seq);
    }()};
    char buf[33];
    std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(engine()),
                  static_cast<unsigned long long>(engine()));
    return buf;
}

bool is_valid_job_id(std::string_view id) {
    return id.size() == 32 && std::all_of(id.begin(), id.end(), [](char c) {
               return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
           });
}

void transition(JobRecord& job, JobState to) {
    if (!is_legal_transition(job.state, to)) {
        throw InvalidParameter("illegal job transition " + std::string(to_string(job.state)) + " -> " +
                               std::string(to_string(to)));
    }
    job.updated = utc_timestamp();
    job.transitions.push_back({job.state, to, job.updated});
    job.state = to;
}

std::string job_to_json(const JobRecord& job) {
    nlohmann::json j;
    j["id"] = job.id;
    j["state"] = to_string(job.state);
    j["payload"] = to_string(job.payload);
    j["payload_file"] = job.payload_file;
    j["created"] = job.created;
    j["updated"] = job.updated;
    j["progress"] = {{"iteration", job.progress_iteration}, {"total", job.progress_total}};
    j["error"] = job.error;
    auto& log = j["transitions"] = nlohmann::json::array();
    for (const auto& t : job.transitions) {
        log.push_back({{"from", to_string(t.from)}, {"to", to_string(t.to)}, {"at", t.at}});
    }
    return j.dump(2);
}

JobRecord job_from_json(std::string_view text) {
    try {
        const auto j = nlohmann::json::parse(text);
        auto state = [](const nlohmann::json& v) {
            const auto s = parse_job_state(v.get<std::string>());
            if (!s) throw InvalidParameter("unknown job state '" + v.get<std::string>() + "'");
            return *s;
        };
        JobRecord job;
        job.id = j.at("id").get<std::string>();
        job.state = state(j.at("state"));
        const auto kind = parse_payload_kind(j.at("payload").get<std::string>());
        if (!kind) throw InvalidParameter("unknown payload kind");
        job.payload = *kind;
        job.payload_file = j.at("payload_file").get<std::string>();
        job.created = j.at("created").get<std::string>();
        job.updated = j.at("updated").get<std::string>();
        job.progress_iteration = j.at("progress").at("iteration").get<int>();
        job.progress_total = j.at("progress").at("total").get<int>();
        job.error = j.value("error", "");
        for (const auto& t : j.at("transitions")) {
            job.transitions.push_back({state(t.at("from")), state(t.at("to")), t.at("at").get<std::string>()});
        }
        return job;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidParameter(std::string("malformed job record: ") + e.what());
    }
}

JobStore::JobStore(std::filesystem::path root) : mRoot(std::move(root)) {
    std::filesystem::create_directories(mRoot / "jobs");
}

std::filesystem::path JobStore::job_dir(const std::string& id) const { return mRoot / "jobs" / id; }

void JobStore::save(const JobRecord& job) const {
    const auto dir = job_dir(job.id);
    std::filesystem::create_directories(dir);
    const auto tmp = dir / "job.json.tmp";
    write_file(tmp, job_to_json(job));
    std::filesystem::rename(tmp, dir / "job.json");
}

std::optional<JobRecord> JobStore::load(const std::string& id) const {
    const auto path = job_dir(id) / "job.json";
    if (!std::filesystem::exists(path)) return std::nullopt;
    return job_from_json(read_file(path));
}

std::vector<JobRecord> JobStore::load_all(std::vector<std::string>* warnings) const {
    std::vector<JobRecord> jobs;
    for (const auto& entry : std::filesystem::directory_iterator(mRoot / "jobs")) {
        if (!entry.is_directory()) continue;
        const auto id = entry.path().filename().string();
        if (!is_valid_job_id(id)) continue;
        try {
            if (auto job = load(id)) jobs.push_back(std::move(*job));
        } catch (const std::exception& e) {
            if (warnings) warnings->push_back(id + ": " + e.what());
        }
    }
    std::sort(jobs.begin(), jobs.end(), [](const JobRecord& a, const JobRecord& b) {
        return a.created != b.created ? a.created < b.created : a.id < b.id;
    });
    return jobs;
}

void JobStore::remove(const std::string& id) const { std::filesystem::remove_all(job_dir(id)); }

} // namespace splatcap::service
