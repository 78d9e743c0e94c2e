// Copyright Contributors to the splatcap project
// SPDX-License-Identifier: Apache-2.0
//
#include "splatcap/service/service.hpp"

#include "splatcap/dataset.hpp"
#include "splatcap/image_io.hpp"
#include "splatcap/ply.hpp"
#include "splatcap/rasterizer.hpp"
#include "splatcap/service/payload.hpp"
#include "splatcap/service/subprocess.hpp"
#include "splatcap/trainer.hpp"

#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <condition_variable>
#include <deque>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

namespace splatcap::service {

namespace fs = std::filesystem;

namespace {

/// Stage interrupted by shutdown or deletion; the job keeps its state.
struct StageInterrupted {};

struct JobEntry {
    std::mutex mutex; // guards record and active
    JobRecord record;
    bool active = false;
    std::atomic<int> iteration{0};
    std::atomic<bool> cancel{false};
};

void log_line(const std::string& line) {
    static std::mutex m;
    std::lock_guard lock(m);
    std::clog << "splatcap-service: " << line << std::endl;
}

std::string error_json(const std::string& message) { return nlohmann::json{{"error", message}}.dump(); }

} // namespace

struct PipelineService::Impl {
    ServiceConfig config;
    JobStore store;
    httplib::Server server;
    int bound_port = 0;
    std::thread server_thread;
    std::vector<std::thread> workers;
    std::atomic<bool> stopping{false};
    bool started = false;

    mutable std::mutex jobs_mutex; // guards jobs, queue
    std::map<std::string, std::shared_ptr<JobEntry>> jobs;
    std::deque<std::string> queue;
    std::condition_variable queue_cv;

    explicit Impl(ServiceConfig c) : config(std::move(c)), store(config.data_root) {}

    // Paths ---------------------------------------------------------------

    fs::path dir(const JobRecord& job) const { return store.job_dir(job.id); }
    fs::path frames_dir(const JobRecord& job) const { return dir(job) / "frames"; }
    fs::path sparse_dir(const JobRecord& job) const { return dir(job) / "sparse"; }
    fs::path model_path(const JobRecord& job) const { return dir(job) / "model.ply"; }
    fs::path preview_path(const JobRecord& job) const { return dir(job) / "preview.png"; }

    std::shared_ptr<JobEntry> find(const std::string& id) const {
        std::lock_guard lock(jobs_mutex);
        const auto it = jobs.find(id);
        return it == jobs.end() ? nullptr : it->second;
    }

    void enqueue(const std::string& id) {
        {
            std::lock_guard lock(jobs_mutex);
            queue.push_back(id);
        }
        queue_cv.notify_one();
    }

    JobRecord snapshot(JobEntry& entry) const {
        std::lock_guard lock(entry.mutex);
        JobRecord copy = entry.record;
        if (copy.state == JobState::Training) copy.progress_iteration = entry.iteration.load();
        return copy;
    }

    JobRecord set_state(JobEntry& entry, JobState to, const std::string& error = {}) {
        std::lock_guard lock(entry.mutex);
        const auto from = entry.record.state;
        transition(entry.record, to);
        entry.record.error = error;
        if (to == JobState::Ready) entry.record.progress_iteration = entry.record.progress_total;
        store.save(entry.record);
        log_line("job " + entry.record.id + ": " + std::string(to_string(from)) + " -> " +
                 std::string(to_string(to)) + (error.empty() ? "" : " (" + error + ")"));
        return entry.record;
    }

    bool interrupted(const JobEntry& entry) const { return stopping.load() || entry.cancel.load(); }

    // Stages ----------------------------------------------------------------

    void run_tool(JobEntry& entry, const JobRecord& job, const std::string& name, const std::string& tpl,
                  const fs::path& input, const fs::path& output) {
        std::ostringstream fps;
        fps << config.fps;
        const auto command = substitute_placeholders(
            tpl, {{"input", input.string()}, {"output", output.string()}, {"fps", fps.str()}});
        const auto result = run_command(command, dir(job), dir(job) / (name + ".log"),
                                        std::chrono::seconds(config.stage_timeout_s),
                                        [&] { return interrupted(entry); });
        if (result.aborted) throw StageInterrupted{};
        if (result.timed_out) {
            throw Error(name + " timed out after " + std::to_string(config.stage_timeout_s) + " s");
        }
        if (result.exit_code != 0) {
            throw Error(name + " exited with status " + std::to_string(result.exit_code) + ": " +
                        result.output_tail);
        }
    }

    JobState stage_queued(const JobRecord& job) {
        if (job.payload == PayloadKind::Video) return JobState::Extracting;
        fs::remove_all(frames_dir(job));
        fs::remove_all(sparse_dir(job));
        unpack_capture(read_file(dir(job) / job.payload_file), frames_dir(job), sparse_dir(job));
        return job.payload == PayloadKind::FramesWithSparse ? JobState::Training : JobState::Sfm;
    }

    JobState stage_extracting(JobEntry& entry, const JobRecord& job) {
        fs::remove_all(frames_dir(job));
        fs::create_directories(frames_dir(job));
        run_tool(entry, job, "frame_extractor", config.frame_extractor, dir(job) / job.payload_file,
                 frames_dir(job));
        const auto frames = count_frames(frames_dir(job));
        if (frames < kMinFrames) {
            throw Error("insufficient frames: " + std::to_string(frames) + " < " + std::to_string(kMinFrames));
        }
        return JobState::Sfm;
    }

    JobState stage_sfm(JobEntry& entry, const JobRecord& job) {
        fs::remove_all(sparse_dir(job));
        fs::create_directories(sparse_dir(job));
        run_tool(entry, job, "sfm", config.sfm, frames_dir(job), sparse_dir(job));
        read_colmap_sparse(sparse_dir(job));
        return JobState::Training;
    }

    JobState stage_training(JobEntry& entry, const JobRecord& job) {
        const auto sparse = read_colmap_sparse(sparse_dir(job));
        const auto dataset = assemble_dataset(sparse, frames_dir(job), config.train.downscale);
        entry.iteration.store(0);
        {
            std::lock_guard lock(entry.mutex);
            entry.record.progress_iteration = 0;
            entry.record.progress_total = config.train.iterations;
        }
        TrainResult result;
        try {
            result = train(dataset, config.train, std::nullopt, [&](const TrainProgress& p) {
                entry.iteration.store(p.iteration);
                return !interrupted(entry);
            });
        } catch (const TrainingCancelled&) {
            throw StageInterrupted{};
        }
        const auto tmp = dir(job) / "model.ply.tmp";
        save_splat_ply(tmp, result.cloud);
        load_splat_ply(tmp); // a Ready job must hold a parseable model
        fs::rename(tmp, model_path(job));
        const auto preview = render(result.cloud, dataset.views.front().camera, config.train.background,
                                    RenderOptions{16, config.train.workers});
        save_png(preview_path(job), preview.image);
        write_file(dir(job) / "metrics.log", format_metrics_log(result.report));
        return JobState::Ready;
    }

    void process(JobEntry& entry) {
        for (;;) {
            const auto job = snapshot(entry);
            if (is_terminal(job.state) || interrupted(entry)) return;
            try {
                JobState next = job.state;
                switch (job.state) {
                case JobState::Queued: next = stage_queued(job); break;
                case JobState::Extracting: next = stage_extracting(entry, job); break;
                case JobState::Sfm: next = stage_sfm(entry, job); break;
                case JobState::Training: next = stage_training(entry, job); break;
                default: return;
                }
                if (interrupted(entry)) return;
                set_state(entry, next);
            } catch (const StageInterrupted&) {
                return;
            } catch (const std::exception& e) {
                if (interrupted(entry)) return;
                set_state(entry, JobState::Failed, e.what());
                return;
            }
        }
    }

    void worker_loop() {
        for (;;) {
            std::shared_ptr<JobEntry> entry;
            {
                std::unique_lock lock(jobs_mutex);
                queue_cv.wait(lock, [&] { return stopping.load() || !queue.empty(); });
                if (stopping.load()) return;
                const auto id = queue.front();
                queue.pop_front();
                const auto it = jobs.find(id);
                if (it == jobs.end()) continue;
                entry = it->second;
            }
            {
                std::lock_guard lock(entry->mutex);
                if (entry->cancel.load()) continue;
                entry->active = true;
            }
            process(*entry);
            bool remove_now = false;
            {
                std::lock_guard lock(entry->mutex);
                entry->active = false;
                remove_now = entry->cancel.load();
            }
            if (remove_now) erase(entry->record.id);
        }
    }

    void erase(const std::string& id) {
        {
            std::lock_guard lock(jobs_mutex);
            jobs.erase(id);
        }
        store.remove(id);
    }

    // HTTP ------------------------------------------------------------------

    void install_routes() {
        server.set_socket_options([](socket_t sock) {
            int yes = 1;
            ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof yes);
        });
        // Multipart framing adds a little on top of the capture itself.
        server.set_payload_max_length(static_cast<std::size_t>(config.max_upload_bytes) + (64u << 10));
        server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
        server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
            std::string what = "internal error";
            try {
                std::rethrow_exception(ep);
            } catch (const std::exception& e) {
                what = e.what();
            } catch (...) {
            }
            res.status = 500;
            res.set_content(error_json(what), "application/json");
        });
        server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) {
            res.set_header("Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS");
            res.set_header("Access-Control-Allow-Headers", "Content-Type");
            res.status = 204;
        });
        server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
            res.set_content(R"({"status":"ok"})", "application/json");
        });
        server.Post("/jobs", [this](const httplib::Request& req, httplib::Response& res) {
            if (!req.is_multipart_form_data() || !req.has_file("capture")) {
                res.status = 422;
                res.set_content(error_json("expected multipart/form-data with a 'capture' field"),
                                "application/json");
                return;
            }
            try {
                const auto job = submit(req.get_file_value("capture").content);
                res.status = 201;
                res.set_header("Location", "/jobs/" + job.id);
                res.set_content(job_view_json(job), "application/json");
            } catch (const PayloadTooLarge& e) {
                res.status = 413;
                res.set_content(error_json(e.what()), "application/json");
            } catch (const PayloadError& e) {
                res.status = 422;
                res.set_content(error_json(e.what()), "application/json");
            }
        });
        server.Get(R"(/jobs/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
            const auto entry = lookup(req.matches[1], res);
            if (!entry) return;
            res.set_content(job_view_json(snapshot(*entry)), "application/json");
        });
        server.Get(R"(/jobs/([^/]+)/model\.ply)", [this](const httplib::Request& req, httplib::Response& res) {
            serve_artifact(req, res, &Impl::model_path, "application/octet-stream");
        });
        server.Get(R"(/jobs/([^/]+)/preview\.png)", [this](const httplib::Request& req, httplib::Response& res) {
            serve_artifact(req, res, &Impl::preview_path, "image/png");
        });
        server.Delete(R"(/jobs/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
            const std::string id = req.matches[1];
            if (!is_valid_job_id(id) || !remove(id)) {
                res.status = 404;
                res.set_content(error_json("unknown job " + id), "application/json");
                return;
            }
            res.set_content(nlohmann::json{{"id", id}, {"deleted", true}}.dump(), "application/json");
        });
    }

    std::shared_ptr<JobEntry> lookup(const std::string& id, httplib::Response& res) const {
        auto entry = is_valid_job_id(id) ? find(id) : nullptr;
        if (!entry || entry->cancel.load()) {
            res.status = 404;
            res.set_content(error_json("unknown job " + id), "application/json");
            return nullptr;
        }
        return entry;
    }

    void serve_artifact(const httplib::Request& req, httplib::Response& res,
                        fs::path (Impl::*path)(const JobRecord&) const, const char* content_type) {
        const auto entry = lookup(req.matches[1], res);
        if (!entry) return;
        const auto job = snapshot(*entry);
        if (job.state != JobState::Ready) {
            res.status = 409;
            res.set_content(nlohmann::json{{"error", "job is " + std::string(to_string(job.state))},
                                           {"state", to_string(job.state)}}
                                .dump(),
                            "application/json");
            return;
        }
        res.set_content(read_file((this->*path)(job)), content_type);
    }

    // Public operations ------------------------------------------------------

    JobRecord submit(std::string_view payload) {
        if (payload.size() > config.max_upload_bytes) {
            throw PayloadTooLarge("upload of " + std::to_string(payload.size()) + " bytes exceeds the limit of " +
                                  std::to_string(config.max_upload_bytes));
        }
        const auto kind = classify_payload(payload);
        JobRecord job;
        job.id = new_job_id();
        job.payload = kind.kind;
        job.payload_file = kind.file_name;
        job.created = job.updated = utc_timestamp();
        job.progress_total = config.train.iterations;
        // Payload first: a record on disk always has its payload.
        fs::create_directories(dir(job));
        write_file(dir(job) / job.payload_file, payload);
        store.save(job);
        auto entry = std::make_shared<JobEntry>();
        entry->record = job;
        {
            std::lock_guard lock(jobs_mutex);
            jobs.emplace(job.id, entry);
        }
        log_line("job " + job.id + ": submitted (" + kind.detected + ")");
        enqueue(job.id);
        return job;
    }

    bool remove(const std::string& id) {
        const auto entry = find(id);
        if (!entry) return false;
        bool remove_now = false;
        {
            std::lock_guard lock(entry->mutex);
            if (entry->cancel.exchange(true)) return false;
            remove_now = !entry->active;
        }
        if (remove_now) erase(id);
        return true;
    }
};

PipelineService::PipelineService(ServiceConfig config) {
    config.validate();
    mImpl = std::make_unique<Impl>(std::move(config));
}

PipelineService::~PipelineService() { stop(); }

void PipelineService::start() {
    auto& impl = *mImpl;
    if (impl.started) return;
    std::vector<std::string> warnings;
    for (auto& record : impl.store.load_all(&warnings)) {
        auto entry = std::make_shared<JobEntry>();
        const bool pending = !is_terminal(record.state);
        entry->record = std::move(record);
        const auto id = entry->record.id;
        impl.jobs.emplace(id, entry);
        if (pending) {
            impl.queue.push_back(id);
            log_line("job " + id + ": resuming at " + std::string(to_string(entry->record.state)));
        }
    }
    for (const auto& w : warnings) log_line("skipping unreadable job record " + w);

    impl.install_routes();
    if (impl.config.port == 0) {
        impl.bound_port = impl.server.bind_to_any_port(impl.config.host);
        if (impl.bound_port <= 0) throw IoError("cannot listen on " + impl.config.host + ":0");
    } else {
        if (!impl.server.bind_to_port(impl.config.host, impl.config.port)) {
            throw IoError("cannot listen on " + impl.config.listen_address());
        }
        impl.bound_port = impl.config.port;
    }
    impl.started = true;
    impl.server_thread = std::thread([&impl] { impl.server.listen_after_bind(); });
    for (int i = 0; i < impl.config.workers; ++i) {
        impl.workers.emplace_back([&impl] { impl.worker_loop(); });
    }
    impl.server.wait_until_ready();
}

void PipelineService::stop() {
    if (!mImpl || !mImpl->started) return;
    auto& impl = *mImpl;
    impl.stopping.store(true);
    impl.queue_cv.notify_all();
    impl.server.stop();
    if (impl.server_thread.joinable()) impl.server_thread.join();
    for (auto& w : impl.workers) {
        if (w.joinable()) w.join();
    }
    impl.workers.clear();
    impl.started = false;
}

int PipelineService::port() const { return mImpl->bound_port; }

const ServiceConfig& PipelineService::config() const { return mImpl->config; }

JobRecord PipelineService::submit(std::string_view payload) { return mImpl->submit(payload); }

std::optional<JobRecord> PipelineService::job(const std::string& id) const {
    const auto entry = mImpl->find(id);
    if (!entry || entry->cancel.load()) return std::nullopt;
    return mImpl->snapshot(*entry);
}

std::vector<JobRecord> PipelineService::jobs() const {
    std::vector<std::shared_ptr<JobEntry>> entries;
    {
        std::lock_guard lock(mImpl->jobs_mutex);
        for (const auto& [id, e] : mImpl->jobs) entries.push_back(e);
    }
    std::vector<JobRecord> out;
    for (const auto& e : entries) {
        if (!e->cancel.load()) out.push_back(mImpl->snapshot(*e));
    }
    return out;
}

bool PipelineService::remove(const std::string& id) { return mImpl->remove(id); }

std::string PipelineService::job_view_json(const JobRecord& job) {
    nlohmann::json j{{"id", job.id},
                     {"state", to_string(job.state)},
                     {"progress", {{"iteration", job.progress_iteration}, {"total", job.progress_total}}},
                     {"created", job.created},
                     {"updated", job.updated},
                     {"payload", to_string(job.payload)}};
    if (job.state == JobState::Failed) j["error"] = job.error;
    auto& log = j["transitions"] = nlohmann::json::array();
    for (const auto& t : job.transitions) {
        log.push_back({{"from", to_string(t.from)}, {"to", to_string(t.to)}, {"at", t.at}});
    }
    return j.dump();
}

} // namespace splatcap::service
