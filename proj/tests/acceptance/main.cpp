// Copyright Contributors to the splatcap project
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance runner: one PASS/FAIL line per release criterion. Exit status
// is non-zero when any criterion fails. An optional argument restricts the
// run to criteria whose name contains it.
#include "colmap_oracle.hpp"
#include "gradient_check.hpp"
#include "service_fixture.hpp"
#include "test_support.hpp"

#include <splatcap/archive.hpp>
#include <splatcap/colmap.hpp>
#include <splatcap/error.hpp>
#include <splatcap/image_io.hpp>
#include <splatcap/metrics.hpp>
#include <splatcap/ply.hpp>
#include <splatcap/rasterizer.hpp>
#include <splatcap/service/config.hpp>
#include <splatcap/service/payload.hpp>
#include <splatcap/service/service.hpp>
#include <splatcap/service/subprocess.hpp>
#include <splatcap/synthetic.hpp>
#include <splatcap/trainer.hpp>

#include <algorithm>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <sys/wait.h>
#include <thread>
#include <unistd.h>

using namespace splatcap;
using namespace std::chrono_literals;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fixed(double v, int digits = 2) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(digits) << v;
    return out.str();
}

std::string sci(double v) {
    std::ostringstream out;
    out << std::scientific << std::setprecision(2) << v;
    return out.str();
}

// Oracle equivalence -------------------------------------------------------

Outcome oracle_equivalence() {
    Rng rng(20260101);
    const auto start = Clock::now();
    double worst = 0.0;
    for (int scene = 0; scene < 200; ++scene) {
        const auto n = rng.index(65);
        const auto cloud = testkit::random_cloud(rng, n, static_cast<int>(rng.index(4)));
        const auto camera = testkit::random_camera(rng, 64, 64);
        const Vec3 bg(rng.uniform(), rng.uniform(), rng.uniform());
        const auto tiled = render(cloud, camera, bg).image;
        worst = std::max(worst, testkit::max_abs_diff(tiled, render_reference(cloud, camera, bg)));
    }
    const double elapsed = seconds_since(start);
    return {worst <= 1e-5 && elapsed < 60.0,
            "200 scenes, max abs diff " + sci(worst) + ", " + fixed(elapsed) + " s"};
}

// Gradient suite -----------------------------------------------------------

Outcome gradient_suite() {
    Rng rng(20260202);
    const auto start = Clock::now();
    testkit::GradientCheck total;
    testkit::SplatRanges ranges;
    ranges.scale_min = 0.15; // footprints of a few pixels at 16×16
    ranges.scale_max = 0.5;
    for (int scene = 0; scene < 50; ++scene) {
        const auto n = 1 + rng.index(8);
        const auto cloud = testkit::random_cloud(rng, n, static_cast<int>(rng.index(4)), ranges);
        const auto camera = testkit::random_camera(rng, 16, 16);
        const auto target = testkit::random_image(rng, 16, 16);
        LossConfig config;
        config.lambda_dssim = rng.uniform() < 0.5 ? 0.0 : 0.2;
        config.background = Vec3(rng.uniform(), rng.uniform(), rng.uniform());
        const auto check = testkit::check_gradients(cloud, camera, target, config, 1e-4, 1e-3, 1e-6);
        total.compared += check.compared;
        total.passed += check.passed;
        if (check.worst_relative > total.worst_relative) {
            total.worst_relative = check.worst_relative;
            total.worst_label = "scene " + std::to_string(scene) + " " + check.worst_label;
        }
    }
    const double elapsed = seconds_since(start);
    const double fraction = total.pass_fraction();
    return {fraction >= 0.99 && elapsed < 300.0 && total.compared > 0,
            std::to_string(total.passed) + "/" + std::to_string(total.compared) + " coordinates (" +
                fixed(100.0 * fraction) + "%) within 1e-3 at eps 1e-4, worst " + sci(total.worst_relative) +
                " at " + total.worst_label + ", " + fixed(elapsed) + " s"};
}

// Synthetic recovery -------------------------------------------------------

Outcome synthetic_recovery() {
    const auto scene = make_synthetic_scene(SyntheticSpec{});
    TrainingDataset dataset = testkit::synthetic_dataset(scene);
    TrainConfig config;
    config.iterations = 2000;
    config.seed = 7;
    const auto start = Clock::now();
    const auto result = train(dataset, config, scene.perturbed);
    const double elapsed = seconds_since(start);
    const auto& last = result.report.final_checkpoint();
    const double initial = result.report.checkpoints.front().train_psnr;
    return {last.train_psnr > 30.0 && elapsed < 600.0,
            "train PSNR " + fixed(initial) + " -> " + fixed(last.train_psnr) + " dB, " +
                std::to_string(result.cloud.size()) + " splats, " + fixed(elapsed) + " s"};
}

// Format suite -------------------------------------------------------------

Outcome ply_round_trip() {
    Rng rng(20260303);
    int exact = 0;
    for (int i = 0; i < 1000; ++i) {
        const auto cloud = testkit::random_float_cloud(rng, rng.index(200));
        const bool ascii = i % 4 == 3;
        const auto bytes = ascii ? write_splat_ply_ascii(cloud) : write_splat_ply(cloud);
        const auto back = read_splat_ply(bytes);
        if (back == cloud && (ascii ? write_splat_ply_ascii(back) : write_splat_ply(back)) == bytes) ++exact;
    }
    return {exact == 1000, std::to_string(exact) + "/1000 clouds bit-exact"};
}

Outcome colmap_parity() {
    Rng rng(20260404);
    int equal = 0;
    for (int i = 0; i < 100; ++i) {
        const auto model = testkit::random_sparse_model(rng);
        const auto from_text = parse_colmap_sparse(testkit::colmap_text_oracle(model));
        const auto from_binary = parse_colmap_sparse(testkit::colmap_binary_oracle(model));
        const auto library_text = parse_colmap_sparse(write_colmap_text(model));
        const auto library_binary = parse_colmap_sparse(write_colmap_binary(model));
        // Parsing normalizes quaternions, so parity is between parsed models.
        if (from_text == from_binary && library_text == from_text && library_binary == from_text) {
            ++equal;
        }
    }
    return {equal == 100, std::to_string(equal) + "/100 models identical across text and binary"};
}

/// Input families for the fuzzer; each owns a seed corpus and a consumer.
struct FuzzTarget {
    std::string name;
    std::vector<std::string> seeds;
    std::function<void(const std::string&)> consume;
};

std::string gzip_bytes(const std::string& bytes) {
    testkit::TempDir dir;
    write_file(dir / "in", bytes);
    const std::string cmd = "gzip -c " + service::shell_quote((dir / "in").string()) + " > " +
                            service::shell_quote((dir / "out").string());
    if (std::system(cmd.c_str()) != 0) throw IoError("gzip failed");
    return read_file(dir / "out");
}

/// GNU tar output with a long-name extension record.
std::string system_tar_with_long_names() {
    testkit::TempDir dir;
    const auto deep = dir / "src" / std::string(120, 'd');
    std::filesystem::create_directories(deep);
    write_file(deep / "frame.png", "png bytes");
    const std::string cmd = "tar cf " + service::shell_quote((dir / "out.tar").string()) + " -C " +
                            service::shell_quote((dir / "src").string()) + " .";
    if (std::system(cmd.c_str()) != 0) throw IoError("tar failed");
    return read_file(dir / "out.tar");
}

std::vector<FuzzTarget> fuzz_targets() {
    Rng rng(20260505);
    std::vector<FuzzTarget> targets;

    FuzzTarget ply{"ply", {}, [](const std::string& b) { read_splat_ply(b); }};
    for (int i = 0; i < 12; ++i) {
        const auto cloud = testkit::random_float_cloud(rng, rng.index(6));
        ply.seeds.push_back(i % 2 ? write_splat_ply_ascii(cloud) : write_splat_ply(cloud));
    }
    targets.push_back(ply);

    std::vector<SparseFiles> models;
    for (int i = 0; i < 6; ++i) {
        const auto model = testkit::random_sparse_model(rng);
        models.push_back(i % 2 ? write_colmap_text(model) : testkit::colmap_binary_oracle(model));
    }
    for (const char* stem : {"cameras", "images", "points3D"}) {
        FuzzTarget t{std::string("colmap-") + stem, {}, {}};
        // The mutated file replaces its namesake in a valid model.
        auto base = std::make_shared<std::vector<SparseFiles>>(models);
        auto index = std::make_shared<std::size_t>(0);
        for (const auto& files : models) {
            for (const auto& [name, bytes] : files) {
                if (name.rfind(stem, 0) == 0) t.seeds.push_back(name + '\n' + bytes);
            }
        }
        t.consume = [base, index](const std::string& b) {
            const auto newline = b.find('\n');
            if (newline == std::string::npos) return;
            auto files = (*base)[(*index)++ % base->size()];
            const auto name = b.substr(0, newline);
            if (name != "cameras.txt" && name != "cameras.bin" && name != "images.txt" && name != "images.bin" &&
                name != "points3D.txt" && name != "points3D.bin") {
                return;
            }
            const bool text = name.size() > 4 && name.compare(name.size() - 4, 4, ".txt") == 0;
            // Keep all three files in one format so the mutated one is read.
            SparseFiles same;
            for (const auto& [n, bytes] : files) {
                const bool is_text = n.compare(n.size() - 4, 4, ".txt") == 0;
                if (is_text == text) same[n] = bytes;
            }
            if (same.size() != 3) return;
            same[name] = b.substr(newline + 1);
            parse_colmap_sparse(same);
        };
        targets.push_back(t);
    }

    FuzzTarget png{"png", {}, [](const std::string& b) { decode_image(b); }};
    for (int i = 0; i < 4; ++i) png.seeds.push_back(encode_png(testkit::random_image(rng, 1 + i * 3, 2 + i)));
    png.seeds.push_back(std::string("\xff\xd8\xff\xe0", 4) + std::string(64, '\0'));
    targets.push_back(png);

    FuzzTarget tar{"tar", {}, [](const std::string& b) {
                       if (is_gzip(b)) {
                           read_tar(gunzip(b, 1 << 24));
                       } else {
                           read_tar(b);
                       }
                   }};
    for (int i = 0; i < 4; ++i) {
        std::vector<ArchiveEntry> entries;
        for (std::size_t k = 0; k <= rng.index(4); ++k) {
            entries.push_back({"dir/" + std::string(1 + rng.index(60), 'a') + std::to_string(k) + ".png",
                               std::string(rng.index(900), 'x')});
        }
        tar.seeds.push_back(write_tar(entries));
    }
    tar.seeds.push_back(gzip_bytes(tar.seeds.front()));
    tar.seeds.push_back(system_tar_with_long_names());
    targets.push_back(tar);

    FuzzTarget payload{"payload", {}, [](const std::string& b) { service::classify_payload(b); }};
    payload.seeds = {tar.seeds.back(), tar.seeds.front(), testkit::fake_video()};
    targets.push_back(payload);

    FuzzTarget job{"job-json", {}, [](const std::string& b) { service::job_from_json(b); }};
    service::JobRecord record;
    record.id = service::new_job_id();
    record.created = service::utc_timestamp();
    service::transition(record, service::JobState::Training);
    job.seeds.push_back(service::job_to_json(record));
    targets.push_back(job);

    FuzzTarget config{"train-config", {}, [](const std::string& b) { service::parse_train_config(b); }};
    config.seeds.push_back(service::train_config_to_json(TrainConfig{}));
    targets.push_back(config);
    return targets;
}

std::string mutate(Rng& rng, std::string b) {
    static const std::vector<std::string> tokens{"-1", "0", "nan", "inf", "1e308", "-1e308", "4294967295",
                                                 "18446744073709551615", "element vertex 999999999\n", " ", "\n",
                                                 "end_header\n", "#", "\0", "property float x\n"};
    static const std::vector<std::uint64_t> words{0, 1, 0x7f, 0x80, 0xff, 0x7fffffff, 0xffffffff,
                                                  0xffffffffffffffffULL, 0x8000000000000000ULL};
    const int ops = 1 + static_cast<int>(rng.index(4));
    for (int op = 0; op < ops; ++op) {
        const std::size_t pos = b.empty() ? 0 : rng.index(b.size());
        switch (rng.index(9)) {
        case 0:
            if (!b.empty()) b[pos] = static_cast<char>(b[pos] ^ (1 << rng.index(8)));
            break;
        case 1:
            if (!b.empty()) b[pos] = static_cast<char>(rng.index(256));
            break;
        case 2: {
            const auto w = words[rng.index(words.size())];
            const std::size_t width = rng.index(2) ? 4 : 8;
            for (std::size_t i = 0; i < width && pos + i < b.size(); ++i) b[pos + i] = static_cast<char>(w >> (8 * i));
            break;
        }
        case 3:
            b.resize(b.empty() ? 0 : rng.index(b.size()));
            break;
        case 4:
            b.insert(pos, tokens[rng.index(tokens.size())]);
            break;
        case 5:
            if (!b.empty()) b.erase(pos, 1 + rng.index(std::min<std::size_t>(16, b.size() - pos)));
            break;
        case 6: {
            if (b.empty()) break;
            const std::size_t len = 1 + rng.index(std::min<std::size_t>(512, b.size() - pos));
            b.insert(rng.index(b.size()), b.substr(pos, len));
            break;
        }
        case 7: {
            // Numeric text: replace a digit run with another number.
            std::size_t d = pos;
            while (d < b.size() && !std::isdigit(static_cast<unsigned char>(b[d]))) ++d;
            std::size_t e = d;
            while (e < b.size() && std::isdigit(static_cast<unsigned char>(b[e]))) ++e;
            if (d < b.size()) b.replace(d, e - d, tokens[rng.index(9)]);
            break;
        }
        default:
            b.insert(pos, std::string(1 + rng.index(8), static_cast<char>(rng.index(256))));
            break;
        }
    }
    if (b.size() > (std::size_t{1} << 20)) b.resize(std::size_t{1} << 20);
    return b;
}

struct FuzzSummary {
    long inputs = 0;
    long rejected = 0;       // splatcap::Error
    long unexpected = 0;     // any other exception type
    double slowest_ms = 0.0;
    char first_unexpected[160] = {};
};

/// Runs in a child process so that a crash or a hang is observed by the
/// parent instead of taking the runner down.
FuzzSummary fuzz_child() {
    FuzzSummary s;
    auto targets = fuzz_targets();
    Rng rng(20260606);
    constexpr int kPerTarget = 1500;
    for (auto& t : targets) {
        for (int i = 0; i < kPerTarget; ++i) {
            const auto input = mutate(rng, t.seeds[rng.index(t.seeds.size())]);
            const auto t0 = Clock::now();
            try {
                t.consume(input);
            } catch (const Error&) {
                ++s.rejected;
            } catch (const std::exception& e) {
                if (s.unexpected++ == 0) {
                    std::snprintf(s.first_unexpected, sizeof s.first_unexpected, "%s: %s", t.name.c_str(), e.what());
                }
            }
            s.slowest_ms = std::max(s.slowest_ms, std::chrono::duration<double, std::milli>(Clock::now() - t0).count());
            ++s.inputs;
        }
    }
    return s;
}

Outcome fuzz_corpus() {
    int fds[2];
    if (::pipe(fds) != 0) return {false, "pipe failed"};
    std::cout.flush();
    const pid_t pid = ::fork();
    if (pid < 0) return {false, "fork failed"};
    if (pid == 0) {
        ::close(fds[0]);
        FuzzSummary s;
        try {
            s = fuzz_child();
        } catch (const std::exception& e) {
            std::cerr << "fuzzer setup failed: " << e.what() << std::endl;
            ::_exit(3);
        }
        const auto written = ::write(fds[1], &s, sizeof s);
        ::_exit(written == static_cast<ssize_t>(sizeof s) ? 0 : 4);
    }
    ::close(fds[1]);
    const auto deadline = Clock::now() + 900s;
    int status = 0;
    bool hung = false;
    while (::waitpid(pid, &status, WNOHANG) == 0) {
        if (Clock::now() > deadline) {
            ::kill(pid, SIGKILL);
            ::waitpid(pid, &status, 0);
            hung = true;
            break;
        }
        std::this_thread::sleep_for(50ms);
    }
    FuzzSummary s;
    const auto got = ::read(fds[0], &s, sizeof s);
    ::close(fds[0]);
    if (hung) return {false, "fuzzer exceeded 900 s"};
    if (WIFSIGNALED(status)) return {false, "fuzzer crashed with signal " + std::to_string(WTERMSIG(status))};
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0 || got != static_cast<ssize_t>(sizeof s)) {
        return {false, "fuzzer exited abnormally (status " + std::to_string(status) + ")"};
    }
    const bool pass = s.inputs >= 10000 && s.unexpected == 0 && s.slowest_ms < 5000.0;
    std::string detail = std::to_string(s.inputs) + " inputs, 0 crashes, " + std::to_string(s.rejected) +
                         " rejected with diagnostics, " + std::to_string(s.unexpected) +
                         " unexpected exceptions, slowest " + fixed(s.slowest_ms) + " ms";
    if (s.unexpected) detail += " (first: " + std::string(s.first_unexpected) + ")";
    return {pass, detail};
}

Outcome format_suite() {
    const auto ply = ply_round_trip();
    const auto colmap = colmap_parity();
    const auto fuzz = fuzz_corpus();
    return {ply.pass && colmap.pass && fuzz.pass, ply.detail + "; " + colmap.detail + "; " + fuzz.detail};
}

// Determinism --------------------------------------------------------------

Outcome determinism() {
    testkit::TempDir dir;
    const auto synth = testkit::run_cli({"synth", (dir / "ds").string()});
    if (synth.exit_code != 0) return {false, "synth failed: " + synth.err};
    const auto start = Clock::now();
    std::vector<std::string> models;
    for (const char* out : {"a", "b"}) {
        const auto r = testkit::run_cli(
            {"train", (dir / "ds").string(), "--out", (dir / out).string(), "--seed", "7", "--iterations", "2000"});
        if (r.exit_code != 0) return {false, "train failed: " + r.err};
        models.push_back(read_file(dir / out / "model.ply"));
    }
    const bool same = models[0] == models[1];
    return {same, std::string(same ? "identical" : "different") + " model.ply (" + std::to_string(models[0].size()) +
                      " bytes) from two 2000-iteration runs, " + fixed(seconds_since(start)) + " s"};
}

// Service end-to-end -------------------------------------------------------

bool legal_log(const service::JobRecord& job) {
    auto state = service::JobState::Queued;
    for (const auto& t : job.transitions) {
        if (t.from != state || !service::is_legal_transition(t.from, t.to)) return false;
        state = t.to;
    }
    return state == job.state;
}

Outcome service_end_to_end() {
    testkit::TempDir dir;
    const auto scene = make_synthetic_scene(SyntheticSpec{});
    const auto tools = testkit::make_mock_tools(dir.path(), scene);
    auto config = testkit::mock_service_config(dir / "data", tools, 2000);
    config.train = TrainConfig{};
    config.train.iterations = 2000;
    config.train.seed = 7;
    const auto start = Clock::now();
    const auto deadline = 900s;

    auto svc = std::make_unique<service::PipelineService>(config);
    svc->start();
    const auto posted = testkit::http_post_capture(svc->port(), testkit::fake_video());
    if (posted.status != 201) return {false, "submit returned " + std::to_string(posted.status)};
    const auto id = testkit::json_string(posted.body, "id");
    std::vector<std::string> seen{"queued"};
    const auto training = testkit::poll_job(
        svc->port(), id,
        [&](const std::string& s) {
            const auto job = svc->job(id);
            return s == "training" && job && job->progress_iteration >= 200;
        },
        std::chrono::duration_cast<std::chrono::seconds>(deadline), &seen);
    if (!training) return {false, "job never reached training; states seen: " + std::to_string(seen.size())};
    svc->stop();
    svc.reset();
    const auto persisted = service::JobStore(config.data_root).load(id);
    if (!persisted || persisted->state != service::JobState::Training) return {false, "job lost across restart"};

    svc = std::make_unique<service::PipelineService>(config);
    svc->start();
    const auto remaining = deadline - std::chrono::duration_cast<std::chrono::seconds>(Clock::now() - start);
    const auto done = testkit::poll_job(
        svc->port(), id, [](const std::string& s) { return s == "ready" || s == "failed"; },
        std::chrono::duration_cast<std::chrono::seconds>(remaining), &seen);
    const double elapsed = seconds_since(start);
    if (!done) return {false, "job not finished within 15 min"};
    if (testkit::json_string(*done, "state") != "ready") {
        return {false, "job failed: " + testkit::json_string(*done, "error")};
    }
    bool observed_legal = true;
    std::string path = seen.front();
    for (std::size_t i = 1; i < seen.size(); ++i) {
        observed_legal = observed_legal && service::is_legal_transition(*service::parse_job_state(seen[i - 1]),
                                                                         *service::parse_job_state(seen[i]));
        path += "->" + seen[i];
    }
    const auto job = svc->job(id);
    const bool logged_legal = job && legal_log(*job);

    const auto model = testkit::http_get(svc->port(), "/jobs/" + id + "/model.ply");
    if (model.status != 200) return {false, "model.ply returned " + std::to_string(model.status)};
    const auto cloud = read_splat_ply(model.body);
    const auto& view = scene.sparse.images.front();
    const auto frame = render(cloud, scene.sparse.camera_for(view), Vec3::Zero());
    const double quality = psnr(frame.image, scene.images.front());
    svc->stop();
    const bool pass = observed_legal && logged_legal && cloud.size() > 0 && std::isfinite(quality) &&
                      elapsed < 900.0;
    return {pass, "states " + path + " with a restart mid-training, " + std::to_string(cloud.size()) +
                      " splats, view 0 PSNR " + fixed(quality) + " dB, " + fixed(elapsed) + " s"};
}

// Bench sanity -------------------------------------------------------------

double bench_ms(const std::filesystem::path& model, double* fps) {
    const auto r = testkit::run_cli(
        {"bench", model.string(), "--resolution", "640x480", "--frames", "5", "--warmup", "1", "--workers", "0"});
    if (r.exit_code != 0) throw Error("bench failed: " + r.err);
    auto field = [&](const std::string& key) {
        const auto pos = r.out.find(key + ": ");
        if (pos == std::string::npos) throw Error("bench output lacks " + key);
        return std::stod(r.out.substr(pos + key.size() + 2));
    };
    *fps = field("fps_median");
    return field("ms_median");
}

Outcome bench_sanity() {
    testkit::TempDir dir;
    Rng rng(20260707);
    testkit::SplatRanges ranges;
    ranges.position_extent = 1.0;
    ranges.scale_min = 0.005;
    ranges.scale_max = 0.025;
    save_splat_ply(dir / "10k.ply", testkit::random_cloud(rng, 10000, 3, ranges));
    save_splat_ply(dir / "20k.ply", testkit::random_cloud(rng, 20000, 3, ranges));
    double fps10 = 0.0, fps20 = 0.0;
    const double ms10 = bench_ms(dir / "10k.ply", &fps10);
    const double ms20 = bench_ms(dir / "20k.ply", &fps20);
    const double ratio = ms20 / ms10;
    return {ratio <= 3.0, "10K " + fixed(ms10) + " ms (" + fixed(fps10) + " fps), 20K " + fixed(ms20) + " ms (" +
                              fixed(fps20) + " fps), ratio " + fixed(ratio)};
}

} // namespace

int main(int argc, char** argv) {
    const std::string filter = argc > 1 ? argv[1] : "";
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"oracle-equivalence", oracle_equivalence}, {"gradient-suite", gradient_suite},
        {"synthetic-recovery", synthetic_recovery}, {"format-suite", format_suite},
        {"determinism", determinism},               {"service-end-to-end", service_end_to_end},
        {"bench-sanity", bench_sanity},
    };
    int failures = 0;
    for (const auto& [name, run] : criteria) {
        if (name.find(filter) == std::string::npos) continue;
        Outcome outcome;
        try {
            outcome = run();
        } catch (const std::exception& e) {
            outcome = {false, std::string("error: ") + e.what()};
        }
        failures += outcome.pass ? 0 : 1;
        std::cout << (outcome.pass ? "PASS " : "FAIL ") << name << ": " << outcome.detail << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
