// Copyright Contributors to the splatcap project
// SPDX-License-Identifier: Apache-2.0
//
#include "service_fixture.hpp"
#include "test_support.hpp"

#include <splatcap/image_io.hpp>
#include <splatcap/ply.hpp>
#include <splatcap/rasterizer.hpp>

#include <gtest/gtest.h>

#include <cstdio>
#include <csignal>
#include <sys/wait.h>
#include <unistd.h>

using namespace splatcap;
using testkit::run_cli;

namespace {

bool contains(const std::string& text, const std::string& needle) { return text.find(needle) != std::string::npos; }

std::string write_cloud(const testkit::TempDir& dir, const std::string& name, std::size_t n) {
    Rng rng(5);
    const auto path = (dir / name).string();
    save_splat_ply(path, testkit::random_float_cloud(rng, n));
    return path;
}

} // namespace

TEST(Cli, UsageErrorsExitWithTwo) {
    const auto none = run_cli({});
    EXPECT_NE(none.exit_code, 0);
    const auto bad = run_cli({"info"});
    EXPECT_EQ(bad.exit_code, 2);
    EXPECT_TRUE(contains(bad.err, "error: ")) << bad.err;
    EXPECT_EQ(run_cli({"frobnicate"}).exit_code, 2);
    EXPECT_EQ(run_cli({"bench", "x.ply", "--frames", "many"}).exit_code, 2);
    const auto help = run_cli({"--help"});
    EXPECT_EQ(help.exit_code, 0);
    for (const char* sub : {"info", "convert", "render", "train", "bench", "serve"}) {
        EXPECT_TRUE(contains(help.out, sub)) << sub;
    }
}

TEST(Cli, InfoOnAnEmptyCloud) {
    testkit::TempDir dir;
    const auto path = write_cloud(dir, "empty.ply", 0);
    const auto r = run_cli({"info", path});
    EXPECT_EQ(r.exit_code, 0) << r.err;
    EXPECT_TRUE(contains(r.out, "count: 0\n")) << r.out;
}

TEST(Cli, InfoSummarizes) {
    testkit::TempDir dir;
    const auto r = run_cli({"info", write_cloud(dir, "c.ply", 25)});
    EXPECT_EQ(r.exit_code, 0);
    EXPECT_TRUE(contains(r.out, "count: 25\n"));
    EXPECT_TRUE(contains(r.out, "sh_degree: "));
    EXPECT_TRUE(contains(r.out, "bbox_min: "));
}

TEST(Cli, InfoCountsHalfAMillionSplats) {
    testkit::TempDir dir;
    Rng rng(6);
    const auto one = write_splat_ply(testkit::random_float_cloud(rng, 1));
    const auto header_end = one.find("end_header\n") + 11;
    std::string header = one.substr(0, header_end);
    header.replace(header.find("element vertex 1\n"), 17, "element vertex 500000\n");
    const std::string record = one.substr(header_end);
    std::string bytes = header;
    bytes.reserve(header.size() + record.size() * 500000);
    for (int i = 0; i < 500000; ++i) bytes += record;
    write_file(dir / "big.ply", bytes);
    const auto r = run_cli({"info", (dir / "big.ply").string()});
    EXPECT_EQ(r.exit_code, 0) << r.err;
    EXPECT_TRUE(contains(r.out, "count: 500000\n")) << r.out;
}

TEST(Cli, TruncatedFileReportsTheByteOffset) {
    testkit::TempDir dir;
    const auto path = write_cloud(dir, "t.ply", 3);
    auto bytes = read_file(path);
    bytes.resize(bytes.size() - 10);
    write_file(path, bytes);
    const auto r = run_cli({"info", path});
    EXPECT_EQ(r.exit_code, 1);
    EXPECT_TRUE(contains(r.err, "error: ")) << r.err;
    EXPECT_TRUE(contains(r.err, "byte offset")) << r.err;
    const auto missing = run_cli({"info", (dir / "absent.ply").string()});
    EXPECT_EQ(missing.exit_code, 1);
    EXPECT_TRUE(contains(missing.err, "absent.ply"));
}

TEST(Cli, ConvertRoundTrips) {
    testkit::TempDir dir;
    const auto path = write_cloud(dir, "b.ply", 7);
    ASSERT_EQ(run_cli({"convert", path, (dir / "a.ply").string(), "--format", "ascii"}).exit_code, 0);
    EXPECT_TRUE(contains(read_file(dir / "a.ply"), "format ascii 1.0"));
    ASSERT_EQ(run_cli({"convert", (dir / "a.ply").string(), (dir / "b2.ply").string()}).exit_code, 0);
    EXPECT_EQ(read_file(dir / "b2.ply"), read_file(path));
    EXPECT_EQ(run_cli({"convert", path, (dir / "x.ply").string(), "--format", "xml"}).exit_code, 1);
}

TEST(Cli, RenderIsDeterministic) {
    testkit::TempDir dir;
    const auto path = write_cloud(dir, "r.ply", 40);
    for (const char* out : {"one", "two"}) {
        const auto r = run_cli({"render", path, "--out", (dir / out).string(), "--resolution", "40x30", "--frames",
                                "3", "--workers", out[0] == 'o' ? "1" : "3"});
        ASSERT_EQ(r.exit_code, 0) << r.err;
    }
    for (int i = 0; i < 3; ++i) {
        const auto name = "frame_000" + std::to_string(i) + ".png";
        EXPECT_EQ(read_file(dir / "one" / name), read_file(dir / "two" / name)) << name;
        const auto image = load_image(dir / "one" / name);
        EXPECT_EQ(image.width(), 40);
        EXPECT_EQ(image.height(), 30);
    }
    EXPECT_FALSE(std::filesystem::exists(dir / "one" / "frame_0003.png"));
}

TEST(Cli, RenderOfAnEmptyCloudIsBackground) {
    testkit::TempDir dir;
    const auto r = run_cli({"render", write_cloud(dir, "e.ply", 0), "--out", (dir / "o").string(), "--resolution",
                            "8x8", "--frames", "1", "--background", "1,0,0"});
    ASSERT_EQ(r.exit_code, 0) << r.err;
    const auto image = load_image(dir / "o" / "frame_0000.png");
    for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) EXPECT_EQ(image.pixel(x, y), Vec3(1, 0, 0));
    }
    EXPECT_EQ(run_cli({"render", write_cloud(dir, "e.ply", 0), "--out", (dir / "p").string(), "--resolution",
                       "8by8"})
                  .exit_code,
              1);
}

TEST(Cli, RenderFromColmapPoses) {
    testkit::TempDir dir;
    SyntheticSpec spec;
    spec.width = 24;
    spec.height = 20;
    spec.views = 3;
    const auto scene = make_synthetic_scene(spec);
    write_synthetic_dataset(dir / "ds", scene);
    const auto r = run_cli({"render", (dir / "ds" / "truth.ply").string(), "--out", (dir / "o").string(),
                            "--cameras", (dir / "ds" / "sparse").string()});
    ASSERT_EQ(r.exit_code, 0) << r.err;
    // Frames match the brute-force reference up to 8-bit quantization.
    for (int v = 0; v < 3; ++v) {
        const auto frame = load_image(dir / "o" / ("frame_000" + std::to_string(v) + ".png"));
        const auto golden = render_reference(scene.truth, scene.sparse.camera_for(scene.sparse.images[v]),
                                             Vec3::Zero());
        EXPECT_LE(testkit::max_abs_diff(frame, golden), 0.5 / 255.0 + 1e-5);
        EXPECT_LE(testkit::max_abs_diff(frame, scene.images[v]), 1.0 / 255.0 + 1e-12);
    }
}

TEST(Cli, TrainWithZeroIterationsWritesTheSeed) {
    testkit::TempDir dir;
    ASSERT_EQ(run_cli({"synth", (dir / "ds").string(), "--resolution", "24x24", "--views", "4"}).exit_code, 0);
    const auto r = run_cli({"train", (dir / "ds").string(), "--out", (dir / "out").string(), "--iterations", "0"});
    ASSERT_EQ(r.exit_code, 0) << r.err;
    const auto cloud = load_splat_ply(dir / "out" / "model.ply");
    EXPECT_EQ(cloud.size(), 20u);
    EXPECT_EQ(cloud.active_sh_degree, 0);
    EXPECT_TRUE(contains(r.out, "final_psnr: "));
    EXPECT_TRUE(std::filesystem::exists(dir / "out" / "metrics.log"));
}

TEST(Cli, TrainErrorsNameTheirCause) {
    testkit::TempDir dir;
    ASSERT_EQ(run_cli({"synth", (dir / "ds").string(), "--resolution", "16x16", "--views", "3"}).exit_code, 0);
    const auto missing = run_cli({"train", (dir / "ds").string(), "--out", (dir / "o").string(), "--config",
                                  (dir / "nope.json").string()});
    EXPECT_EQ(missing.exit_code, 1);
    EXPECT_TRUE(contains(missing.err, "nope.json")) << missing.err;
    write_file(dir / "bad.json", R"({"itertions": 5})");
    const auto unknown = run_cli({"train", (dir / "ds").string(), "--out", (dir / "o").string(), "--config",
                                  (dir / "bad.json").string()});
    EXPECT_EQ(unknown.exit_code, 1);
    EXPECT_TRUE(contains(unknown.err, "itertions"));
    const auto no_data = run_cli({"train", (dir / "missing").string(), "--out", (dir / "o").string()});
    EXPECT_EQ(no_data.exit_code, 1);
    EXPECT_TRUE(contains(no_data.err, "missing"));
}

TEST(Cli, TrainIsReproducible) {
    testkit::TempDir dir;
    ASSERT_EQ(run_cli({"synth", (dir / "ds").string(), "--resolution", "24x24", "--views", "4"}).exit_code, 0);
    write_file(dir / "cfg.json", R"({"densify_from": 20, "densify_interval": 20, "densify_until": 60})");
    for (const char* out : {"a", "b"}) {
        const auto r = run_cli({"train", (dir / "ds").string(), "--out", (dir / out).string(), "--iterations", "60",
                                "--seed", "7", "--config", (dir / "cfg.json").string()});
        ASSERT_EQ(r.exit_code, 0) << r.err;
    }
    EXPECT_EQ(read_file(dir / "a" / "model.ply"), read_file(dir / "b" / "model.ply"));
}

TEST(Cli, TrainRecoversTheSyntheticScene) {
    testkit::TempDir dir;
    ASSERT_EQ(run_cli({"synth", (dir / "ds").string()}).exit_code, 0);
    const auto r = run_cli(
        {"train", (dir / "ds").string(), "--out", (dir / "o").string(), "--iterations", "2000", "--seed", "7"});
    ASSERT_EQ(r.exit_code, 0) << r.err;
    const auto pos = r.out.find("final_psnr: ");
    ASSERT_NE(pos, std::string::npos);
    EXPECT_GT(std::stod(r.out.substr(pos + 12)), 30.0) << r.out;
}

TEST(Cli, BenchReportsTimings) {
    testkit::TempDir dir;
    for (std::size_t n : {0u, 30u}) {
        const auto r = run_cli({"bench", write_cloud(dir, "b.ply", n), "--resolution", "32x24", "--frames", "3",
                                "--warmup", "1"});
        ASSERT_EQ(r.exit_code, 0) << r.err;
        EXPECT_TRUE(contains(r.out, "splats: " + std::to_string(n) + "\n"));
        EXPECT_TRUE(contains(r.out, "ms_median: "));
        EXPECT_TRUE(contains(r.out, "fps_median: "));
    }
    EXPECT_EQ(run_cli({"bench", write_cloud(dir, "b.ply", 1), "--frames", "0"}).exit_code, 1);
}

TEST(Cli, ServeAnswersHealthChecksAndStopsOnSigterm) {
    testkit::TempDir dir;
    int out_pipe[2];
    ASSERT_EQ(::pipe(out_pipe), 0);
    const std::string data_root = (dir / "data").string();
    const pid_t pid = ::fork();
    ASSERT_GE(pid, 0);
    if (pid == 0) {
        ::dup2(out_pipe[1], STDOUT_FILENO);
        ::close(out_pipe[0]);
        ::execl(SPLATCAP_CLI_PATH, SPLATCAP_CLI_PATH, "serve", "--listen", "127.0.0.1:0", "--data-root",
                data_root.c_str(), static_cast<char*>(nullptr));
        ::_exit(127);
    }
    ::close(out_pipe[1]);
    FILE* out = ::fdopen(out_pipe[0], "r");
    char line[256] = {};
    ASSERT_NE(std::fgets(line, sizeof line, out), nullptr);
    const std::string banner = line;
    const std::string prefix = "listening on http://127.0.0.1:";
    ASSERT_EQ(banner.rfind(prefix, 0), 0u) << banner;
    const int port = std::stoi(banner.substr(prefix.size()));
    const auto health = testkit::http_get(port, "/healthz");
    EXPECT_EQ(health.status, 200);

    // A second instance on the same port fails and names the address.
    const auto busy = run_cli({"serve", "--listen", "127.0.0.1:" + std::to_string(port), "--data-root", data_root});
    EXPECT_EQ(busy.exit_code, 1);
    EXPECT_TRUE(contains(busy.err, "127.0.0.1:" + std::to_string(port))) << busy.err;

    ::kill(pid, SIGTERM);
    int status = 0;
    ::waitpid(pid, &status, 0);
    std::fclose(out);
    EXPECT_TRUE(WIFEXITED(status));
    EXPECT_EQ(WEXITSTATUS(status), 0);
}

TEST(Cli, ServeRejectsBadListenAddresses) {
    EXPECT_EQ(run_cli({"serve", "--listen", "nowhere"}).exit_code, 1);
    EXPECT_EQ(run_cli({"serve", "--listen", "127.0.0.1:99999"}).exit_code, 1);
}
