// Copyright Contributors to the splatcap project
// SPDX-License-Identifier: Apache-2.0
//
#include "service_fixture.hpp"

#include "test_support.hpp"

#include <splatcap/ply.hpp>
#include <splatcap/service/subprocess.hpp>

#include <httplib.h>
#include <json.hpp>

#include <cstdlib>
#include <sys/wait.h>
#include <thread>

#ifndef SPLATCAP_CLI_PATH
#error "SPLATCAP_CLI_PATH must name the splatcap executable"
#endif

namespace splatcap::testkit {

using service::shell_quote;

std::string fake_video() { return std::string("\0\0\0\x18", 4) + "ftypmp42" + std::string(64, '\x01'); }

MockTools make_mock_tools(const std::filesystem::path& dir, const SyntheticScene& scene, int frames,
                          bool omit_points) {
    MockTools tools;
    tools.fixture = dir / "fixture";
    write_synthetic_dataset(tools.fixture, scene);
    const auto images = shell_quote((tools.fixture / "images").string());
    if (frames < 0) {
        tools.extractor = "cp " + images + "/* {output}/ && test -s {input}";
    } else {
        tools.extractor = "ls " + images + " | head -n " + std::to_string(frames) + " | while read f; do cp " +
                          images + "/\"$f\" {output}/; done; test -s {input}";
    }
    const auto sparse = shell_quote((tools.fixture / "sparse").string());
    tools.sfm = "test -d {input} && cp " + sparse + "/cameras.bin " + sparse + "/images.bin {output}/";
    if (!omit_points) tools.sfm += " && cp " + sparse + "/points3D.bin {output}/";
    return tools;
}

service::ServiceConfig mock_service_config(const std::filesystem::path& data_root, const MockTools& tools,
                                           int iterations) {
    service::ServiceConfig config;
    config.port = 0;
    config.data_root = data_root;
    config.frame_extractor = tools.extractor;
    config.sfm = tools.sfm;
    config.stage_timeout_s = 60;
    config.train.iterations = iterations;
    config.train.densify_from = std::min(100, iterations / 2);
    config.train.densify_until = std::max(iterations, config.train.densify_from + 1);
    config.train.densify_interval = 100;
    config.train.opacity_reset_interval = 1000;
    config.train.sh_promote_interval = 100;
    config.train.checkpoint_interval = 100;
    config.train.seed = 7;
    return config;
}

namespace {

httplib::Client client(int port) {
    httplib::Client c("127.0.0.1", port);
    c.set_connection_timeout(5);
    c.set_read_timeout(30);
    return c;
}

HttpReply reply(const httplib::Result& r) {
    HttpReply out;
    if (!r) return out;
    out.status = r->status;
    out.body = r->body;
    out.location = r->get_header_value("Location");
    return out;
}

} // namespace

HttpReply http_get(int port, const std::string& path) { return reply(client(port).Get(path)); }

HttpReply http_delete(int port, const std::string& path) { return reply(client(port).Delete(path)); }

HttpReply http_post_capture(int port, const std::string& payload, const std::string& field) {
    httplib::MultipartFormDataItems items{{field, payload, "capture.bin", "application/octet-stream"}};
    return reply(client(port).Post("/jobs", items));
}

std::string json_string(const std::string& json, const std::string& key) {
    const auto j = nlohmann::json::parse(json, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains(key)) return {};
    const auto& v = j[key];
    return v.is_string() ? v.get<std::string>() : v.dump();
}

std::optional<std::string> poll_job(int port, const std::string& id,
                                    const std::function<bool(const std::string&)>& done,
                                    std::chrono::seconds timeout, std::vector<std::string>* seen) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    while (std::chrono::steady_clock::now() < deadline) {
        const auto r = http_get(port, "/jobs/" + id);
        if (r.status == 200) {
            const auto state = json_string(r.body, "state");
            if (seen && (seen->empty() || seen->back() != state)) seen->push_back(state);
            if (done(state)) return r.body;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    return std::nullopt;
}

CliResult run_cli(const std::vector<std::string>& args) {
    TempDir dir;
    std::string cmd = shell_quote(SPLATCAP_CLI_PATH);
    for (const auto& a : args) cmd += " " + shell_quote(a);
    cmd += " > " + shell_quote((dir / "out").string()) + " 2> " + shell_quote((dir / "err").string());
    const int status = std::system(cmd.c_str());
    CliResult result;
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    result.out = read_file(dir / "out");
    result.err = read_file(dir / "err");
    return result;
}

} // namespace splatcap::testkit
