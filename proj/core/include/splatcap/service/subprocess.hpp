// Copyright Contributors to the splatcap project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <string>

namespace splatcap::service {

struct CommandResult {
    int exit_code = -1;     // -1 unless the command exited normally
    bool timed_out = false;
    bool aborted = false;   // stopped because `should_abort` returned true
    std::string output_tail; // last bytes of combined stdout/stderr
};

/// Replaces `{name}` with the single-quoted shell form of each value.
/// Unknown placeholders are left untouched.
std::string substitute_placeholders(const std::string& command_template,
                                    const std::map<std::string, std::string>& values);

std::string shell_quote(const std::string& value);

/// Runs `command` through /bin/sh in `cwd`, in its own process group, with
/// stdout and stderr appended to `log_path`. On timeout or abort the whole
/// process group is killed.
CommandResult run_command(const std::string& command, const std::filesystem::path& cwd,
                          const std::filesystem::path& log_path, std::chrono::milliseconds timeout,
                          const std::function<bool()>& should_abort = {},
                          std::size_t tail_bytes = 2048);

} // namespace splatcap::service
