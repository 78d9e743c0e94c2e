// Copyright Contributors to the splatcap project
// SPDX-License-Identifier: Apache-2.0
//
#include "splatcap/service/subprocess.hpp"

#include "splatcap/error.hpp"

#include <cerrno>
#include <cstring>
#include <fcntl.h>
#include <fstream>
#include <signal.h>
#include <sys/wait.h>
#include <thread>
#include <unistd.h>

namespace splatcap::service {

std::string shell_quote(const std::string& value) {
    std::string out = "'";
    for (const char c : value) {
        if (c == '\'') {
            out += "'\\''";
        } else {
            out += c;
        }
    }
    return out + "'";
}

std::string substitute_placeholders(const std::string& command_template,
                                    const std::map<std::string, std::string>& values) {
    std::string out;
    std::size_t i = 0;
    while (i < command_template.size()) {
        if (command_template[i] == '{') {
            const auto close = command_template.find('}', i);
            if (close != std::string::npos) {
                const auto it = values.find(command_template.substr(i + 1, close - i - 1));
                if (it != values.end()) {
                    out += shell_quote(it->second);
                    i = close + 1;
                    continue;
                }
            }
        }
        out += command_template[i++];
    }
    return out;
}

namespace {

std::string read_tail(const std::filesystem::path& path, std::size_t n) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) return {};
    const auto size = static_cast<std::size_t>(in.tellg());
    const auto start = size > n ? size - n : 0;
    in.seekg(static_cast<std::streamoff>(start));
    std::string out(size - start, '\0');
    in.read(out.data(), static_cast<std::streamsize>(out.size()));
    return out;
}

} // namespace

CommandResult run_command(const std::string& command, const std::filesystem::path& cwd,
                          const std::filesystem::path& log_path, std::chrono::milliseconds timeout,
                          const std::function<bool()>& should_abort, std::size_t tail_bytes) {
    // Everything the child touches is prepared before fork.
    const std::string cwd_str = cwd.string();
    const std::string log_str = log_path.string();
    const int log_fd = ::open(log_str.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (log_fd < 0) throw IoError("cannot open log file " + log_str + ": " + std::strerror(errno));

    const pid_t pid = ::fork();
    if (pid < 0) {
        ::close(log_fd);
        throw IoError(std::string("fork failed: ") + std::strerror(errno));
    }
    if (pid == 0) {
        ::setpgid(0, 0);
        const int null_fd = ::open("/dev/null", O_RDONLY);
        if (null_fd >= 0) ::dup2(null_fd, STDIN_FILENO);
        ::dup2(log_fd, STDOUT_FILENO);
        ::dup2(log_fd, STDERR_FILENO);
        if (::chdir(cwd_str.c_str()) != 0) ::_exit(126);
        ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        ::_exit(127);
    }
    ::setpgid(pid, pid); // either this or the child's call wins; both are fine
    ::close(log_fd);

    CommandResult result;
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    int status = 0;
    for (;;) {
        const pid_t r = ::waitpid(pid, &status, WNOHANG);
        if (r == pid) break;
        if (r < 0 && errno != EINTR) throw IoError(std::string("waitpid failed: ") + std::strerror(errno));
        const bool late = std::chrono::steady_clock::now() >= deadline;
        const bool abort = should_abort && should_abort();
        if (late || abort) {
            ::kill(-pid, SIGKILL);
            ::kill(pid, SIGKILL);
            while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
            }
            result.timed_out = late && !abort;
            result.aborted = abort;
            break;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    if (!result.timed_out && !result.aborted && WIFEXITED(status)) result.exit_code = WEXITSTATUS(status);
    // Reap anything the shell left behind in the group.
    ::kill(-pid, SIGKILL);
    result.output_tail = read_tail(log_path, tail_bytes);
    return result;
}

} // namespace splatcap::service
