#pragma once

#include <cerrno>
#include <cstring>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

#include "fac/diag.hpp"

extern "C" char** environ;

namespace fac {

struct RunResult {
    int exitCode = -1;
    std::string out;
    std::string err;
};

// Spawns argv[0] with the given arguments, captures stdout/stderr, and waits.
// `env` entries override or (with nullopt) remove inherited variables.
inline RunResult run_process(const std::vector<std::string>& argv,
                             const std::map<std::string, std::optional<std::string>>& env = {}) {
    if (argv.empty()) throw Error("run_process: empty argv");

    int outPipe[2], errPipe[2];
    if (pipe(outPipe) != 0 || pipe(errPipe) != 0)
        throw Error(std::string("pipe failed: ") + std::strerror(errno));

    std::vector<std::string> envStore;
    for (char** e = environ; *e; ++e) {
        std::string_view entry(*e);
        auto eq = entry.find('=');
        std::string key(entry.substr(0, eq));
        if (env.count(key)) continue;
        envStore.emplace_back(entry);
    }
    for (const auto& [k, v] : env)
        if (v) envStore.push_back(k + "=" + *v);

    std::vector<char*> argvPtrs, envPtrs;
    for (const auto& a : argv) argvPtrs.push_back(const_cast<char*>(a.c_str()));
    argvPtrs.push_back(nullptr);
    for (const auto& e : envStore) envPtrs.push_back(const_cast<char*>(e.c_str()));
    envPtrs.push_back(nullptr);

    pid_t pid = fork();
    if (pid < 0) throw Error(std::string("fork failed: ") + std::strerror(errno));
    if (pid == 0) {
        dup2(outPipe[1], STDOUT_FILENO);
        dup2(errPipe[1], STDERR_FILENO);
        close(outPipe[0]);
        close(outPipe[1]);
        close(errPipe[0]);
        close(errPipe[1]);
        execve(argvPtrs[0], argvPtrs.data(), envPtrs.data());
        _exit(127);
    }
    close(outPipe[1]);
    close(errPipe[1]);

    RunResult res;
    struct pollfd fds[2] = {{outPipe[0], POLLIN, 0}, {errPipe[0], POLLIN, 0}};
    bool openFd[2] = {true, true};
    std::string* sinks[2] = {&res.out, &res.err};
    char buf[4096];
    while (openFd[0] || openFd[1]) {
        for (int i = 0; i < 2; ++i) fds[i].events = openFd[i] ? POLLIN : 0;
        if (poll(fds, 2, -1) < 0) {
            if (errno == EINTR) continue;
            break;
        }
        for (int i = 0; i < 2; ++i) {
            if (!openFd[i] || !(fds[i].revents & (POLLIN | POLLHUP))) continue;
            ssize_t n = read(fds[i].fd, buf, sizeof buf);
            if (n > 0)
                sinks[i]->append(buf, static_cast<std::size_t>(n));
            else
                openFd[i] = false;
        }
    }
    close(outPipe[0]);
    close(errPipe[0]);

    int status = 0;
    waitpid(pid, &status, 0);
    if (WIFEXITED(status))
        res.exitCode = WEXITSTATUS(status);
    else if (WIFSIGNALED(status))
        res.exitCode = 128 + WTERMSIG(status);
    return res;
}

} // namespace fac
