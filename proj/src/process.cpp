#include "finpipe/process.hpp"

#include <csignal>
#include <cstring>
#include <stdexcept>

#include <sys/wait.h>
#include <unistd.h>

namespace finpipe {

LineProcess::~LineProcess() { stop(); }

void LineProcess::start(const std::vector<std::string>& argv) {
    if (argv.empty()) throw std::invalid_argument("empty adapter command");
    int in_pipe[2];
    int out_pipe[2];
    if (pipe(in_pipe) != 0 || pipe(out_pipe) != 0)
        throw std::runtime_error("pipe() failed");
    pid_t pid = fork();
    if (pid < 0) throw std::runtime_error("fork() failed");
    if (pid == 0) {
        dup2(in_pipe[0], STDIN_FILENO);
        dup2(out_pipe[1], STDOUT_FILENO);
        close(in_pipe[0]);
        close(in_pipe[1]);
        close(out_pipe[0]);
        close(out_pipe[1]);
        std::vector<char*> args;
        for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
        args.push_back(nullptr);
        execvp(args[0], args.data());
        _exit(127);
    }
    close(in_pipe[0]);
    close(out_pipe[1]);
    pid_ = pid;
    to_child_ = in_pipe[1];
    from_child_ = out_pipe[0];
    signal(SIGPIPE, SIG_IGN);
}

std::optional<std::string> LineProcess::request(const std::string& line) {
    if (pid_ <= 0) return std::nullopt;
    std::string msg = line;
    msg.push_back('\n');
    std::size_t off = 0;
    while (off < msg.size()) {
        ssize_t n = write(to_child_, msg.data() + off, msg.size() - off);
        if (n <= 0) return std::nullopt;
        off += static_cast<std::size_t>(n);
    }
    while (true) {
        auto pos = read_buf_.find('\n');
        if (pos != std::string::npos) {
            std::string reply = read_buf_.substr(0, pos);
            read_buf_.erase(0, pos + 1);
            return reply;
        }
        char buf[4096];
        ssize_t n = read(from_child_, buf, sizeof buf);
        if (n <= 0) return std::nullopt;
        read_buf_.append(buf, static_cast<std::size_t>(n));
    }
}

void LineProcess::stop() {
    if (pid_ <= 0) return;
    close(to_child_);
    close(from_child_);
    int status = 0;
    waitpid(pid_, &status, 0);
    pid_ = -1;
    to_child_ = -1;
    from_child_ = -1;
}

}  // namespace finpipe
