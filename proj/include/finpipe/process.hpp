#pragma once

#include <optional>
#include <string>
#include <vector>

namespace finpipe {

// Child process speaking a line-delimited protocol over stdin/stdout.
// One request line in, one reply line out.
class LineProcess {
public:
    LineProcess() = default;
    ~LineProcess();
    LineProcess(const LineProcess&) = delete;
    LineProcess& operator=(const LineProcess&) = delete;

    void start(const std::vector<std::string>& argv);
    bool running() const { return pid_ > 0; }

    // Sends one line and reads one reply line. nullopt on any I/O failure
    // (broken pipe, EOF, process death).
    std::optional<std::string> request(const std::string& line);

    void stop();

private:
    int pid_ = -1;
    int to_child_ = -1;
    int from_child_ = -1;
    std::string read_buf_;
};

}  // namespace finpipe
