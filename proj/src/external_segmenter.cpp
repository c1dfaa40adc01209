#include "clickseg/external_segmenter.hpp"

#include <bit>
#include <cerrno>
#include <csignal>
#include <cstring>

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

#include "clickseg/image_io.hpp"

namespace clickseg {

namespace {

using Clock = std::chrono::steady_clock;

void ignore_sigpipe() {
    static const bool done = [] {
        struct sigaction sa {};
        sa.sa_handler = SIG_IGN;
        sigemptyset(&sa.sa_mask);
        sigaction(SIGPIPE, &sa, nullptr);
        return true;
    }();
    (void)done;
}

std::vector<std::uint8_t> pack_u8(const ProbabilityMap& map) {
    std::vector<std::uint8_t> out(map.size());
    for (std::size_t i = 0; i < map.size(); ++i) {
        out[i] = map[i] >= 0.5 ? 1 : 0;
    }
    return out;
}

std::vector<std::uint8_t> pack_f32(const ProbabilityMap& map) {
    std::vector<std::uint8_t> out;
    out.reserve(map.size() * 4);
    for (double v : map.values()) {
        const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
        for (int s = 0; s < 32; s += 8) {
            out.push_back(static_cast<std::uint8_t>((bits >> s) & 0xff));
        }
    }
    return out;
}

}  // namespace

nlohmann::json make_external_request(std::int64_t id, const ModelInput& input) {
    std::vector<std::uint8_t> rgb;
    rgb.reserve(input.image.size() * 3);
    for (const Rgb& p : input.image.values()) {
        rgb.insert(rgb.end(), {p.r, p.g, p.b});
    }
    return nlohmann::json{
        {"id", id},
        {"width", input.width()},
        {"height", input.height()},
        {"image", base64_encode(rgb)},
        {"pos_map", base64_encode(pack_u8(input.click_maps.positive))},
        {"neg_map", base64_encode(pack_u8(input.click_maps.negative))},
        {"prev_mask", base64_encode(pack_f32(input.previous_mask))},
    };
}

ProbabilityMap parse_external_response(const std::string& line, std::int64_t expected_id, int width, int height) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw MalformedResponse(std::string("response is not JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("id") || !doc["id"].is_number_integer() || !doc.contains("prob_map") ||
        !doc["prob_map"].is_string()) {
        throw MalformedResponse("response lacks integer 'id' or string 'prob_map'");
    }
    if (doc["id"].get<std::int64_t>() != expected_id) {
        throw MalformedResponse("response id " + doc["id"].dump() + " does not match request " +
                                std::to_string(expected_id));
    }
    if ((doc.contains("width") && doc["width"] != width) || (doc.contains("height") && doc["height"] != height)) {
        throw DimensionMismatch("external segmenter reported dimensions differing from the request");
    }
    std::vector<std::uint8_t> raw;
    try {
        raw = base64_decode(doc["prob_map"].get<std::string>());
    } catch (const FormatError& e) {
        throw MalformedResponse(e.what());
    }
    const std::size_t n = static_cast<std::size_t>(width) * height;
    if (raw.size() != 4 * n) {
        throw DimensionMismatch("external segmenter returned " + std::to_string(raw.size() / 4) + " values, expected " +
                                std::to_string(n));
    }
    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint32_t bits = std::uint32_t(raw[4 * i]) | (std::uint32_t(raw[4 * i + 1]) << 8) |
                                   (std::uint32_t(raw[4 * i + 2]) << 16) | (std::uint32_t(raw[4 * i + 3]) << 24);
        values[i] = std::bit_cast<float>(bits);
    }
    return ProbabilityMap(width, height, std::move(values));
}

ExternalSegmenter::ExternalSegmenter(std::string command, std::chrono::milliseconds timeout)
    : command_(std::move(command)), timeout_(timeout) {
    ignore_sigpipe();
    spawn();
    try {
        handshake();
    } catch (...) {
        terminate_child();
        throw;
    }
}

ExternalSegmenter::~ExternalSegmenter() {
    terminate_child();
}

void ExternalSegmenter::spawn() {
    int in_pipe[2];
    int out_pipe[2];
    if (pipe2(in_pipe, O_CLOEXEC) != 0) {
        throw SegmenterError(std::string("pipe: ") + std::strerror(errno));
    }
    if (pipe2(out_pipe, O_CLOEXEC) != 0) {
        close(in_pipe[0]);
        close(in_pipe[1]);
        throw SegmenterError(std::string("pipe: ") + std::strerror(errno));
    }
    const pid_t pid = fork();
    if (pid < 0) {
        for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) {
            close(fd);
        }
        throw SegmenterError(std::string("fork: ") + std::strerror(errno));
    }
    if (pid == 0) {
        setpgid(0, 0);  // own process group so shutdown reaches processes the shell spawned
        dup2(in_pipe[0], STDIN_FILENO);
        dup2(out_pipe[1], STDOUT_FILENO);
        execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }
    setpgid(pid, pid);
    close(in_pipe[0]);
    close(out_pipe[1]);
    pid_ = pid;
    fcntl(in_pipe[1], F_SETFL, fcntl(in_pipe[1], F_GETFL) | O_NONBLOCK);
    to_child_ = in_pipe[1];
    from_child_ = out_pipe[0];
}

void ExternalSegmenter::handshake() {
    const std::string line = read_line();
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
        fail_with(MalformedResponse("handshake is not JSON: " + line));
    }
    if (doc.value("protocol", std::string{}) != kExternalProtocolName ||
        doc.value("version", -1) != kExternalProtocolVersion) {
        fail_with(MalformedResponse("unsupported handshake: " + line));
    }
}

ProbabilityMap ExternalSegmenter::predict(const ModelInput& input) {
    if (failed_) {
        throw SegmenterError("external segmenter '" + command_ + "' is in a failed state");
    }
    const std::int64_t id = next_id_++;
    write_line(make_external_request(id, input).dump());
    const std::string line = read_line();
    try {
        return parse_external_response(line, id, input.width(), input.height());
    } catch (const MalformedResponse& e) {
        fail_with(e);
    }
}

void ExternalSegmenter::write_line(const std::string& line) {
    const auto deadline = Clock::now() + timeout_;
    const std::string data = line + '\n';
    std::size_t off = 0;
    while (off < data.size()) {
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
        if (left.count() <= 0) {
            fail_with(Timeout("external segmenter stopped reading its input"));
        }
        pollfd pfd{to_child_, POLLOUT, 0};
        const int ready = ::poll(&pfd, 1, static_cast<int>(left.count()));
        if (ready < 0 && errno != EINTR) {
            fail_with(SegmenterError(std::string("poll: ") + std::strerror(errno)));
        }
        if (ready <= 0) {
            continue;
        }
        const ssize_t n = ::write(to_child_, data.data() + off, data.size() - off);
        if (n < 0) {
            if (errno == EINTR || errno == EAGAIN) {
                continue;
            }
            fail_with(ProcessExited("external segmenter closed its input: " + std::string(std::strerror(errno))));
        }
        off += static_cast<std::size_t>(n);
    }
}

std::string ExternalSegmenter::read_line() {
    const auto deadline = Clock::now() + timeout_;
    char chunk[65536];
    for (;;) {
        if (const auto nl = read_buffer_.find('\n'); nl != std::string::npos) {
            std::string line = read_buffer_.substr(0, nl);
            read_buffer_.erase(0, nl + 1);
            return line;
        }
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
        if (left.count() <= 0) {
            fail_with(Timeout("external segmenter did not answer within " + std::to_string(timeout_.count()) + " ms"));
        }
        pollfd pfd{from_child_, POLLIN, 0};
        const int ready = ::poll(&pfd, 1, static_cast<int>(left.count()));
        if (ready < 0) {
            if (errno == EINTR) {
                continue;
            }
            fail_with(SegmenterError(std::string("poll: ") + std::strerror(errno)));
        }
        if (ready == 0) {
            continue;
        }
        const ssize_t n = ::read(from_child_, chunk, sizeof chunk);
        if (n < 0) {
            if (errno == EINTR) {
                continue;
            }
            fail_with(SegmenterError(std::string("read: ") + std::strerror(errno)));
        }
        if (n == 0) {
            fail_with(ProcessExited("external segmenter exited"));
        }
        read_buffer_.append(chunk, static_cast<std::size_t>(n));
    }
}

void ExternalSegmenter::terminate_child() noexcept {
    if (to_child_ >= 0) {
        close(to_child_);
        to_child_ = -1;
    }
    if (from_child_ >= 0) {
        close(from_child_);
        from_child_ = -1;
    }
    if (pid_ > 0) {
        // Closing stdin asks a well-behaved child to exit; give it a moment before SIGKILL.
        int status = 0;
        for (int i = 0; i < 50; ++i) {
            if (waitpid(pid_, &status, WNOHANG) == pid_) {
                kill(-pid_, SIGKILL);
                pid_ = -1;
                return;
            }
            usleep(2000);
        }
        kill(-pid_, SIGKILL);
        waitpid(pid_, &status, 0);
        pid_ = -1;
    }
}

}  // namespace clickseg
