#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <sys/types.h>

#include "json.hpp"

#include "clickseg/segmenter.hpp"

namespace clickseg {

inline constexpr const char* kExternalProtocolName = "clickseg-ext";
inline constexpr int kExternalProtocolVersion = 1;

/// Serialises one request line (without the trailing newline).
[[nodiscard]] nlohmann::json make_external_request(std::int64_t id, const ModelInput& input);
/// Parses a response line and checks id and payload size. Throws MalformedResponse or DimensionMismatch.
[[nodiscard]] ProbabilityMap parse_external_response(const std::string& line, std::int64_t expected_id, int width,
                                                     int height);

/// Runs a third-party model as a child process speaking newline-delimited JSON on stdin/stdout.
///
/// One request is in flight at a time. Any transport failure (child exit, timeout, malformed reply)
/// marks the adapter failed; later calls throw immediately.
class ExternalSegmenter : public Segmenter {
public:
    explicit ExternalSegmenter(std::string command,
                               std::chrono::milliseconds timeout = std::chrono::seconds(30));
    ~ExternalSegmenter() override;

    ExternalSegmenter(const ExternalSegmenter&) = delete;
    ExternalSegmenter& operator=(const ExternalSegmenter&) = delete;

    ProbabilityMap predict(const ModelInput& input) override;
    [[nodiscard]] std::string name() const override { return "external:" + command_; }
    [[nodiscard]] bool failed() const noexcept { return failed_; }

private:
    void spawn();
    void handshake();
    void write_line(const std::string& line);
    std::string read_line();
    void terminate_child() noexcept;

    template <typename E>
    [[noreturn]] void fail_with(const E& error) {
        failed_ = true;
        terminate_child();
        throw error;
    }

    std::string command_;
    std::chrono::milliseconds timeout_;
    pid_t pid_ = -1;
    int to_child_ = -1;
    int from_child_ = -1;
    std::string read_buffer_;
    std::int64_t next_id_ = 1;
    bool failed_ = false;
};

}  // namespace clickseg
