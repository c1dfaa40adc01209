#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>

#include "clickseg/cfr.hpp"
#include "clickseg/segmenter.hpp"

namespace clickseg {

using Clock = std::chrono::steady_clock;

struct ServiceConfig {
    std::string host = "0.0.0.0";
    int port = 8080;  // 0 binds an ephemeral port
    CfrConfig default_cfr;
    std::chrono::seconds idle_ttl{30 * 60};
    int max_dimension = 2048;  // per side
    std::optional<std::filesystem::path> static_dir;
};

/// Interactive sessions keyed by UUID. Each session owns its segmenter and a mutex that serialises
/// operations on it; distinct sessions proceed in parallel.
class SessionStore {
public:
    struct Entry {
        std::mutex mutex;  // held for the duration of each operation on this session
        SegmentationSession session;
        CfrConfig cfr;
        std::optional<BinaryMask> ground_truth;
        std::unique_ptr<Segmenter> segmenter;
        Clock::time_point last_active;

        Entry(SegmentationSession s, CfrConfig c, std::optional<BinaryMask> gt, std::unique_ptr<Segmenter> seg)
            : session(std::move(s)), cfr(c), ground_truth(std::move(gt)), segmenter(std::move(seg)) {}
    };

    SessionStore(SegmenterFactory factory, std::chrono::seconds idle_ttl,
                 std::function<Clock::time_point()> now = Clock::now);

    /// Registers a fresh session and returns its id.
    std::string create(RasterImage image, const CfrConfig& cfr, std::optional<BinaryMask> ground_truth);
    /// nullptr when the id is unknown or expired. Refreshes the activity timestamp.
    std::shared_ptr<Entry> find(const std::string& id);
    bool erase(const std::string& id);
    /// Drops sessions idle for longer than the TTL; returns how many were removed.
    std::size_t sweep();
    [[nodiscard]] std::size_t size() const;

private:
    SegmenterFactory factory_;
    std::chrono::seconds ttl_;
    std::function<Clock::time_point()> now_;
    mutable std::mutex mutex_;
    std::unordered_map<std::string, std::shared_ptr<Entry>> sessions_;
};

/// HTTP front end over a SessionStore:
///   POST   /api/sessions              image_b64 [gt_b64] [cfr] as JSON, or multipart fields image/gt/cfr
///   POST   /api/sessions/{id}/clicks  {u, v, label}
///   POST   /api/sessions/{id}/refine  {mode, n, threshold}, each optional
///   POST   /api/sessions/{id}/undo
///   GET    /api/sessions/{id}
///   DELETE /api/sessions/{id}
/// Mask-returning endpoints accept ?full=1 to add the probability map as base64 CSPM.
class Service {
public:
    Service(SegmenterFactory factory, ServiceConfig cfg);
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Binds and serves on a background thread; returns the bound port.
    int start();
    /// Binds and serves on the calling thread until stop().
    void run();
    void stop();

    [[nodiscard]] SessionStore& store() noexcept;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Applies a spdlog level name ("trace" .. "off"); unknown names throw Error.
void set_log_level(const std::string& level);

}  // namespace clickseg
