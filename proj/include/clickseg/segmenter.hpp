#pragma once

#include <atomic>
#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "clickseg/click_encoding.hpp"
#include "clickseg/core.hpp"

namespace clickseg {

/// The segmentation function f(image, clicks, previous mask) -> probability map.
///
/// Implementations must return a map with the input's dimensions and values in [0, 1], and be
/// deterministic for a fixed input. A single instance is not required to be thread-safe; callers that
/// need parallelism create one instance per worker through a SegmenterFactory.
class Segmenter {
public:
    virtual ~Segmenter() = default;

    virtual ProbabilityMap predict(const ModelInput& input) = 0;
    [[nodiscard]] virtual std::string name() const = 0;

    /// Called by the evaluation harness before each instance. Only ground-truth-aware test doubles use it.
    virtual void begin_instance(const BinaryMask& /*ground_truth*/) {}
};

using SegmenterFactory = std::function<std::unique_ptr<Segmenter>()>;

/// Runs predict and enforces the output contract (dimensions and range).
ProbabilityMap checked_predict(Segmenter& segmenter, const ModelInput& input);

/// Returns queued maps in order and records every input it receives.
class ScriptedMock : public Segmenter {
public:
    ScriptedMock() = default;
    explicit ScriptedMock(std::vector<ProbabilityMap> script);

    void enqueue(ProbabilityMap map) { queue_.push_back(std::move(map)); }
    ProbabilityMap predict(const ModelInput& input) override;
    [[nodiscard]] std::string name() const override { return "scripted"; }

    [[nodiscard]] const std::vector<ModelInput>& calls() const noexcept { return calls_; }
    [[nodiscard]] std::size_t remaining() const noexcept { return queue_.size(); }

private:
    std::deque<ProbabilityMap> queue_;
    std::vector<ModelInput> calls_;
};

/// Outputs the current instance's ground truth as a 0/1 probability map.
class OracleSegmenter : public Segmenter {
public:
    OracleSegmenter() = default;
    explicit OracleSegmenter(BinaryMask ground_truth) : ground_truth_(std::move(ground_truth)) {}

    void begin_instance(const BinaryMask& ground_truth) override { ground_truth_ = ground_truth; }
    ProbabilityMap predict(const ModelInput& input) override;
    [[nodiscard]] std::string name() const override { return "oracle"; }

private:
    BinaryMask ground_truth_;
};

/// Always predicts background.
class EmptySegmenter : public Segmenter {
public:
    ProbabilityMap predict(const ModelInput& input) override;
    [[nodiscard]] std::string name() const override { return "empty"; }
};

/// Wraps another segmenter and counts predict calls; the counter is shared so tests can observe it
/// after ownership moves elsewhere.
class CountingSegmenter : public Segmenter {
public:
    CountingSegmenter(std::unique_ptr<Segmenter> inner, std::shared_ptr<std::atomic<std::size_t>> counter)
        : inner_(std::move(inner)), counter_(std::move(counter)) {}

    ProbabilityMap predict(const ModelInput& input) override;
    [[nodiscard]] std::string name() const override { return inner_->name(); }
    void begin_instance(const BinaryMask& gt) override { inner_->begin_instance(gt); }

private:
    std::unique_ptr<Segmenter> inner_;
    std::shared_ptr<std::atomic<std::size_t>> counter_;
};

}  // namespace clickseg
