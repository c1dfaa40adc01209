#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "clickseg/cfr.hpp"
#include "clickseg/dataset.hpp"
#include "clickseg/segmenter.hpp"

namespace clickseg {

inline constexpr int kDefaultMaxClicks = 20;

struct EvalConfig {
    std::vector<double> thresholds{0.90, 0.95};  // ascending, each in (0, 1)
    int max_clicks = kDefaultMaxClicks;
    CfrConfig cfr;
    int jobs = 1;

    void validate() const;
};

struct InstanceResult {
    std::string id;
    std::vector<int> noc;       // per threshold; max_clicks when never reached
    std::vector<bool> reached;  // per threshold
    std::vector<double> iou_trace;  // IoU after each click
    double wall_seconds = 0.0;
    bool failed = false;
    std::string error;

    /// IoU after `clicks` clicks; the last recorded value is carried forward after an early exit.
    [[nodiscard]] double iou_at(std::size_t clicks) const;
};

/// Simulated-click session for one instance: evaluation click on the current binarised mask, then
/// interact (coarse step plus the configured refinement). Stops once the highest threshold is reached or
/// there is nothing left to click. Segmenter errors mark the result failed instead of throwing.
[[nodiscard]] InstanceResult evaluate_instance(Segmenter& segmenter, const RasterImage& image, const BinaryMask& gt,
                                               const EvalConfig& cfg, std::string id = {});

struct DatasetReport {
    std::string dataset;
    std::string segmenter;
    std::string inference;  // CFR label
    std::vector<double> thresholds;
    std::vector<double> mean_noc;  // over non-failed instances; NaN when all failed
    std::size_t failures = 0;
    std::vector<InstanceResult> instances;

    /// Mean IoU after `clicks` clicks over non-failed instances.
    [[nodiscard]] double mean_iou_at(std::size_t clicks) const;
};

/// Evaluates every instance with cfg.jobs workers, each owning a segmenter from the factory. Results are
/// merged in instance order, so aggregates do not depend on the worker count. Throws Error when empty.
[[nodiscard]] DatasetReport evaluate_dataset(const SegmenterFactory& factory, std::span<const EvalInstance> instances,
                                             const EvalConfig& cfg, std::string dataset_name = "dataset");

/// Published reference NoC values for one (dataset, model, inference mode) triple.
struct ReferenceEntry {
    std::string dataset;
    std::string model;
    std::string mode;
    double noc90 = 0.0;
    double noc95 = 0.0;
};

[[nodiscard]] std::vector<ReferenceEntry> load_reference_fixtures(const std::filesystem::path& path);
/// Path of the fixture file shipped in data/.
[[nodiscard]] std::filesystem::path default_fixture_path();

struct RenderedReport {
    std::string markdown;
    std::string csv;
};

/// One row per (segmenter, inference mode), NoC@k columns per dataset. Reference fixtures, when given,
/// are added as rows with source "reference"; missing cells render as "-".
[[nodiscard]] RenderedReport render_report(std::span<const DatasetReport> results,
                                           std::span<const ReferenceEntry> fixtures = {});

/// Per-instance CSV: id, failed, noc per threshold, reached per threshold, clicks used, final IoU.
[[nodiscard]] std::string instances_csv(const DatasetReport& report);

}  // namespace clickseg
