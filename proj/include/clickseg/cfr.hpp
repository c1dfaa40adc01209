#pragma once

#include <memory>
#include <string>
#include <vector>

#include "clickseg/click_encoding.hpp"
#include "clickseg/segmenter.hpp"

namespace clickseg {

enum class CfrMode { Fixed, Adaptive };

inline constexpr std::size_t kDefaultPixelThreshold = 20;

/// Inner refinement loop settings. Fixed with n = 0 is standard inference.
struct CfrConfig {
    CfrMode mode = CfrMode::Fixed;
    int n = 0;
    std::size_t pixel_threshold = kDefaultPixelThreshold;  // adaptive only
    int radius = kDefaultDiskRadius;

    void validate() const;

    /// "StdInfer", "CFR-n" or "A-CFR-n".
    [[nodiscard]] std::string label() const;

    /// Parses "fixed:N" or "adaptive:N[:THRESHOLD]".
    static CfrConfig parse(const std::string& text);
    [[nodiscard]] std::string to_string() const;

    friend bool operator==(const CfrConfig&, const CfrConfig&) = default;
};

using MaskPtr = std::shared_ptr<const ProbabilityMap>;

struct RefineResult;

/// State of the user interaction loop. Copies are cheap: masks are shared and immutable.
class SegmentationSession {
public:
    struct Snapshot {
        std::size_t clicks = 0;
        MaskPtr mask;
    };

    explicit SegmentationSession(RasterImage image);

    [[nodiscard]] const RasterImage& image() const noexcept { return *image_; }
    [[nodiscard]] const ClickSequence& clicks() const noexcept { return clicks_; }
    [[nodiscard]] const ProbabilityMap& current_mask() const noexcept { return *current_; }
    [[nodiscard]] std::size_t step() const noexcept { return history_.size(); }
    [[nodiscard]] const std::vector<Snapshot>& history() const noexcept { return history_; }
    /// Inner steps run after the most recent coarse step (or explicit refine).
    [[nodiscard]] int last_inner_steps() const noexcept { return last_inner_steps_; }

private:
    friend SegmentationSession coarse_step(const SegmentationSession&, Segmenter&, const Click&, int);
    friend RefineResult refine_fixed(const SegmentationSession&, Segmenter&, int, int);
    friend RefineResult refine_adaptive(const SegmentationSession&, Segmenter&, int, std::size_t, int);

    void set_current(MaskPtr mask);

    std::shared_ptr<const RasterImage> image_;
    ClickSequence clicks_;
    MaskPtr current_;
    std::vector<Snapshot> history_;
    int last_inner_steps_ = 0;
};

struct RefineResult {
    SegmentationSession session;
    int steps = 0;
};

/// Appends a click and runs one forward pass on (image, clicks, last refined mask). The first step
/// receives the zero mask. The input session is never modified.
[[nodiscard]] SegmentationSession coarse_step(const SegmentationSession& session, Segmenter& segmenter,
                                              const Click& click, int radius = kDefaultDiskRadius);

/// Exactly n further forward passes with unchanged clicks, each fed the previous output.
[[nodiscard]] RefineResult refine_fixed(const SegmentationSession& session, Segmenter& segmenter, int n,
                                        int radius = kDefaultDiskRadius);

/// Refines until the binarised output changes in fewer than pixel_threshold pixels or max_n steps ran.
/// Always takes at least one step when max_n >= 1.
[[nodiscard]] RefineResult refine_adaptive(const SegmentationSession& session, Segmenter& segmenter, int max_n,
                                           std::size_t pixel_threshold, int radius = kDefaultDiskRadius);

/// Runs the inner loop configured by cfg on the current clicks.
[[nodiscard]] RefineResult refine(const SegmentationSession& session, Segmenter& segmenter, const CfrConfig& cfg);

/// Coarse step followed by the configured refinement.
[[nodiscard]] SegmentationSession interact(const SegmentationSession& session, Segmenter& segmenter,
                                           const Click& click, const CfrConfig& cfg);

/// Drops the last click and replays the rest from a fresh session. Throws StateError when empty.
[[nodiscard]] SegmentationSession undo(const SegmentationSession& session, Segmenter& segmenter,
                                       const CfrConfig& cfg);

}  // namespace clickseg
