#pragma once

#include <optional>

#include "clickseg/core.hpp"
#include "clickseg/random.hpp"

namespace clickseg {

struct SimulatorConfig {
    int min_positive = 1;
    int max_positive = 5;
    int min_negative = 0;
    int max_negative = 5;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Random initial clicks: k_pos positives from the foreground and k_neg negatives from the background,
/// counts uniform in the configured ranges (capped by available pixels), positions distinct.
/// Throws Error when the ground truth has no foreground.
[[nodiscard]] ClickSequence sample_initial_clicks(const BinaryMask& gt, Rng& rng, const SimulatorConfig& cfg);

/// One corrective training click, drawn uniformly from the larger of the false-negative and false-positive
/// regions (ties go to false negatives), skipping already-clicked pixels. nullopt means converged.
[[nodiscard]] std::optional<Click> next_training_click(const BinaryMask& gt, const BinaryMask& pred,
                                                       const ClickSequence& existing, Rng& rng);

/// Deterministic evaluation click: largest 8-connected error component (ties: false negative first, then
/// topmost-leftmost pixel), placed at the distance-transform maximum inside it (ties: topmost-leftmost).
/// Already-clicked pixels are skipped; a component without unclicked pixels is passed over. nullopt means
/// there is nothing left to click.
[[nodiscard]] std::optional<Click> next_eval_click(const BinaryMask& gt, const BinaryMask& pred,
                                                   const ClickSequence& existing);

}  // namespace clickseg
