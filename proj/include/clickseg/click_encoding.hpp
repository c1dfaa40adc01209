#pragma once

#include "clickseg/core.hpp"

namespace clickseg {

inline constexpr int kDefaultDiskRadius = 5;

/// Hard binary disk maps, one per click label.
struct ClickMaps {
    ProbabilityMap positive;
    ProbabilityMap negative;

    friend bool operator==(const ClickMaps&, const ClickMaps&) = default;
};

/// The argument triple of the segmentation function: image, encoded clicks, previous mask.
struct ModelInput {
    RasterImage image;
    ClickSequence clicks;  // kept for segmenters that use click positions directly
    ClickMaps click_maps;
    ProbabilityMap previous_mask;

    [[nodiscard]] int width() const noexcept { return image.width(); }
    [[nodiscard]] int height() const noexcept { return image.height(); }

    friend bool operator==(const ModelInput&, const ModelInput&) = default;
};

/// Every pixel within `radius` (Euclidean, inclusive) of a click is set in the map of the click's label.
[[nodiscard]] ClickMaps encode_click_maps(const ClickSequence& clicks, int width, int height,
                                          int radius = kDefaultDiskRadius);

[[nodiscard]] ModelInput assemble_model_input(const RasterImage& image, const ClickSequence& clicks,
                                              const ProbabilityMap& previous, int radius = kDefaultDiskRadius);

}  // namespace clickseg
