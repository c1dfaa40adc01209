#pragma once

#include <cstdint>
#include <vector>

#include "clickseg/annotated_sample.hpp"

namespace clickseg {

struct SyntheticConfig {
    int count = 200;
    int width = 64;
    int height = 64;
    int min_objects = 1;
    int max_objects = 3;
    std::uint64_t seed = 0;
};

/// Textured backgrounds with random ellipses and rotated rectangles. Later objects occlude earlier ones;
/// instance 0 is the selected object and always keeps at least 5% of the image area.
[[nodiscard]] std::vector<AnnotatedSample> generate_synthetic_dataset(const SyntheticConfig& cfg);

}  // namespace clickseg
