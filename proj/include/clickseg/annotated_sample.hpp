#pragma once

#include <string>
#include <vector>

#include "clickseg/core.hpp"

namespace clickseg {

/// An image with its per-instance masks; `selected` names the object of interest.
struct AnnotatedSample {
    std::string id;
    RasterImage image;
    std::vector<BinaryMask> instances;
    std::size_t selected = 0;

    [[nodiscard]] const BinaryMask& ground_truth() const { return instances.at(selected); }

    /// Throws Error unless every instance matches the image and the selected instance is nonempty.
    void validate() const;
};

}  // namespace clickseg
