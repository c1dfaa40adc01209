#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "clickseg/annotated_sample.hpp"
#include "clickseg/suem.hpp"

namespace clickseg {

// On-disk layout:
//   images/<stem>.png|.jpg|.jpeg
//   masks/<stem>.inst<N>.png   one file per instance, nonzero = foreground
//   masks/<stem>.png           allowed when the image has exactly one instance
//   provenance/<stem>.json     written for augmented output only

/// Loads every image with at least one mask, sorted by stem. Samples select instance 0.
[[nodiscard]] std::vector<AnnotatedSample> load_dataset(const std::filesystem::path& root);

/// Writes samples in the layout above. `provenance`, when nonempty, must have one entry per sample.
void write_dataset(const std::filesystem::path& root, std::span<const AnnotatedSample> samples,
                   std::span<const Provenance> provenance = {});

/// One evaluation instance per nonempty instance mask.
struct EvalInstance {
    std::string id;  // <stem> or <stem>#<N>
    const RasterImage* image = nullptr;
    const BinaryMask* ground_truth = nullptr;
};

[[nodiscard]] std::vector<EvalInstance> evaluation_instances(std::span<const AnnotatedSample> samples);

/// Evaluation instances restricted to each sample's selected object.
[[nodiscard]] std::vector<EvalInstance> selected_instances(std::span<const AnnotatedSample> samples);

}  // namespace clickseg
