#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>

#include "json.hpp"

#include "clickseg/annotated_sample.hpp"
#include "clickseg/random.hpp"

namespace clickseg {

enum class SuemMode { None, Simple, Union, Exclusion, Mixing };

[[nodiscard]] std::string to_string(SuemMode mode);

/// Photometric and geometric jitter applied after (or instead of) copy-paste.
struct StandardAugmentConfig {
    double flip_probability = 0.5;
    double max_rotation_degrees = 20.0;
    double brightness = 0.2;   // factor drawn from [1 - b, 1 + b]
    double contrast = 0.2;     // factor drawn from [1 - c, 1 + c]
    double min_crop_area = 0.6;  // crop keeps at least this fraction of the image area
};

struct SuemConfig {
    double p_simple = 0.25;
    double p_union = 0.25;
    double p_exclusion = 0.25;
    double p_mixing = 0.25;
    double apply_probability = 0.5;
    double scale_min = 0.5;
    double scale_max = 1.5;
    double mixing_alpha = 0.5;
    double min_residual_fraction = 0.2;
    int max_placement_tries = 5;
    int output_width = 448;
    int output_height = 448;
    std::uint64_t seed = 0;
    StandardAugmentConfig standard;

    void validate() const;
};

/// Where a pasted object landed: the object's bounding box, scaled to patch size, with its top-left at offset.
struct Placement {
    int offset_x = 0;
    int offset_y = 0;
    double scale = 1.0;
    int patch_width = 0;
    int patch_height = 0;
    int tries = 0;
};

struct StandardAugmentRecord {
    bool flipped = false;
    double rotation_degrees = 0.0;
    double brightness = 1.0;
    double contrast = 1.0;
    int crop_x = 0;
    int crop_y = 0;
    int crop_width = 0;
    int crop_height = 0;
    bool fallback = false;  // geometric jitter removed the object; plain resize used instead
};

struct Provenance {
    SuemMode mode = SuemMode::None;
    std::string source_id;
    std::string extra_id;
    std::optional<Placement> placement;
    std::optional<double> alpha;
    bool fallback = false;  // exclusion fell back to simple mode, or placement failed and source was kept
    std::optional<StandardAugmentRecord> standard;
    std::uint64_t seed = 0;

    [[nodiscard]] nlohmann::json to_json() const;
};

struct AugmentResult {
    AnnotatedSample sample;  // single instance: the new ground truth
    Provenance provenance;
};

/// Pastes `object` (its mask's bounding box scaled by `scale`, nearest neighbour) onto `target` with the
/// patch's top-left at (offset_x, offset_y). Pixels falling outside the target are clipped.
struct PasteResult {
    RasterImage image;
    BinaryMask pasted;  // where object pixels landed in target coordinates
};
[[nodiscard]] PasteResult paste_object(const RasterImage& object_image, const BinaryMask& object_mask,
                                       const RasterImage& target, const Placement& placement);

/// Source object pasted into the extra image; ground truth is the pasted source mask.
[[nodiscard]] AugmentResult simple_cp(const AnnotatedSample& source, const AnnotatedSample& extra, Rng& rng,
                                      const SuemConfig& cfg);
/// Extra object pasted into the source image; ground truth is source ∪ pasted extra.
[[nodiscard]] AugmentResult union_cp(const AnnotatedSample& source, const AnnotatedSample& extra, Rng& rng,
                                     const SuemConfig& cfg);
/// Extra object pasted into the source image; ground truth is source ∖ pasted extra. Falls back to simple
/// mode when too little of the source object remains; the provenance then keeps mode Exclusion with fallback set.
[[nodiscard]] AugmentResult exclusion_cp(const AnnotatedSample& source, const AnnotatedSample& extra, Rng& rng,
                                         const SuemConfig& cfg);
/// Per-pixel blend alpha * source + (1 - alpha) * extra (extra resized to the source); ground truth unchanged.
[[nodiscard]] AugmentResult image_mixing(const AnnotatedSample& source, const AnnotatedSample& extra, Rng& rng,
                                         const SuemConfig& cfg);

/// Flip, rotation, brightness/contrast and crop-and-resize to the output size. Image and mask share the
/// same geometric mapping.
[[nodiscard]] AugmentResult standard_augment(const AnnotatedSample& sample, Rng& rng, const SuemConfig& cfg);

using ExtraSampler = std::function<const AnnotatedSample&(Rng&)>;

/// Draws uniformly from `pool`, avoiding `source_index` when the pool has more than one sample.
[[nodiscard]] ExtraSampler pool_sampler(std::span<const AnnotatedSample> pool, std::size_t source_index);

/// With probability apply_probability runs one copy-paste mode chosen by the mode probabilities, then the
/// standard stack; otherwise the standard stack only.
[[nodiscard]] AugmentResult augment_sample(const AnnotatedSample& source, const ExtraSampler& extras, Rng& rng,
                                           const SuemConfig& cfg);

/// Nearest-neighbour resize.
[[nodiscard]] RasterImage resize_nearest(const RasterImage& image, int width, int height);
[[nodiscard]] BinaryMask resize_nearest(const BinaryMask& mask, int width, int height);

}  // namespace clickseg
