#pragma once

// Brute-force reference implementations used to check the library. Each is written independently of
// the code under test and favours obviousness over speed.

#include <functional>
#include <optional>
#include <vector>

#include "clickseg/click_encoding.hpp"
#include "clickseg/core.hpp"
#include "clickseg/random.hpp"
#include "clickseg/suem.hpp"
#include "clickseg/toy_model.hpp"

namespace oracle {

using namespace clickseg;

/// Random mask mixing a few filled rectangles with salt noise; density varies per call.
BinaryMask random_mask(Rng& rng, int width, int height);
RasterImage random_image(Rng& rng, int width, int height);
ProbabilityMap random_probabilities(Rng& rng, int width, int height);

/// 8-connected components by flood fill, sorted by area descending then smallest raster index.
std::vector<std::vector<std::size_t>> components(const BinaryMask& mask);

/// Distance from each foreground pixel to the nearest background pixel or outside position, by
/// exhaustive search.
std::vector<double> distances(const BinaryMask& mask);

/// Evaluation click by enumeration of error pixels.
std::optional<Click> eval_click(const BinaryMask& gt, const BinaryMask& pred, const ClickSequence& existing);

/// Disk maps by checking every pixel against every click.
ClickMaps disks(const ClickSequence& clicks, int width, int height, int radius);

/// Nearest-neighbour paste computed per target pixel.
PasteResult paste(const RasterImage& object_image, const BinaryMask& object_mask, const RasterImage& target,
                  const Placement& placement);

/// Toy model probabilities from its feature definitions.
ProbabilityMap toy_probabilities(const ToyWeights& weights, double sigma, const ModelInput& input);

/// Normalised focal loss with an optional frozen normaliser.
double nfl(const ProbabilityMap& prob, const BinaryMask& gt, double alpha, double gamma,
           std::optional<double> normalizer = std::nullopt);
double nfl_normalizer(const ProbabilityMap& prob, const BinaryMask& gt, double gamma);

/// Central differences of f over the eight toy weights.
ToyWeights finite_difference(const std::function<double(const ToyWeights&)>& f, const ToyWeights& at,
                             double step = 1e-5);

/// |a - b| / max(|a|, |b|, floor).
double relative_error(double a, double b, double floor = 1e-6);

}  // namespace oracle
