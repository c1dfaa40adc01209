#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "clickseg/segmenter.hpp"

namespace clickseg {

// Per-pixel feature channels of the toy segmenter.
enum ToyFeature : std::size_t {
    kBias = 0,
    kIntensity,         // (R+G+B)/3 scaled to [0, 1]
    kBlurredIntensity,  // 3x3 box mean of the above over in-bounds neighbours
    kPositiveDisk,
    kNegativeDisk,
    kPreviousMask,
    kPositiveProximity,  // exp(-d/sigma) to the nearest positive click, 0 without positives
    kNegativeProximity,
    kToyFeatureCount,
};

using ToyWeights = std::array<double, kToyFeatureCount>;

/// Per-pixel logistic regression over the fixed feature channels.
struct ToyModelParams {
    ToyWeights weights{};
    double sigma = 10.0;

    /// Throws Error on non-finite weights or sigma <= 0.
    void validate() const;

    friend bool operator==(const ToyModelParams&, const ToyModelParams&) = default;
};

struct ToyForward {
    ProbabilityMap probabilities;
    std::vector<ToyWeights> features;  // one feature vector per pixel, raster order
};

[[nodiscard]] std::vector<ToyWeights> toy_features(const ModelInput& input, double sigma);
[[nodiscard]] ToyForward toy_forward(const ToyModelParams& params, const ModelInput& input);

/// Gradient over the weights given dL/dp for every pixel: sum of g * p(1-p) * features.
[[nodiscard]] ToyWeights toy_backward(const ToyForward& forward, std::span<const double> upstream);

[[nodiscard]] double logistic(double z) noexcept;

// Parameter file: "CSTM1", u32 LE weight count, then f64 LE weights.
[[nodiscard]] std::vector<std::uint8_t> persist_params(const ToyModelParams& params);
/// Throws FormatError on bad magic, wrong count or truncation. Sigma is not part of the file.
[[nodiscard]] ToyModelParams load_params(std::span<const std::uint8_t> bytes, double sigma = 10.0);

void save_params_file(const std::filesystem::path& path, const ToyModelParams& params);
[[nodiscard]] ToyModelParams load_params_file(const std::filesystem::path& path, double sigma = 10.0);

class ToySegmenter : public Segmenter {
public:
    explicit ToySegmenter(ToyModelParams params) : params_(params) { params_.validate(); }

    ProbabilityMap predict(const ModelInput& input) override;
    [[nodiscard]] std::string name() const override { return "toy"; }
    [[nodiscard]] const ToyModelParams& params() const noexcept { return params_; }

private:
    ToyModelParams params_;
};

}  // namespace clickseg
