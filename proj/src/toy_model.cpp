#include "clickseg/toy_model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <limits>

#include "clickseg/image_io.hpp"

namespace clickseg {

namespace {

constexpr char kParamMagic[] = "CSTM1";
constexpr std::size_t kMagicLen = 5;

}  // namespace

void ToyModelParams::validate() const {
    for (double w : weights) {
        if (!std::isfinite(w)) {
            throw Error("toy model weights must be finite");
        }
    }
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        throw Error("toy model sigma must be positive");
    }
}

double logistic(double z) noexcept {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

std::vector<ToyWeights> toy_features(const ModelInput& input, double sigma) {
    const int w = input.width();
    const int h = input.height();
    const std::size_t n = static_cast<std::size_t>(w) * h;

    std::vector<double> intensity(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Rgb& p = input.image[i];
        intensity[i] = (double(p.r) + double(p.g) + double(p.b)) / (3.0 * 255.0);
    }

    std::vector<const Click*> positives;
    std::vector<const Click*> negatives;
    for (const Click& c : input.clicks) {
        (c.positive() ? positives : negatives).push_back(&c);
    }
    auto proximity = [sigma](const std::vector<const Click*>& clicks, int x, int y) {
        if (clicks.empty()) {
            return 0.0;
        }
        double best = std::numeric_limits<double>::infinity();
        for (const Click* c : clicks) {
            const double dx = x - c->u;
            const double dy = y - c->v;
            best = std::min(best, dx * dx + dy * dy);
        }
        return std::exp(-std::sqrt(best) / sigma);
    };

    std::vector<ToyWeights> features(n);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            double sum = 0.0;
            int count = 0;
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    const int nx = x + dx;
                    const int ny = y + dy;
                    if (nx >= 0 && ny >= 0 && nx < w && ny < h) {
                        sum += intensity[static_cast<std::size_t>(ny) * w + nx];
                        ++count;
                    }
                }
            }
            ToyWeights& f = features[i];
            f[kBias] = 1.0;
            f[kIntensity] = intensity[i];
            f[kBlurredIntensity] = sum / count;
            f[kPositiveDisk] = input.click_maps.positive[i];
            f[kNegativeDisk] = input.click_maps.negative[i];
            f[kPreviousMask] = input.previous_mask[i];
            f[kPositiveProximity] = proximity(positives, x, y);
            f[kNegativeProximity] = proximity(negatives, x, y);
        }
    }
    return features;
}

ToyForward toy_forward(const ToyModelParams& params, const ModelInput& input) {
    ToyForward out{ProbabilityMap(input.width(), input.height(), 0.0), toy_features(input, params.sigma)};
    for (std::size_t i = 0; i < out.features.size(); ++i) {
        double z = 0.0;
        for (std::size_t k = 0; k < kToyFeatureCount; ++k) {
            z += params.weights[k] * out.features[i][k];
        }
        out.probabilities[i] = logistic(z);
    }
    return out;
}

ToyWeights toy_backward(const ToyForward& forward, std::span<const double> upstream) {
    if (upstream.size() != forward.features.size()) {
        throw DimensionMismatch("upstream gradient size does not match forward cache");
    }
    ToyWeights grad{};
    for (std::size_t i = 0; i < upstream.size(); ++i) {
        if (upstream[i] == 0.0) {
            continue;
        }
        const double p = forward.probabilities[i];
        const double g = upstream[i] * p * (1.0 - p);
        for (std::size_t k = 0; k < kToyFeatureCount; ++k) {
            grad[k] += g * forward.features[i][k];
        }
    }
    return grad;
}

std::vector<std::uint8_t> persist_params(const ToyModelParams& params) {
    std::vector<std::uint8_t> out(kParamMagic, kParamMagic + kMagicLen);
    const auto count = static_cast<std::uint32_t>(params.weights.size());
    for (int s = 0; s < 32; s += 8) {
        out.push_back(static_cast<std::uint8_t>((count >> s) & 0xff));
    }
    for (double w : params.weights) {
        const auto bits = std::bit_cast<std::uint64_t>(w);
        for (int s = 0; s < 64; s += 8) {
            out.push_back(static_cast<std::uint8_t>((bits >> s) & 0xff));
        }
    }
    return out;
}

ToyModelParams load_params(std::span<const std::uint8_t> bytes, double sigma) {
    if (bytes.size() < kMagicLen || std::memcmp(bytes.data(), kParamMagic, kMagicLen) != 0) {
        throw FormatError("bad parameter file magic");
    }
    if (bytes.size() < kMagicLen + 4) {
        throw FormatError("parameter file truncated in header");
    }
    std::uint32_t count = 0;
    for (int b = 0; b < 4; ++b) {
        count |= std::uint32_t(bytes[kMagicLen + b]) << (8 * b);
    }
    if (count != kToyFeatureCount) {
        throw FormatError("parameter file holds " + std::to_string(count) + " weights, expected " +
                          std::to_string(kToyFeatureCount));
    }
    const std::size_t expected = kMagicLen + 4 + 8 * std::size_t{count};
    if (bytes.size() < expected) {
        throw FormatError("parameter file truncated");
    }
    if (bytes.size() > expected) {
        throw FormatError("trailing bytes after parameter payload");
    }
    ToyModelParams params;
    params.sigma = sigma;
    for (std::size_t k = 0; k < count; ++k) {
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b) {
            bits |= std::uint64_t(bytes[kMagicLen + 4 + 8 * k + b]) << (8 * b);
        }
        params.weights[k] = std::bit_cast<double>(bits);
    }
    params.validate();
    return params;
}

void save_params_file(const std::filesystem::path& path, const ToyModelParams& params) {
    write_file(path, persist_params(params));
}

ToyModelParams load_params_file(const std::filesystem::path& path, double sigma) {
    return load_params(read_file(path), sigma);
}

ProbabilityMap ToySegmenter::predict(const ModelInput& input) {
    return toy_forward(params_, input).probabilities;
}

}  // namespace clickseg
