#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "clickseg/annotated_sample.hpp"
#include "clickseg/click_simulator.hpp"
#include "clickseg/suem.hpp"
#include "clickseg/toy_model.hpp"

namespace clickseg {

struct IclConfig {
    int clicks = 3;                      // iterative corrective clicks per rollout
    std::vector<double> betas{1.0, 2.0, 3.0};  // weight of step i = 1..clicks
    bool include_initial_loss = false;   // adds a term for the random-click prediction Y^0
    double initial_beta = 1.0;
    double nfl_alpha = 0.5;
    double nfl_gamma = 2.0;
    double learning_rate = 1e-2;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    int epochs = 30;
    int batch_size = 4;
    int radius = kDefaultDiskRadius;
    int jobs = 1;
    int eval_every = 1;  // holdout evaluation cadence in epochs, 0 disables
    std::uint64_t seed = 0;
    SimulatorConfig simulator;

    void validate() const;

    /// Learning rate used when fine-tuning large pretrained backbones (5e-6). Far too small for the
    /// eight-weight toy model; kept for reference runs.
    static constexpr double kBackboneLearningRate = 5e-6;
};

struct AdamState {
    ToyWeights first_moment{};
    ToyWeights second_moment{};
    std::int64_t step = 0;
    std::int64_t skipped = 0;  // updates dropped because of non-finite gradients
};

struct NflResult {
    double loss = 0.0;
    std::vector<double> gradient;  // dL/dp per pixel, normaliser held constant
    double normalizer = 0.0;       // sum of focal weights
};

inline constexpr double kProbabilityClamp = 1e-7;

/// Normalised focal loss: -(sum a_t (1-p_t)^g log p_t) / sum (1-p_t)^g with a_t = alpha on foreground and
/// 1 - alpha on background. Probabilities are clamped to [1e-7, 1 - 1e-7] first.
[[nodiscard]] NflResult nfl_loss_and_grad(const ProbabilityMap& prob, const BinaryMask& gt, double alpha, double gamma);

struct RolloutStep {
    ModelInput input;  // clicks P^i and the previous mask fed to the model
    ProbabilityMap output;
    double loss = 0.0;
    bool reused = false;  // simulator had converged; state copied from the previous step
};

/// steps[0] is the random-click prediction, steps[i] the i-th corrective click.
struct Rollout {
    std::vector<RolloutStep> steps;
};

/// Samples P^0, predicts Y^0 from the zero mask, then adds one corrective click per step and feeds the
/// previous output back. Throws Error for an empty ground truth.
[[nodiscard]] Rollout rollout(Segmenter& model, const RasterImage& image, const BinaryMask& gt, int t, Rng& rng,
                              const IclConfig& cfg);

/// Sum of beta_i * loss_i. Throws Error on a length mismatch.
[[nodiscard]] double icl_total_loss(std::span<const double> step_losses, std::span<const double> betas);

/// The single-term loss on the final prediction only.
[[nodiscard]] double conventional_loss(const Rollout& r);

struct LossAndGradient {
    double loss = 0.0;
    ToyWeights gradient{};
};

/// Weighted rollout loss and its gradient over the toy weights. Clicks and previous masks are constants.
[[nodiscard]] LossAndGradient icl_loss_and_gradient(const ToyModelParams& params, const Rollout& r,
                                                    const BinaryMask& gt, const IclConfig& cfg);

/// Bias-corrected Adam. Returns false (and leaves params unchanged) when the gradient is not finite.
bool adam_update(ToyModelParams& params, const ToyWeights& grads, AdamState& state, double lr, double beta1,
                 double beta2, double epsilon);

struct EpochMetrics {
    int epoch = 0;
    double mean_loss = 0.0;
    std::optional<double> holdout_noc90;
    std::optional<double> holdout_iou_at_1;
    std::optional<double> holdout_iou_at_3;
};

struct TrainOptions {
    std::span<const AnnotatedSample> holdout;
    std::optional<SuemConfig> augmentation;
    std::function<void(const EpochMetrics&)> on_epoch;
};

struct TrainResult {
    ToyModelParams params;
    AdamState adam;
    std::vector<EpochMetrics> epochs;
    std::size_t degenerate_samples = 0;
};

/// Mini-batch ICL training. Each sample draws its randomness from a stream derived from (seed, epoch,
/// position), and batch gradients are reduced in sample order, so results do not depend on cfg.jobs.
[[nodiscard]] TrainResult train(const ToyModelParams& initial, std::span<const AnnotatedSample> dataset,
                                const IclConfig& cfg, const TrainOptions& options = {});

/// Writes the per-epoch metrics as CSV (epoch, mean_icl_loss, holdout_noc90, iou_at_1, iou_at_3).
[[nodiscard]] std::string metrics_csv(std::span<const EpochMetrics> epochs);

}  // namespace clickseg
