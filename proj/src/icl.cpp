#include "clickseg/icl.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "clickseg/noc.hpp"

namespace clickseg {

namespace {

// Runs body(i) for i in [0, count) on up to `jobs` threads.
template <typename Body>
void parallel_for(std::size_t count, int jobs, Body&& body) {
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) {
            body(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex mutex;
    std::exception_ptr error;
    {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                try {
                    for (std::size_t i = next++; i < count; i = next++) {
                        body(i);
                    }
                } catch (...) {
                    std::lock_guard lock(mutex);
                    if (!error) {
                        error = std::current_exception();
                    }
                    next = count;
                }
            });
        }
    }
    if (error) {
        std::rethrow_exception(error);
    }
}

constexpr std::uint64_t kShuffleStream = ~std::uint64_t{0};

}  // namespace

void IclConfig::validate() const {
    if (clicks < 1) {
        throw Error("ICL needs at least one corrective click");
    }
    if (betas.size() != static_cast<std::size_t>(clicks)) {
        throw Error("ICL needs one beta per corrective click");
    }
    for (double b : betas) {
        if (!std::isfinite(b) || b < 0.0) {
            throw Error("ICL betas must be finite and non-negative");
        }
    }
    if (!(nfl_alpha > 0.0 && nfl_alpha < 1.0) || !(nfl_gamma >= 0.0)) {
        throw Error("focal loss alpha must lie in (0, 1) and gamma must be non-negative");
    }
    if (!(learning_rate > 0.0) || !(adam_beta1 >= 0.0 && adam_beta1 < 1.0) ||
        !(adam_beta2 >= 0.0 && adam_beta2 < 1.0) || !(adam_epsilon > 0.0)) {
        throw Error("invalid optimiser settings");
    }
    if (epochs < 1 || batch_size < 1 || jobs < 1 || eval_every < 0 || radius < 0) {
        throw Error("epochs, batch size and jobs must be positive");
    }
    simulator.validate();
}

NflResult nfl_loss_and_grad(const ProbabilityMap& prob, const BinaryMask& gt, double alpha, double gamma) {
    if (!prob.same_shape(gt)) {
        throw DimensionMismatch("probability map does not match ground truth");
    }
    const std::size_t n = prob.values().size();
    NflResult out;
    out.gradient.assign(n, 0.0);

    std::vector<double> pt(n);
    std::vector<double> weight(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double p = std::clamp(prob[i], kProbabilityClamp, 1.0 - kProbabilityClamp);
        pt[i] = gt[i] ? p : 1.0 - p;
        weight[i] = std::pow(1.0 - pt[i], gamma);
        out.normalizer += weight[i];
    }
    const double s = out.normalizer;
    for (std::size_t i = 0; i < n; ++i) {
        const double a = gt[i] ? alpha : 1.0 - alpha;
        out.loss -= a * weight[i] * std::log(pt[i]);
        const double raw = prob[i];
        if (raw <= kProbabilityClamp || raw >= 1.0 - kProbabilityClamp) {
            continue;
        }
        const double focal_slope = gamma == 0.0 ? 0.0 : gamma * std::pow(1.0 - pt[i], gamma - 1.0);
        const double d_pt = a * (focal_slope * std::log(pt[i]) - weight[i] / pt[i]);
        out.gradient[i] = (gt[i] ? d_pt : -d_pt) / s;
    }
    out.loss /= s;
    return out;
}

Rollout rollout(Segmenter& model, const RasterImage& image, const BinaryMask& gt, int t, Rng& rng,
                const IclConfig& cfg) {
    if (!gt.same_shape(image)) {
        throw DimensionMismatch("ground truth does not match image");
    }
    if (gt.count() == 0) {
        throw Error("cannot roll out on an empty ground truth");
    }
    Rollout r;
    ClickSequence clicks = sample_initial_clicks(gt, rng, cfg.simulator);
    {
        RolloutStep step;
        step.input = assemble_model_input(image, clicks, ProbabilityMap::zeros(image.width(), image.height()),
                                          cfg.radius);
        step.output = checked_predict(model, step.input);
        step.loss = nfl_loss_and_grad(step.output, gt, cfg.nfl_alpha, cfg.nfl_gamma).loss;
        r.steps.push_back(std::move(step));
    }
    for (int i = 1; i <= t; ++i) {
        const RolloutStep& prev = r.steps.back();
        const auto click = next_training_click(gt, binarize(prev.output), clicks, rng);
        if (!click) {
            RolloutStep copy = prev;
            copy.reused = true;
            r.steps.push_back(std::move(copy));
            continue;
        }
        clicks.push_back(*click);
        RolloutStep step;
        step.input = assemble_model_input(image, clicks, prev.output, cfg.radius);
        step.output = checked_predict(model, step.input);
        step.loss = nfl_loss_and_grad(step.output, gt, cfg.nfl_alpha, cfg.nfl_gamma).loss;
        r.steps.push_back(std::move(step));
    }
    return r;
}

double icl_total_loss(std::span<const double> step_losses, std::span<const double> betas) {
    if (step_losses.size() != betas.size()) {
        throw Error("one beta per step loss is required");
    }
    return std::inner_product(step_losses.begin(), step_losses.end(), betas.begin(), 0.0);
}

double conventional_loss(const Rollout& r) {
    if (r.steps.empty()) {
        throw Error("empty rollout");
    }
    return r.steps.back().loss;
}

LossAndGradient icl_loss_and_gradient(const ToyModelParams& params, const Rollout& r, const BinaryMask& gt,
                                      const IclConfig& cfg) {
    if (r.steps.size() != cfg.betas.size() + 1) {
        throw Error("rollout length does not match the beta schedule");
    }
    LossAndGradient out;
    auto accumulate = [&](const RolloutStep& step, double beta) {
        if (beta == 0.0) {
            return;
        }
        const ToyForward fwd = toy_forward(params, step.input);
        const NflResult nfl = nfl_loss_and_grad(fwd.probabilities, gt, cfg.nfl_alpha, cfg.nfl_gamma);
        const ToyWeights g = toy_backward(fwd, nfl.gradient);
        out.loss += beta * nfl.loss;
        for (std::size_t k = 0; k < kToyFeatureCount; ++k) {
            out.gradient[k] += beta * g[k];
        }
    };
    if (cfg.include_initial_loss) {
        accumulate(r.steps[0], cfg.initial_beta);
    }
    for (std::size_t i = 1; i < r.steps.size(); ++i) {
        accumulate(r.steps[i], cfg.betas[i - 1]);
    }
    return out;
}

bool adam_update(ToyModelParams& params, const ToyWeights& grads, AdamState& state, double lr, double beta1,
                 double beta2, double epsilon) {
    if (!std::all_of(grads.begin(), grads.end(), [](double g) { return std::isfinite(g); })) {
        ++state.skipped;
        return false;
    }
    ++state.step;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
    for (std::size_t k = 0; k < kToyFeatureCount; ++k) {
        state.first_moment[k] = beta1 * state.first_moment[k] + (1.0 - beta1) * grads[k];
        state.second_moment[k] = beta2 * state.second_moment[k] + (1.0 - beta2) * grads[k] * grads[k];
        const double m = state.first_moment[k] / c1;
        const double v = state.second_moment[k] / c2;
        params.weights[k] -= lr * m / (std::sqrt(v) + epsilon);
    }
    return true;
}

TrainResult train(const ToyModelParams& initial, std::span<const AnnotatedSample> dataset, const IclConfig& cfg,
                  const TrainOptions& options) {
    cfg.validate();
    initial.validate();
    if (options.augmentation) {
        options.augmentation->validate();
    }

    TrainResult result;
    result.params = initial;
    std::vector<std::size_t> usable;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        dataset[i].validate();
        if (dataset[i].ground_truth().count() == 0) {
            ++result.degenerate_samples;
        } else {
            usable.push_back(i);
        }
    }
    if (usable.empty()) {
        throw Error("training set has no sample with a nonempty ground truth");
    }
    if (result.degenerate_samples > 0) {
        spdlog::warn("skipping {} samples with empty ground truth", result.degenerate_samples);
    }

    const auto holdout = selected_instances(options.holdout);
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::vector<std::size_t> order = usable;
        Rng shuffle_rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch), kShuffleStream));
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            std::vector<LossAndGradient> parts(end - start);
            const ToyModelParams params = result.params;
            parallel_for(parts.size(), cfg.jobs, [&](std::size_t j) {
                const std::size_t position = start + j;
                const std::size_t index = order[position];
                Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch), position));
                ToySegmenter model(params);
                if (options.augmentation) {
                    const AnnotatedSample sample =
                        augment_sample(dataset[index], pool_sampler(dataset, index), rng, *options.augmentation)
                            .sample;
                    const Rollout r = rollout(model, sample.image, sample.ground_truth(), cfg.clicks, rng, cfg);
                    parts[j] = icl_loss_and_gradient(params, r, sample.ground_truth(), cfg);
                } else {
                    const AnnotatedSample& sample = dataset[index];
                    const Rollout r = rollout(model, sample.image, sample.ground_truth(), cfg.clicks, rng, cfg);
                    parts[j] = icl_loss_and_gradient(params, r, sample.ground_truth(), cfg);
                }
            });
            ToyWeights grad{};
            for (const auto& part : parts) {
                loss_sum += part.loss;
                for (std::size_t k = 0; k < kToyFeatureCount; ++k) {
                    grad[k] += part.gradient[k] / static_cast<double>(parts.size());
                }
            }
            if (!adam_update(result.params, grad, result.adam, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2,
                             cfg.adam_epsilon)) {
                spdlog::warn("epoch {}: non-finite gradient, update skipped", epoch);
            }
        }

        EpochMetrics m;
        m.epoch = epoch;
        m.mean_loss = loss_sum / static_cast<double>(order.size());
        const bool evaluate = !holdout.empty() && cfg.eval_every > 0 &&
                              (epoch % cfg.eval_every == 0 || epoch == cfg.epochs);
        if (evaluate) {
            EvalConfig eval;
            eval.thresholds = {0.90};
            eval.jobs = cfg.jobs;
            eval.cfr.radius = cfg.radius;
            const ToyModelParams params = result.params;
            const DatasetReport report = evaluate_dataset(
                [params] { return std::make_unique<ToySegmenter>(params); }, holdout, eval, "holdout");
            m.holdout_noc90 = report.mean_noc[0];
            m.holdout_iou_at_1 = report.mean_iou_at(1);
            m.holdout_iou_at_3 = report.mean_iou_at(3);
        }
        spdlog::info("epoch {}: loss {:.5f}{}", epoch, m.mean_loss,
                     m.holdout_noc90 ? fmt::format(" holdout NoC@90 {:.3f}", *m.holdout_noc90) : std::string{});
        result.epochs.push_back(m);
        if (options.on_epoch) {
            options.on_epoch(m);
        }
    }
    return result;
}

std::string metrics_csv(std::span<const EpochMetrics> epochs) {
    std::ostringstream out;
    out << "epoch,mean_icl_loss,holdout_noc90,iou_at_1,iou_at_3\n";
    auto cell = [&](const std::optional<double>& v) {
        out << ',';
        if (v) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.6f", *v);
            out << buf;
        }
    };
    for (const auto& e : epochs) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.6f", e.mean_loss);
        out << e.epoch << ',' << buf;
        cell(e.holdout_noc90);
        cell(e.holdout_iou_at_1);
        cell(e.holdout_iou_at_3);
        out << '\n';
    }
    return out.str();
}

}  // namespace clickseg
