#include "clickseg/segmenter.hpp"

namespace clickseg {

ProbabilityMap checked_predict(Segmenter& segmenter, const ModelInput& input) {
    ProbabilityMap out = segmenter.predict(input);
    if (out.width() != input.width() || out.height() != input.height()) {
        throw DimensionMismatch("segmenter '" + segmenter.name() + "' returned " + std::to_string(out.width()) + "x" +
                                std::to_string(out.height()) + " for a " + std::to_string(input.width()) + "x" +
                                std::to_string(input.height()) + " input");
    }
    out.validate();
    return out;
}

ScriptedMock::ScriptedMock(std::vector<ProbabilityMap> script)
    : queue_(std::make_move_iterator(script.begin()), std::make_move_iterator(script.end())) {}

ProbabilityMap ScriptedMock::predict(const ModelInput& input) {
    if (queue_.empty()) {
        throw SegmenterError("scripted mock exhausted after " + std::to_string(calls_.size()) + " calls");
    }
    calls_.push_back(input);
    ProbabilityMap out = std::move(queue_.front());
    queue_.pop_front();
    return out;
}

ProbabilityMap OracleSegmenter::predict(const ModelInput& input) {
    if (!ground_truth_.same_shape(input.image)) {
        throw DimensionMismatch("oracle ground truth does not match input");
    }
    ProbabilityMap out(input.width(), input.height(), 0.0);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = ground_truth_[i] ? 1.0 : 0.0;
    }
    return out;
}

ProbabilityMap EmptySegmenter::predict(const ModelInput& input) {
    return ProbabilityMap::zeros(input.width(), input.height());
}

ProbabilityMap CountingSegmenter::predict(const ModelInput& input) {
    ++*counter_;
    return inner_->predict(input);
}

}  // namespace clickseg
