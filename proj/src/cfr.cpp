#include "clickseg/cfr.hpp"

#include <charconv>

namespace clickseg {

namespace {

int parse_int(const std::string& text, const std::string& whole) {
    int value = 0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc{} || ptr != end) {
        throw Error("invalid CFR setting '" + whole + "'");
    }
    return value;
}

MaskPtr forward(const SegmentationSession& session, Segmenter& segmenter, const ClickSequence& clicks,
                const ProbabilityMap& previous, int radius) {
    const ModelInput input = assemble_model_input(session.image(), clicks, previous, radius);
    return std::make_shared<const ProbabilityMap>(checked_predict(segmenter, input));
}

void require_clicks(const SegmentationSession& session) {
    if (session.clicks().empty()) {
        throw StateError("refinement needs at least one click");
    }
}

}  // namespace

void CfrConfig::validate() const {
    if (n < 0) {
        throw Error("CFR step count must be non-negative");
    }
    if (radius < 0) {
        throw Error("disk radius must be non-negative");
    }
}

std::string CfrConfig::label() const {
    if (mode == CfrMode::Adaptive) {
        return "A-CFR-" + std::to_string(n);
    }
    return n == 0 ? "StdInfer" : "CFR-" + std::to_string(n);
}

CfrConfig CfrConfig::parse(const std::string& text) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    for (std::size_t pos; (pos = text.find(':', start)) != std::string::npos; start = pos + 1) {
        parts.push_back(text.substr(start, pos - start));
    }
    parts.push_back(text.substr(start));

    CfrConfig cfg;
    if (parts[0] == "fixed" && parts.size() == 2) {
        cfg.mode = CfrMode::Fixed;
        cfg.n = parse_int(parts[1], text);
    } else if (parts[0] == "adaptive" && (parts.size() == 2 || parts.size() == 3)) {
        cfg.mode = CfrMode::Adaptive;
        cfg.n = parse_int(parts[1], text);
        if (parts.size() == 3) {
            const int threshold = parse_int(parts[2], text);
            if (threshold < 0) {
                throw Error("CFR pixel threshold must be non-negative");
            }
            cfg.pixel_threshold = static_cast<std::size_t>(threshold);
        }
    } else {
        throw Error("invalid CFR setting '" + text + "', expected fixed:N or adaptive:N:THRESHOLD");
    }
    cfg.validate();
    return cfg;
}

std::string CfrConfig::to_string() const {
    if (mode == CfrMode::Adaptive) {
        return "adaptive:" + std::to_string(n) + ":" + std::to_string(pixel_threshold);
    }
    return "fixed:" + std::to_string(n);
}

SegmentationSession::SegmentationSession(RasterImage image)
    : image_(std::make_shared<const RasterImage>(std::move(image))),
      current_(std::make_shared<const ProbabilityMap>(ProbabilityMap::zeros(image_->width(), image_->height()))) {}

void SegmentationSession::set_current(MaskPtr mask) {
    current_ = std::move(mask);
    if (!history_.empty()) {
        history_.back().mask = current_;
    }
}

SegmentationSession coarse_step(const SegmentationSession& session, Segmenter& segmenter, const Click& click,
                                int radius) {
    check_click_bounds(click, session.image().width(), session.image().height());
    SegmentationSession next = session;
    next.clicks_.push_back(click);
    MaskPtr out = forward(next, segmenter, next.clicks_, *session.current_, radius);
    next.current_ = out;
    next.history_.push_back({next.clicks_.size(), out});
    next.last_inner_steps_ = 0;
    return next;
}

RefineResult refine_fixed(const SegmentationSession& session, Segmenter& segmenter, int n, int radius) {
    if (n < 0) {
        throw Error("CFR step count must be non-negative");
    }
    if (n == 0) {
        return {session, 0};
    }
    require_clicks(session);
    SegmentationSession next = session;
    MaskPtr mask = session.current_;
    for (int i = 0; i < n; ++i) {
        mask = forward(session, segmenter, session.clicks_, *mask, radius);
    }
    next.set_current(mask);
    next.last_inner_steps_ = n;
    return {std::move(next), n};
}

RefineResult refine_adaptive(const SegmentationSession& session, Segmenter& segmenter, int max_n,
                             std::size_t pixel_threshold, int radius) {
    if (max_n < 0) {
        throw Error("CFR step count must be non-negative");
    }
    if (max_n == 0) {
        return {session, 0};
    }
    require_clicks(session);
    SegmentationSession next = session;
    MaskPtr mask = session.current_;
    BinaryMask previous_bits = binarize(*mask);
    int steps = 0;
    while (steps < max_n) {
        mask = forward(session, segmenter, session.clicks_, *mask, radius);
        ++steps;
        BinaryMask bits = binarize(*mask);
        const std::size_t changed = pixel_delta(bits, previous_bits);
        if (changed < pixel_threshold) {
            break;
        }
        previous_bits = std::move(bits);
    }
    next.set_current(mask);
    next.last_inner_steps_ = steps;
    return {std::move(next), steps};
}

RefineResult refine(const SegmentationSession& session, Segmenter& segmenter, const CfrConfig& cfg) {
    cfg.validate();
    if (cfg.mode == CfrMode::Adaptive) {
        return refine_adaptive(session, segmenter, cfg.n, cfg.pixel_threshold, cfg.radius);
    }
    return refine_fixed(session, segmenter, cfg.n, cfg.radius);
}

SegmentationSession interact(const SegmentationSession& session, Segmenter& segmenter, const Click& click,
                             const CfrConfig& cfg) {
    cfg.validate();
    return refine(coarse_step(session, segmenter, click, cfg.radius), segmenter, cfg).session;
}

SegmentationSession undo(const SegmentationSession& session, Segmenter& segmenter, const CfrConfig& cfg) {
    if (session.clicks().empty()) {
        throw StateError("nothing to undo");
    }
    SegmentationSession replay(session.image());
    const auto clicks = session.clicks().clicks();
    for (std::size_t i = 0; i + 1 < clicks.size(); ++i) {
        replay = interact(replay, segmenter, clicks[i], cfg);
    }
    return replay;
}

}  // namespace clickseg
