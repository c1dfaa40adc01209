#include "clickseg/click_simulator.hpp"

#include <algorithm>
#include <vector>

namespace clickseg {

namespace {

Click click_at(std::size_t idx, int width, int label) {
    return Click{static_cast<int>(idx % static_cast<std::size_t>(width)),
                 static_cast<int>(idx / static_cast<std::size_t>(width)), label};
}

bool clicked(const ClickSequence& clicks, std::size_t idx, int width) {
    return clicks.contains_position(static_cast<int>(idx % static_cast<std::size_t>(width)),
                                    static_cast<int>(idx / static_cast<std::size_t>(width)));
}

// Draws `count` distinct pixels from `pool`, skipping positions already present in `clicks`.
void draw_distinct(const std::vector<std::size_t>& pool, int count, int width, int label, Rng& rng,
                   ClickSequence& clicks) {
    for (int k = 0; k < count; ++k) {
        for (;;) {
            const std::size_t idx = pool[uniform_int<std::size_t>(rng, 0, pool.size() - 1)];
            if (!clicked(clicks, idx, width)) {
                clicks.push_back(click_at(idx, width, label));
                break;
            }
        }
    }
}

void require_same(const BinaryMask& gt, const BinaryMask& pred) {
    if (!gt.same_shape(pred)) {
        throw DimensionMismatch("prediction and ground truth differ in size");
    }
}

}  // namespace

void SimulatorConfig::validate() const {
    if (min_positive < 1 || max_positive < min_positive || min_negative < 0 || max_negative < min_negative) {
        throw Error("invalid simulator click ranges");
    }
}

ClickSequence sample_initial_clicks(const BinaryMask& gt, Rng& rng, const SimulatorConfig& cfg) {
    cfg.validate();
    std::vector<std::size_t> fg;
    std::vector<std::size_t> bg;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        (gt[i] ? fg : bg).push_back(i);
    }
    if (fg.empty()) {
        throw Error("cannot sample initial clicks from an empty ground truth");
    }
    const int k_pos = std::min<int>(uniform_int(rng, cfg.min_positive, cfg.max_positive), static_cast<int>(fg.size()));
    int k_neg = uniform_int(rng, cfg.min_negative, cfg.max_negative);
    k_neg = std::min<int>(k_neg, static_cast<int>(bg.size()));

    ClickSequence clicks;
    draw_distinct(fg, k_pos, gt.width(), 1, rng, clicks);
    draw_distinct(bg, k_neg, gt.width(), 0, rng, clicks);
    return clicks;
}

std::optional<Click> next_training_click(const BinaryMask& gt, const BinaryMask& pred, const ClickSequence& existing,
                                         Rng& rng) {
    require_same(gt, pred);
    std::vector<std::size_t> fn;
    std::vector<std::size_t> fp;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        if (gt[i] && !pred[i]) {
            fn.push_back(i);
        } else if (!gt[i] && pred[i]) {
            fp.push_back(i);
        }
    }
    auto unclicked = [&](std::vector<std::size_t>& region) {
        std::erase_if(region, [&](std::size_t idx) { return clicked(existing, idx, gt.width()); });
    };
    // The region is chosen on total error area; clicked pixels are only excluded from the draw.
    const bool prefer_fn = fn.size() >= fp.size();
    unclicked(fn);
    unclicked(fp);
    const std::vector<std::size_t>* region = prefer_fn ? &fn : &fp;
    int label = prefer_fn ? 1 : 0;
    if (region->empty()) {
        region = prefer_fn ? &fp : &fn;
        label = 1 - label;
    }
    if (region->empty()) {
        return std::nullopt;
    }
    const std::size_t idx = (*region)[uniform_int<std::size_t>(rng, 0, region->size() - 1)];
    return click_at(idx, gt.width(), label);
}

std::optional<Click> next_eval_click(const BinaryMask& gt, const BinaryMask& pred, const ClickSequence& existing) {
    require_same(gt, pred);
    const int w = gt.width();
    const int h = gt.height();
    BinaryMask fn(w, h);
    BinaryMask fp(w, h);
    for (std::size_t i = 0; i < gt.size(); ++i) {
        fn[i] = (gt[i] && !pred[i]) ? 1 : 0;
        fp[i] = (!gt[i] && pred[i]) ? 1 : 0;
    }

    struct Candidate {
        Component component;
        int label;
    };
    std::vector<Candidate> candidates;
    for (auto& c : connected_components(fn)) {
        candidates.push_back({std::move(c), 1});
    }
    for (auto& c : connected_components(fp)) {
        candidates.push_back({std::move(c), 0});
    }
    std::stable_sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        if (a.component.area() != b.component.area()) {
            return a.component.area() > b.component.area();
        }
        if (a.label != b.label) {
            return a.label > b.label;  // false negatives first
        }
        return a.component.first_pixel() < b.component.first_pixel();
    });

    for (const Candidate& cand : candidates) {
        const DistanceMap dist = distance_transform(component_mask(cand.component, w, h));
        std::optional<std::size_t> best;
        for (std::size_t idx : cand.component.pixels) {  // raster order, so strict > keeps topmost-leftmost
            if (clicked(existing, idx, w)) {
                continue;
            }
            if (!best || dist[idx] > dist[*best]) {
                best = idx;
            }
        }
        if (best) {
            return click_at(*best, w, cand.label);
        }
    }
    return std::nullopt;
}

}  // namespace clickseg
