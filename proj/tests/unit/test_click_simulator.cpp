#include "doctest.h"

#include "clickseg/click_simulator.hpp"
#include "oracles.hpp"

using namespace clickseg;

namespace {

ClickSequence random_existing(Rng& rng, int w, int h) {
    ClickSequence clicks;
    const int n = uniform_int(rng, 0, 3);
    for (int k = 0; k < n; ++k) {
        const Click c{uniform_int(rng, 0, w - 1), uniform_int(rng, 0, h - 1), uniform_int(rng, 0, 1)};
        if (!clicks.contains_position(c.u, c.v)) {
            clicks.push_back(c);
        }
    }
    return clicks;
}

}  // namespace

TEST_CASE("initial clicks respect the configured counts and labels") {
    Rng rng(1);
    SimulatorConfig cfg;
    for (int trial = 0; trial < 200; ++trial) {
        BinaryMask gt = oracle::random_mask(rng, 12, 12);
        if (gt.count() == 0) {
            gt(3, 3) = 1;
        }
        const ClickSequence clicks = sample_initial_clicks(gt, rng, cfg);
        int pos = 0;
        int neg = 0;
        for (const Click& c : clicks) {
            (c.label == 1 ? pos : neg)++;
            CHECK(gt(c.u, c.v) == c.label);
        }
        CHECK(pos >= 1);
        CHECK(pos <= 5);
        CHECK(neg <= 5);
    }
}

TEST_CASE("initial click counts are capped by available pixels") {
    Rng rng(2);
    BinaryMask gt(2, 1);
    gt(0, 0) = 1;
    SimulatorConfig cfg;
    cfg.min_positive = 5;
    cfg.min_negative = 5;
    const ClickSequence clicks = sample_initial_clicks(gt, rng, cfg);
    CHECK(clicks.size() == 2);
    CHECK_THROWS_AS((void)sample_initial_clicks(BinaryMask(3, 3), rng, cfg), Error);
    cfg.max_positive = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("training clicks land on misclassified, unclicked pixels") {
    Rng rng(3);
    for (int trial = 0; trial < 500; ++trial) {
        const int w = uniform_int(rng, 1, 12);
        const int h = uniform_int(rng, 1, 12);
        const BinaryMask gt = oracle::random_mask(rng, w, h);
        const BinaryMask pred = oracle::random_mask(rng, w, h);
        const ClickSequence existing = random_existing(rng, w, h);
        const auto click = next_training_click(gt, pred, existing, rng);
        bool any_unclicked_error = false;
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                any_unclicked_error |= gt(x, y) != pred(x, y) && !existing.contains_position(x, y);
            }
        }
        REQUIRE(click.has_value() == any_unclicked_error);
        if (click) {
            CHECK(gt(click->u, click->v) != pred(click->u, click->v));
            CHECK(click->label == gt(click->u, click->v));
            CHECK_FALSE(existing.contains_position(click->u, click->v));
        }
    }
}

TEST_CASE("training clicks prefer the larger error region") {
    Rng rng(4);
    BinaryMask gt(6, 1);
    BinaryMask pred(6, 1);
    gt(0, 0) = 1;  // one false negative
    pred(3, 0) = 1;
    pred(4, 0) = 1;  // two false positives
    for (int k = 0; k < 20; ++k) {
        const auto c = next_training_click(gt, pred, {}, rng);
        REQUIRE(c);
        CHECK(c->label == 0);
    }
}

TEST_CASE("evaluation clicks match the brute-force oracle") {
    Rng rng(5);
    for (int trial = 0; trial < 500; ++trial) {
        const int w = uniform_int(rng, 1, 12);
        const int h = uniform_int(rng, 1, 12);
        const BinaryMask gt = oracle::random_mask(rng, w, h);
        const BinaryMask pred = oracle::random_mask(rng, w, h);
        const ClickSequence existing = random_existing(rng, w, h);
        const auto got = next_eval_click(gt, pred, existing);
        const auto want = oracle::eval_click(gt, pred, existing);
        REQUIRE(got.has_value() == want.has_value());
        if (got) {
            CHECK(*got == *want);
        }
    }
}

TEST_CASE("evaluation click ties favour false negatives") {
    BinaryMask gt(7, 1);
    BinaryMask pred(7, 1);
    pred(0, 0) = 1;  // false positive, found first in raster order
    gt(6, 0) = 1;    // false negative of equal size
    const auto c = next_eval_click(gt, pred, {});
    REQUIRE(c);
    CHECK(*c == Click{6, 0, 1});
}

TEST_CASE("evaluation click sits at the interior maximum") {
    BinaryMask gt(9, 9);
    for (int y = 1; y <= 7; ++y) {
        for (int x = 1; x <= 7; ++x) {
            gt(x, y) = 1;
        }
    }
    const auto c = next_eval_click(gt, BinaryMask(9, 9), {});
    REQUIRE(c);
    CHECK(*c == Click{4, 4, 1});
    CHECK_FALSE(next_eval_click(gt, gt, {}).has_value());
}
