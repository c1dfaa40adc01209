#include <algorithm>

#include "doctest.h"

#include "clickseg/click_encoding.hpp"
#include "oracles.hpp"

using namespace clickseg;

namespace {

std::size_t ones(const ProbabilityMap& p) {
    return static_cast<std::size_t>(std::count(p.values().begin(), p.values().end(), 1.0));
}

}  // namespace

TEST_CASE("interior disk of radius five covers 81 pixels") {
    const ClickMaps maps = encode_click_maps(ClickSequence({{20, 20, 1}}), 41, 41, 5);
    CHECK(ones(maps.positive) == 81);
    CHECK(ones(maps.negative) == 0);
}

TEST_CASE("corner disk is clipped to 26 pixels") {
    const ClickMaps maps = encode_click_maps(ClickSequence({{0, 0, 0}}), 20, 20, 5);
    CHECK(ones(maps.negative) == 26);
}

TEST_CASE("disk maps match per-pixel enumeration") {
    Rng rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        const int w = uniform_int(rng, 1, 24);
        const int h = uniform_int(rng, 1, 24);
        const int radius = uniform_int(rng, 0, 7);
        ClickSequence clicks;
        const int n = uniform_int(rng, 0, 6);
        for (int k = 0; k < n; ++k) {
            const Click c{uniform_int(rng, 0, w - 1), uniform_int(rng, 0, h - 1), uniform_int(rng, 0, 1)};
            if (!clicks.contains_position(c.u, c.v)) {
                clicks.push_back(c);
            }
        }
        CHECK(encode_click_maps(clicks, w, h, radius) == oracle::disks(clicks, w, h, radius));
    }
}

TEST_CASE("disk maps do not depend on click order") {
    Rng rng(4);
    std::vector<Click> clicks;
    for (int k = 0; k < 8; ++k) {
        clicks.push_back({k * 3, (k * 7) % 20, k % 2});
    }
    const ClickMaps ref = encode_click_maps(ClickSequence(clicks), 24, 20, 5);
    for (int s = 0; s < 1000; ++s) {
        std::shuffle(clicks.begin(), clicks.end(), rng);
        REQUIRE(encode_click_maps(ClickSequence(clicks), 24, 20, 5) == ref);
    }
}

TEST_CASE("out-of-bounds clicks are rejected") {
    CHECK_THROWS_AS((void)encode_click_maps(ClickSequence({{10, 0, 1}}), 10, 10), OutOfBounds);
    CHECK_THROWS_AS((void)encode_click_maps(ClickSequence({{0, -1, 1}}), 10, 10), OutOfBounds);
    CHECK_THROWS_AS((void)encode_click_maps({}, 10, 10, -1), Error);
}

TEST_CASE("model input checks the previous mask shape") {
    const RasterImage img(4, 3);
    CHECK_THROWS_AS((void)assemble_model_input(img, {}, ProbabilityMap::zeros(3, 4)), DimensionMismatch);
    const ModelInput in = assemble_model_input(img, ClickSequence({{1, 1, 1}}), ProbabilityMap::zeros(4, 3));
    CHECK(in.width() == 4);
    CHECK(in.height() == 3);
    CHECK(in.click_maps.positive(1, 1) == 1.0);
}
