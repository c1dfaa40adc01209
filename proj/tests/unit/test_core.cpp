#include "doctest.h"

#include "clickseg/core.hpp"
#include "oracles.hpp"

using namespace clickseg;

TEST_CASE("grids reject non-positive dimensions") {
    CHECK_THROWS_AS(BinaryMask(0, 4), DimensionMismatch);
    CHECK_THROWS_AS(ProbabilityMap(3, -1), DimensionMismatch);
    CHECK_THROWS_AS(ProbabilityMap(2, 2, std::vector<double>(3, 0.0)), DimensionMismatch);
}

TEST_CASE("probability maps validate their range") {
    ProbabilityMap p(2, 1, std::vector<double>{0.0, 1.0});
    CHECK_NOTHROW(p.validate());
    p[1] = 1.5;
    CHECK_THROWS_AS(p.validate(), Error);
    p[1] = std::nan("");
    CHECK_THROWS_AS(p.validate(), Error);
}

TEST_CASE("click sequences keep positions unique") {
    ClickSequence s;
    s.push_back({1, 2, 1});
    CHECK_THROWS_AS(s.push_back({1, 2, 0}), Error);
    CHECK_THROWS_AS(s.push_back({0, 0, 2}), Error);
    CHECK(s.size() == 1);
    CHECK(s.contains_position(1, 2));
    s.pop_back();
    CHECK(s.empty());
    s.push_back({4, 0, 0});
    CHECK_THROWS_AS(s.check_bounds(4, 4), OutOfBounds);
    CHECK_NOTHROW(s.check_bounds(5, 1));
}

TEST_CASE("iou of empty masks is one and disjoint masks zero") {
    BinaryMask a(3, 3);
    BinaryMask b(3, 3);
    CHECK(iou(a, b) == 1.0);
    a(0, 0) = 1;
    b(2, 2) = 1;
    CHECK(iou(a, b) == 0.0);
    b(0, 0) = 1;
    CHECK(iou(a, b) == doctest::Approx(0.5));
    CHECK_THROWS_AS((void)iou(a, BinaryMask(2, 2)), DimensionMismatch);
}

TEST_CASE("binarize uses an inclusive threshold") {
    ProbabilityMap p(3, 1, std::vector<double>{0.49, 0.5, 0.51});
    const BinaryMask m = binarize(p);
    CHECK(m[0] == 0);
    CHECK(m[1] == 1);
    CHECK(m[2] == 1);
    CHECK(pixel_delta(m, BinaryMask(3, 1)) == 2);
}

TEST_CASE("connected components match flood fill") {
    Rng rng(11);
    for (int trial = 0; trial < 300; ++trial) {
        const int w = uniform_int(rng, 1, 14);
        const int h = uniform_int(rng, 1, 14);
        const BinaryMask m = oracle::random_mask(rng, w, h);
        const auto got = connected_components(m);
        const auto want = oracle::components(m);
        REQUIRE(got.size() == want.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i].pixels == want[i]);
        }
    }
}

TEST_CASE("diagonal neighbours are connected") {
    BinaryMask m(3, 3);
    m(0, 0) = 1;
    m(1, 1) = 1;
    m(2, 2) = 1;
    CHECK(connected_components(m).size() == 1);
}

TEST_CASE("distance transform matches exhaustive search") {
    Rng rng(12);
    for (int trial = 0; trial < 300; ++trial) {
        const int w = uniform_int(rng, 1, 14);
        const int h = uniform_int(rng, 1, 14);
        const BinaryMask m = oracle::random_mask(rng, w, h);
        const DistanceMap got = distance_transform(m);
        const auto want = oracle::distances(m);
        for (std::size_t i = 0; i < m.size(); ++i) {
            CHECK(got[i] == want[i]);
        }
    }
}

TEST_CASE("distance transform treats the border as background") {
    const BinaryMask full(5, 5, 1);
    const DistanceMap d = distance_transform(full);
    CHECK(d(0, 0) == 1.0);
    CHECK(d(2, 2) == 3.0);
}

TEST_CASE("CSPM round trip and rejection") {
    ProbabilityMap p(3, 2, std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0, 0.125});
    const auto bytes = encode_cspm(p);
    CHECK(bytes.size() == 8 + 6 * 4);
    CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "CSPM");
    CHECK(bytes[4] == 3);
    CHECK(bytes[6] == 2);
    CHECK(decode_cspm(bytes) == p);

    auto bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_AS((void)decode_cspm(bad), FormatError);
    auto truncated = bytes;
    truncated.pop_back();
    CHECK_THROWS_AS((void)decode_cspm(truncated), FormatError);
}
