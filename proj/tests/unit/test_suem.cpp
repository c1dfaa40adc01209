#include <cmath>
#include <map>

#include "doctest.h"

#include "clickseg/suem.hpp"
#include "oracles.hpp"

using namespace clickseg;

namespace {

AnnotatedSample random_sample(Rng& rng, std::string id, int max_side = 32) {
    const int w = uniform_int(rng, 4, max_side);
    const int h = uniform_int(rng, 4, max_side);
    AnnotatedSample s;
    s.id = std::move(id);
    s.image = oracle::random_image(rng, w, h);
    BinaryMask gt = oracle::random_mask(rng, w, h);
    if (gt.count() == 0) {
        gt(w / 2, h / 2) = 1;
    }
    s.instances.push_back(std::move(gt));
    return s;
}

BinaryMask unite(const BinaryMask& a, const BinaryMask& b) {
    BinaryMask out(a.width(), a.height());
    for (std::size_t i = 0; i < a.size(); ++i) {
        out[i] = a[i] | b[i];
    }
    return out;
}

BinaryMask subtract(const BinaryMask& a, const BinaryMask& b) {
    BinaryMask out(a.width(), a.height());
    for (std::size_t i = 0; i < a.size(); ++i) {
        out[i] = a[i] & !b[i];
    }
    return out;
}

}  // namespace

TEST_CASE("paste matches the per-pixel oracle") {
    Rng rng(31);
    for (int trial = 0; trial < 200; ++trial) {
        const AnnotatedSample obj = random_sample(rng, "o");
        const AnnotatedSample dst = random_sample(rng, "d");
        Placement pl;
        pl.patch_width = uniform_int(rng, 1, 40);
        pl.patch_height = uniform_int(rng, 1, 40);
        pl.offset_x = uniform_int(rng, -20, dst.image.width());
        pl.offset_y = uniform_int(rng, -20, dst.image.height());
        const PasteResult got = paste_object(obj.image, obj.ground_truth(), dst.image, pl);
        const PasteResult want = oracle::paste(obj.image, obj.ground_truth(), dst.image, pl);
        CHECK(got.image == want.image);
        CHECK(got.pasted == want.pasted);
    }
}

TEST_CASE("copy-paste modes match set-algebra oracles") {
    Rng rng(32);
    SuemConfig cfg;
    for (int trial = 0; trial < 200; ++trial) {
        const AnnotatedSample src = random_sample(rng, "s");
        const AnnotatedSample ext = random_sample(rng, "e");

        const AugmentResult simple = simple_cp(src, ext, rng, cfg);
        if (!simple.provenance.fallback) {
            REQUIRE(simple.provenance.placement);
            const PasteResult want = oracle::paste(src.image, src.ground_truth(), ext.image, *simple.provenance.placement);
            CHECK(simple.sample.image == want.image);
            CHECK(simple.sample.ground_truth() == want.pasted);
            CHECK(simple.sample.ground_truth().count() > 0);
        }

        const AugmentResult uni = union_cp(src, ext, rng, cfg);
        if (!uni.provenance.fallback) {
            const PasteResult want = oracle::paste(ext.image, ext.ground_truth(), src.image, *uni.provenance.placement);
            CHECK(uni.sample.image == want.image);
            CHECK(uni.sample.ground_truth() == unite(src.ground_truth(), want.pasted));
        }

        const AugmentResult exc = exclusion_cp(src, ext, rng, cfg);
        CHECK(exc.provenance.mode == SuemMode::Exclusion);
        if (!exc.provenance.fallback) {
            const PasteResult want = oracle::paste(ext.image, ext.ground_truth(), src.image, *exc.provenance.placement);
            CHECK(exc.sample.image == want.image);
            const BinaryMask residual = subtract(src.ground_truth(), want.pasted);
            CHECK(exc.sample.ground_truth() == residual);
            CHECK(static_cast<double>(residual.count()) >= 0.2 * static_cast<double>(src.ground_truth().count()));
        } else if (exc.provenance.placement) {
            // Simple-mode output: the source object pasted onto the extra image.
            const PasteResult want = oracle::paste(src.image, src.ground_truth(), ext.image, *exc.provenance.placement);
            CHECK(exc.sample.ground_truth() == want.pasted);
        }

        const AugmentResult mix = image_mixing(src, ext, rng, cfg);
        CHECK(mix.sample.ground_truth() == src.ground_truth());
        const int w = src.image.width();
        const int h = src.image.height();
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const int ex = std::min(ext.image.width() - 1, static_cast<int>(std::floor((x + 0.5) * ext.image.width() / w)));
                const int ey = std::min(ext.image.height() - 1, static_cast<int>(std::floor((y + 0.5) * ext.image.height() / h)));
                const Rgb& a = src.image(x, y);
                const Rgb& b = ext.image(ex, ey);
                const Rgb& got = mix.sample.image(x, y);
                CHECK(got.r == static_cast<int>(std::lround(0.5 * a.r + 0.5 * b.r)));
                CHECK(got.g == static_cast<int>(std::lround(0.5 * a.g + 0.5 * b.g)));
                CHECK(got.b == static_cast<int>(std::lround(0.5 * a.b + 0.5 * b.b)));
            }
        }
    }
}

TEST_CASE("placement keeps the patch centre inside the target") {
    Rng rng(33);
    SuemConfig cfg;
    for (int trial = 0; trial < 200; ++trial) {
        const AnnotatedSample src = random_sample(rng, "s");
        const AnnotatedSample ext = random_sample(rng, "e");
        const AugmentResult r = union_cp(src, ext, rng, cfg);
        if (!r.provenance.placement) {
            continue;
        }
        const Placement& p = *r.provenance.placement;
        const int cx = p.offset_x + p.patch_width / 2;
        const int cy = p.offset_y + p.patch_height / 2;
        CHECK(cx >= 0);
        CHECK(cy >= 0);
        CHECK(cx < src.image.width());
        CHECK(cy < src.image.height());
        CHECK(p.scale >= 0.5);
        CHECK(p.scale <= 1.5);
        CHECK(p.tries >= 1);
        CHECK(p.tries <= 5);
    }
}

TEST_CASE("mode frequencies follow the configuration") {
    Rng rng(34);
    std::vector<AnnotatedSample> pool;
    for (int i = 0; i < 6; ++i) {
        pool.push_back(random_sample(rng, "p" + std::to_string(i), 8));
    }
    SuemConfig cfg;
    cfg.output_width = 8;
    cfg.output_height = 8;
    std::map<SuemMode, int> counts;
    constexpr int kDraws = 10000;
    for (int k = 0; k < kDraws; ++k) {
        const std::size_t src = static_cast<std::size_t>(k) % pool.size();
        const AugmentResult r = augment_sample(pool[src], pool_sampler(pool, src), rng, cfg);
        ++counts[r.provenance.mode];
        CHECK(r.sample.image.width() == 8);
        CHECK(r.sample.ground_truth().count() > 0);
    }
    const int applied = kDraws - counts[SuemMode::None];
    CHECK(std::abs(applied / double(kDraws) - 0.5) <= 0.02);
    for (SuemMode m : {SuemMode::Simple, SuemMode::Union, SuemMode::Exclusion, SuemMode::Mixing}) {
        CHECK(std::abs(counts[m] / double(applied) - 0.25) <= 0.02);
    }
}

TEST_CASE("pool sampler never returns the source when alternatives exist") {
    Rng rng(35);
    std::vector<AnnotatedSample> pool;
    for (int i = 0; i < 3; ++i) {
        pool.push_back(random_sample(rng, "p" + std::to_string(i), 6));
    }
    const ExtraSampler sampler = pool_sampler(pool, 1);
    for (int k = 0; k < 200; ++k) {
        CHECK(sampler(rng).id != "p1");
    }
    CHECK_THROWS_AS((void)pool_sampler(std::span<const AnnotatedSample>{}, 0), Error);
}

TEST_CASE("standard stack without jitter is a plain resize") {
    Rng rng(36);
    const AnnotatedSample s = random_sample(rng, "s");
    SuemConfig cfg;
    cfg.standard = {0.0, 0.0, 0.0, 0.0, 1.0};
    cfg.output_width = 17;
    cfg.output_height = 23;
    const AugmentResult r = standard_augment(s, rng, cfg);
    CHECK(r.sample.image == resize_nearest(s.image, 17, 23));
    CHECK(r.sample.ground_truth() == resize_nearest(s.ground_truth(), 17, 23));
}

TEST_CASE("flip-only stack mirrors image and mask together") {
    Rng rng(37);
    const AnnotatedSample s = random_sample(rng, "s");
    SuemConfig cfg;
    cfg.standard = {1.0, 0.0, 0.0, 0.0, 1.0};
    cfg.output_width = s.image.width();
    cfg.output_height = s.image.height();
    const AugmentResult r = standard_augment(s, rng, cfg);
    REQUIRE(r.provenance.standard);
    CHECK(r.provenance.standard->flipped);
    const int w = s.image.width();
    for (int y = 0; y < s.image.height(); ++y) {
        for (int x = 0; x < w; ++x) {
            CHECK(r.sample.image(x, y) == s.image(w - 1 - x, y));
            CHECK(r.sample.ground_truth()(x, y) == s.ground_truth()(w - 1 - x, y));
        }
    }
}

TEST_CASE("full stack keeps a nonempty ground truth and is seed-deterministic") {
    Rng seed_rng(38);
    SuemConfig cfg;
    cfg.output_width = 24;
    cfg.output_height = 24;
    for (int trial = 0; trial < 100; ++trial) {
        const AnnotatedSample s = random_sample(seed_rng, "s");
        Rng a(static_cast<std::uint64_t>(trial));
        Rng b(static_cast<std::uint64_t>(trial));
        const AugmentResult ra = standard_augment(s, a, cfg);
        const AugmentResult rb = standard_augment(s, b, cfg);
        CHECK(ra.sample.image == rb.sample.image);
        CHECK(ra.sample.ground_truth() == rb.sample.ground_truth());
        CHECK(ra.sample.ground_truth().count() > 0);
    }
}

TEST_CASE("configuration validation") {
    SuemConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.p_mixing = 0.5;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = SuemConfig{};
    cfg.scale_min = 0.0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = SuemConfig{};
    cfg.output_width = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("provenance serialises placement and mode") {
    Rng rng(39);
    const AnnotatedSample src = random_sample(rng, "src");
    const AnnotatedSample ext = random_sample(rng, "ext");
    const AugmentResult r = union_cp(src, ext, rng, SuemConfig{});
    const auto j = r.provenance.to_json();
    CHECK(j["mode"] == "union");
    CHECK(j["source"] == "src");
    if (!r.provenance.fallback) {
        CHECK(j["extra"] == "ext");
        CHECK(j.contains("offset"));
    }
}
