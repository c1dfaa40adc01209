#include <atomic>
#include <cmath>

#include "doctest.h"

#include "clickseg/noc.hpp"
#include "clickseg/synthetic.hpp"
#include "clickseg/toy_model.hpp"

using namespace clickseg;

namespace {

// Throws for ground truths whose top-left pixel is foreground.
class PickySegmenter : public Segmenter {
public:
    explicit PickySegmenter(std::shared_ptr<std::atomic<int>> created) { ++*created; }
    void begin_instance(const BinaryMask& gt) override { refuse_ = gt(0, 0) != 0; }
    ProbabilityMap predict(const ModelInput& input) override {
        if (refuse_) {
            throw SegmenterError("refused");
        }
        return ProbabilityMap(input.width(), input.height(), 0.0);
    }
    [[nodiscard]] std::string name() const override { return "picky"; }

private:
    bool refuse_ = false;
};

std::vector<AnnotatedSample> small_dataset(int count, std::uint64_t seed) {
    SyntheticConfig cfg;
    cfg.count = count;
    cfg.width = 32;
    cfg.height = 32;
    cfg.seed = seed;
    return generate_synthetic_dataset(cfg);
}

BinaryMask square(int w, int h, int x0, int y0, int side) {
    BinaryMask m(w, h);
    for (int y = y0; y < y0 + side; ++y) {
        for (int x = x0; x < x0 + side; ++x) {
            m(x, y) = 1;
        }
    }
    return m;
}

}  // namespace

TEST_CASE("oracle segmenter needs one click, empty segmenter never converges") {
    const BinaryMask gt = square(16, 16, 3, 3, 6);
    const RasterImage img(16, 16);
    OracleSegmenter oracle_seg;
    const InstanceResult good = evaluate_instance(oracle_seg, img, gt, EvalConfig{}, "sq");
    CHECK(good.noc == std::vector<int>{1, 1});
    CHECK(good.reached == std::vector<bool>{true, true});
    CHECK(good.iou_trace.size() == 1);
    CHECK(good.iou_at(5) == 1.0);

    EmptySegmenter empty;
    const InstanceResult bad = evaluate_instance(empty, img, gt, EvalConfig{}, "sq");
    CHECK(bad.noc == std::vector<int>{20, 20});
    CHECK(bad.reached == std::vector<bool>{false, false});
    CHECK_FALSE(bad.failed);
    CHECK(bad.iou_trace.size() <= 20);
    CHECK(bad.iou_at(1) == 0.0);
}

TEST_CASE("thresholds are recorded independently") {
    // Predicts the ground truth minus one pixel: IoU 35/36 sits between 0.90 and 0.99.
    class AlmostSegmenter : public Segmenter {
    public:
        void begin_instance(const BinaryMask& gt) override { gt_ = gt; }
        ProbabilityMap predict(const ModelInput&) override {
            ProbabilityMap p(gt_.width(), gt_.height());
            for (std::size_t i = 0; i < gt_.size(); ++i) {
                p[i] = gt_[i];
            }
            p(3, 3) = 0.0;
            return p;
        }
        [[nodiscard]] std::string name() const override { return "almost"; }

    private:
        BinaryMask gt_;
    };
    AlmostSegmenter seg;
    EvalConfig cfg;
    cfg.thresholds = {0.90, 0.99};
    cfg.max_clicks = 3;
    const InstanceResult r = evaluate_instance(seg, RasterImage(16, 16), square(16, 16, 3, 3, 6), cfg);
    CHECK(r.noc == std::vector<int>{1, 3});
    CHECK(r.reached == std::vector<bool>{true, false});
}

TEST_CASE("aggregates do not depend on the worker count") {
    const auto samples = small_dataset(12, 4);
    const auto instances = evaluation_instances(samples);
    ToyModelParams params;
    params.weights = {-1.0, 0.5, 0.5, 4.0, -4.0, 1.0, 2.0, -2.0};
    const SegmenterFactory factory = [&] { return std::make_unique<ToySegmenter>(params); };
    EvalConfig cfg;
    cfg.cfr = CfrConfig::parse("fixed:1");
    const DatasetReport one = evaluate_dataset(factory, instances, cfg, "synthetic");
    cfg.jobs = 4;
    const DatasetReport four = evaluate_dataset(factory, instances, cfg, "synthetic");
    CHECK(one.mean_noc == four.mean_noc);
    CHECK(one.segmenter == "toy");
    CHECK(one.inference == "CFR-1");
    REQUIRE(one.instances.size() == four.instances.size());
    for (std::size_t i = 0; i < one.instances.size(); ++i) {
        CHECK(one.instances[i].id == four.instances[i].id);
        CHECK(one.instances[i].iou_trace == four.instances[i].iou_trace);
    }
    CHECK(instances_csv(one) == instances_csv(four));
}

TEST_CASE("failed instances are tallied and excluded from means") {
    std::vector<AnnotatedSample> samples;
    for (int k = 0; k < 6; ++k) {
        AnnotatedSample s;
        s.id = "s" + std::to_string(k);
        s.image = RasterImage(10, 10);
        s.instances = {square(10, 10, k % 2 == 0 ? 0 : 2, 0, 4)};
        samples.push_back(std::move(s));
    }
    const auto instances = evaluation_instances(samples);
    auto created = std::make_shared<std::atomic<int>>(0);
    const SegmenterFactory factory = [&] { return std::make_unique<PickySegmenter>(created); };
    for (int jobs : {1, 3}) {
        *created = 0;
        EvalConfig cfg;
        cfg.jobs = jobs;
        const DatasetReport r = evaluate_dataset(factory, instances, cfg);
        CHECK(r.failures == 3);
        CHECK(r.mean_noc[0] == 20.0);
        CHECK(r.instances[0].failed);
        CHECK(r.instances[0].error == "refused");
        CHECK_FALSE(r.instances[1].failed);
        if (jobs == 1) {
            // Each failure discards the segmenter; the next instance gets a fresh one.
            CHECK(*created == 4);
        }
    }

    EvalConfig cfg;
    std::vector<EvalInstance> only_bad{instances[0]};
    CHECK(std::isnan(evaluate_dataset(factory, only_bad, cfg).mean_noc[0]));
    CHECK_THROWS_AS((void)evaluate_dataset(factory, std::span<const EvalInstance>{}, cfg), Error);
}

TEST_CASE("evaluation config validation") {
    EvalConfig cfg;
    cfg.thresholds = {0.95, 0.90};
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg.thresholds = {1.0};
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = EvalConfig{};
    cfg.max_clicks = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("report rendering") {
    DatasetReport a;
    a.dataset = "synthetic";
    a.segmenter = "toy";
    a.inference = "StdInfer";
    a.thresholds = {0.90};
    a.mean_noc = {3.456};
    DatasetReport b = a;
    b.inference = "CFR-1";
    b.mean_noc = {3.0};
    const std::vector<DatasetReport> results{a, b};
    const std::vector<ReferenceEntry> fixtures{{"GrabCut", "Big", "StdInfer", 1.54, 2.16}};
    const RenderedReport r = render_report(results, fixtures);
    CHECK(r.markdown.find("| Model | Inference | Source | synthetic NoC@90 | GrabCut NoC@90 |") == 0);
    CHECK(r.markdown.find("| toy | StdInfer | measured | 3.46 | - |") != std::string::npos);
    CHECK(r.markdown.find("| toy | CFR-1 | measured | 3.00 | - |") != std::string::npos);
    CHECK(r.markdown.find("| Big | StdInfer | reference | - | 1.54 |") != std::string::npos);
    CHECK(r.csv.find("\"toy\",StdInfer,measured,\"synthetic\",90,3.46\n") != std::string::npos);

    const RenderedReport empty = render_report({}, {});
    CHECK(empty.markdown.find("| Model | Inference | Source |") == 0);
    CHECK(empty.csv == "model,inference,source,dataset,threshold,noc\n");
}

TEST_CASE("shipped reference fixtures load") {
    const auto fixtures = load_reference_fixtures(default_fixture_path());
    REQUIRE_FALSE(fixtures.empty());
    bool found = false;
    for (const auto& f : fixtures) {
        CHECK(f.noc90 > 0.0);
        CHECK(f.noc95 >= f.noc90);
        found |= f.dataset == "GrabCut" && f.mode == "StdInfer";
    }
    CHECK(found);
    CHECK_THROWS_AS((void)load_reference_fixtures("/nonexistent/fixtures.json"), Error);
}
