#include <atomic>

#include "doctest.h"
#include "httplib.h"
#include "json.hpp"

#include "clickseg/image_io.hpp"
#include "clickseg/service.hpp"
#include "clickseg/toy_model.hpp"

using namespace clickseg;
using nlohmann::json;

namespace {

const ToyModelParams kParams{{-1.0, 0.5, 0.5, 4.0, -4.0, 1.0, 2.0, -2.0}, 10.0};

struct Fixture {
    std::shared_ptr<std::atomic<std::size_t>> calls = std::make_shared<std::atomic<std::size_t>>(0);
    Service service;
    int port;
    httplib::Client client;

    explicit Fixture(ServiceConfig cfg = make_config())
        : service([c = calls] { return std::make_unique<CountingSegmenter>(std::make_unique<ToySegmenter>(kParams), c); },
                  std::move(cfg)),
          port(service.start()),
          client("127.0.0.1", port) {}

    static ServiceConfig make_config() {
        ServiceConfig cfg;
        cfg.host = "127.0.0.1";
        cfg.port = 0;
        cfg.max_dimension = 256;
        return cfg;
    }

    std::string create(const RasterImage& image, const std::string& cfr = "", const BinaryMask* gt = nullptr) {
        json body{{"image_b64", base64_encode(encode_png(image))}};
        if (!cfr.empty()) {
            body["cfr"] = cfr;
        }
        if (gt) {
            body["gt_b64"] = base64_encode(encode_png(*gt));
        }
        const auto res = client.Post("/api/sessions", body.dump(), "application/json");
        REQUIRE(res);
        REQUIRE(res->status == 201);
        return json::parse(res->body).at("session_id").get<std::string>();
    }

    httplib::Result post(const std::string& path, const json& body) {
        return client.Post(path, body.dump(), "application/json");
    }
};

RasterImage test_image() {
    RasterImage img(24, 20, Rgb{30, 30, 30});
    for (int y = 5; y < 15; ++y) {
        for (int x = 6; x < 18; ++x) {
            img(x, y) = Rgb{220, 200, 40};
        }
    }
    return img;
}

}  // namespace

TEST_CASE("session creation validates the upload") {
    Fixture f;
    const auto ok = f.client.Post("/api/sessions", json{{"image_b64", base64_encode(encode_png(test_image()))}}.dump(),
                                  "application/json");
    REQUIRE(ok);
    CHECK(ok->status == 201);
    const json body = json::parse(ok->body);
    CHECK(body["width"] == 24);
    CHECK(body["height"] == 20);
    CHECK(body["session_id"].get<std::string>().size() == 36);

    const std::vector<std::uint8_t> junk{1, 2, 3, 4, 5};
    CHECK(f.post("/api/sessions", {{"image_b64", base64_encode(junk)}})->status == 400);
    CHECK(f.post("/api/sessions", {{"nothing", 1}})->status == 400);
    CHECK(f.client.Post("/api/sessions", "{", "application/json")->status == 400);
    CHECK(f.post("/api/sessions", {{"image_b64", base64_encode(encode_png(test_image()))}, {"cfr", "bogus"}})->status ==
          400);
    CHECK(f.post("/api/sessions", {{"image_b64", base64_encode(encode_png(RasterImage(300, 10)))}})->status == 413);

    httplib::MultipartFormDataItems items{
        {"image", std::string(reinterpret_cast<const char*>(encode_png(test_image()).data()),
                              encode_png(test_image()).size()),
         "img.png", "image/png"},
        {"cfr", "fixed:2", "", ""}};
    const auto multi = f.client.Post("/api/sessions", items);
    REQUIRE(multi);
    CHECK(multi->status == 201);
    CHECK(json::parse(multi->body)["cfr"] == "fixed:2");
    CHECK(f.service.store().size() == 2);
}

TEST_CASE("clicks, refinement, undo and deletion") {
    Fixture f;
    const std::string id = f.create(test_image(), "fixed:1");
    const std::string base = "/api/sessions/" + id;

    const auto clicked = f.post(base + "/clicks", {{"u", 10}, {"v", 10}, {"label", "positive"}});
    REQUIRE(clicked);
    REQUIRE(clicked->status == 200);
    const json state = json::parse(clicked->body);
    CHECK(state["step"] == 1);
    CHECK(state["click_count"] == 1);
    CHECK(state["inner_steps"] == 1);
    CHECK(state["width"] == 24);
    CHECK(*f.calls == 2);
    const auto mask = decode_mask(base64_decode(state["mask"].get<std::string>()));
    CHECK(mask.width() == 24);
    CHECK(mask.height() == 20);
    CHECK(mask.count() == state["prob_stats"]["foreground_pixels"].get<std::size_t>());

    const std::string before = f.client.Get(base)->body;
    CHECK(f.post(base + "/clicks", {{"u", 24}, {"v", 0}, {"label", 1}})->status == 422);
    CHECK(f.post(base + "/clicks", {{"u", "x"}})->status == 400);
    CHECK(f.client.Get(base)->body == before);

    *f.calls = 0;
    const auto refined = f.post(base + "/refine", {{"mode", "fixed"}, {"n", 2}});
    REQUIRE(refined->status == 200);
    CHECK(*f.calls == 2);
    CHECK(json::parse(refined->body)["inner_steps"] == 2);

    const auto adaptive = f.post(base + "/refine", {{"mode", "adaptive"}, {"n", 4}, {"threshold", 1000000}});
    REQUIRE(adaptive->status == 200);
    CHECK(json::parse(adaptive->body)["inner_steps"] == 1);
    CHECK(f.post(base + "/refine", {{"mode", "sideways"}})->status == 422);

    const auto full = f.client.Get(base + "?full=1");
    REQUIRE(full->status == 200);
    const json full_state = json::parse(full->body);
    CHECK(full_state["clicks"].size() == 1);
    CHECK(full_state["cfr_label"] == "CFR-1");
    const auto prob = decode_cspm(base64_decode(full_state["prob_map"].get<std::string>()));
    CHECK(prob.width() == 24);

    CHECK(f.post(base + "/undo", json::object())->status == 200);
    const json after = json::parse(f.client.Get(base)->body);
    CHECK(after["clicks"].empty());
    CHECK(after["prob_stats"]["max"] == 0.0);
    CHECK(after["step"] == 0);
    CHECK(f.post(base + "/undo", json::object())->status == 409);
    CHECK(f.post(base + "/refine", json::object())->status == 409);

    CHECK(f.client.Delete(base)->status == 204);
    CHECK(f.client.Get(base)->status == 404);
    CHECK(f.client.Delete(base)->status == 404);
    CHECK(f.post("/api/sessions/nope/clicks", {{"u", 1}, {"v", 1}})->status == 404);
}

TEST_CASE("ground truth enables IoU in responses") {
    Fixture f;
    BinaryMask gt(24, 20);
    for (int y = 5; y < 15; ++y) {
        for (int x = 6; x < 18; ++x) {
            gt(x, y) = 1;
        }
    }
    const std::string id = f.create(test_image(), "", &gt);
    const json state = json::parse(f.post("/api/sessions/" + id + "/clicks", {{"u", 11}, {"v", 9}})->body);
    REQUIRE(state.contains("iou"));
    CHECK(state["iou"].get<double>() >= 0.0);
    CHECK(state["iou"].get<double>() <= 1.0);
}

TEST_CASE("segmenter failures map to bad gateway") {
    ServiceConfig cfg = Fixture::make_config();
    Service service([] { return std::make_unique<ScriptedMock>(); }, cfg);
    const int port = service.start();
    httplib::Client client("127.0.0.1", port);
    const auto created = client.Post("/api/sessions", json{{"image_b64", base64_encode(encode_png(test_image()))}}.dump(),
                                     "application/json");
    const std::string id = json::parse(created->body)["session_id"];
    const auto res = client.Post("/api/sessions/" + id + "/clicks", json{{"u", 1}, {"v", 1}}.dump(), "application/json");
    REQUIRE(res);
    CHECK(res->status == 502);
    service.stop();
}

TEST_CASE("idle sessions expire") {
    Clock::time_point now{};
    SessionStore store([] { return std::make_unique<EmptySegmenter>(); }, std::chrono::seconds(60), [&] { return now; });
    const std::string a = store.create(RasterImage(4, 4), CfrConfig{}, std::nullopt);
    now += std::chrono::seconds(30);
    const std::string b = store.create(RasterImage(4, 4), CfrConfig{}, std::nullopt);
    now += std::chrono::seconds(40);
    CHECK(store.sweep() == 1);
    CHECK(store.find(a) == nullptr);
    CHECK(store.find(b) != nullptr);
    now += std::chrono::seconds(61);
    CHECK(store.find(b) == nullptr);
    CHECK(store.size() == 0);
}

TEST_CASE("log levels") {
    CHECK_NOTHROW(set_log_level("warn"));
    CHECK_THROWS_AS(set_log_level("loud"), Error);
    set_log_level("warn");
}
