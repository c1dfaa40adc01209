#include "clickseg/service.hpp"

#include <algorithm>
#include <thread>

#include <boost/uuid/uuid.hpp>
#include <boost/uuid/uuid_generators.hpp>
#include <boost/uuid/uuid_io.hpp>
#include <spdlog/spdlog.h>

#include "httplib.h"
#include "json.hpp"

#include "clickseg/image_io.hpp"

namespace clickseg {

using nlohmann::json;

SessionStore::SessionStore(SegmenterFactory factory, std::chrono::seconds idle_ttl,
                           std::function<Clock::time_point()> now)
    : factory_(std::move(factory)), ttl_(idle_ttl), now_(std::move(now)) {}

std::string SessionStore::create(RasterImage image, const CfrConfig& cfr, std::optional<BinaryMask> ground_truth) {
    cfr.validate();
    if (ground_truth && !ground_truth->same_shape(image)) {
        throw DimensionMismatch("ground truth does not match image");
    }
    auto entry = std::make_shared<Entry>(SegmentationSession(std::move(image)), cfr, std::move(ground_truth),
                                         factory_());
    sweep();
    std::lock_guard lock(mutex_);
    static thread_local boost::uuids::random_generator generator;
    std::string id;
    do {
        id = boost::uuids::to_string(generator());
    } while (sessions_.contains(id));
    entry->last_active = now_();
    sessions_.emplace(id, std::move(entry));
    return id;
}

std::shared_ptr<SessionStore::Entry> SessionStore::find(const std::string& id) {
    std::lock_guard lock(mutex_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) {
        return nullptr;
    }
    const auto now = now_();
    if (now - it->second->last_active > ttl_) {
        sessions_.erase(it);
        return nullptr;
    }
    it->second->last_active = now;
    return it->second;
}

bool SessionStore::erase(const std::string& id) {
    std::lock_guard lock(mutex_);
    return sessions_.erase(id) > 0;
}

std::size_t SessionStore::sweep() {
    std::lock_guard lock(mutex_);
    const auto now = now_();
    return std::erase_if(sessions_, [&](const auto& kv) { return now - kv.second->last_active > ttl_; });
}

std::size_t SessionStore::size() const {
    std::lock_guard lock(mutex_);
    return sessions_.size();
}

namespace {

void reply(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, int status, const std::string& message) {
    reply(res, status, json{{"error", message}});
}

json mask_payload(const SessionStore::Entry& e, bool full) {
    const ProbabilityMap& prob = e.session.current_mask();
    const BinaryMask mask = binarize(prob);
    const auto [lo, hi] = std::minmax_element(prob.values().begin(), prob.values().end());
    double sum = 0.0;
    for (double p : prob.values()) {
        sum += p;
    }
    json out{
        {"mask", base64_encode(encode_png(mask))},
        {"width", prob.width()},
        {"height", prob.height()},
        {"prob_stats",
         {{"min", *lo},
          {"max", *hi},
          {"mean", sum / static_cast<double>(prob.values().size())},
          {"foreground_pixels", mask.count()}}},
        {"step", e.session.step()},
        {"click_count", e.session.clicks().size()},
        {"inner_steps", e.session.last_inner_steps()},
    };
    if (e.ground_truth) {
        out["iou"] = iou(mask, *e.ground_truth);
    }
    if (full) {
        out["prob_map"] = base64_encode(encode_cspm(prob));
    }
    return out;
}

int parse_label(const json& j) {
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "positive" || s == "pos" || s == "1") {
            return 1;
        }
        if (s == "negative" || s == "neg" || s == "0") {
            return 0;
        }
        throw Error("unknown click label '" + s + "'");
    }
    return j.get<int>();
}

CfrConfig parse_refine_override(const json& body, const CfrConfig& base) {
    CfrConfig cfg = base;
    if (body.contains("mode")) {
        const auto mode = body.at("mode").get<std::string>();
        if (mode == "fixed") {
            cfg.mode = CfrMode::Fixed;
        } else if (mode == "adaptive") {
            cfg.mode = CfrMode::Adaptive;
        } else {
            throw Error("unknown refinement mode '" + mode + "'");
        }
    }
    if (body.contains("n")) {
        cfg.n = body.at("n").get<int>();
    }
    if (body.contains("threshold")) {
        cfg.pixel_threshold = body.at("threshold").get<std::size_t>();
    }
    cfg.validate();
    return cfg;
}

json state_payload(const std::string& id, const SessionStore::Entry& e, bool full) {
    json out = mask_payload(e, full);
    json clicks = json::array();
    for (const Click& c : e.session.clicks()) {
        clicks.push_back({{"u", c.u}, {"v", c.v}, {"label", c.label}});
    }
    out["session_id"] = id;
    out["clicks"] = std::move(clicks);
    out["cfr"] = e.cfr.to_string();
    out["cfr_label"] = e.cfr.label();
    return out;
}

bool wants_full(const httplib::Request& req) {
    return req.has_param("full") && req.get_param_value("full") == "1";
}

}  // namespace

struct Service::Impl {
    ServiceConfig cfg;
    SessionStore store;
    httplib::Server server;
    std::thread thread;

    Impl(SegmenterFactory factory, ServiceConfig c)
        : cfg(std::move(c)), store(std::move(factory), cfg.idle_ttl) {
        cfg.default_cfr.validate();
        routes();
    }

    // Runs fn with the session locked, mapping store misses to 404.
    template <typename Fn>
    void with_session(const httplib::Request& req, httplib::Response& res, Fn&& fn) {
        const std::string id = req.matches[1];
        const auto entry = store.find(id);
        if (!entry) {
            reply_error(res, 404, "unknown session");
            return;
        }
        std::lock_guard lock(entry->mutex);
        try {
            fn(id, *entry);
        } catch (const json::exception& e) {
            reply_error(res, 400, std::string("malformed request: ") + e.what());
        } catch (const OutOfBounds& e) {
            reply_error(res, 422, e.what());
        } catch (const StateError& e) {
            reply_error(res, 409, e.what());
        } catch (const SegmenterError& e) {
            spdlog::error("segmenter failure in session {}: {}", id, e.what());
            reply_error(res, 502, e.what());
        } catch (const Error& e) {
            reply_error(res, 422, e.what());
        }
    }

    void create(const httplib::Request& req, httplib::Response& res) {
        std::vector<std::uint8_t> image_bytes;
        std::optional<std::vector<std::uint8_t>> gt_bytes;
        CfrConfig cfr = cfg.default_cfr;
        try {
            if (req.is_multipart_form_data()) {
                if (!req.has_file("image")) {
                    reply_error(res, 400, "missing image field");
                    return;
                }
                const auto& content = req.get_file_value("image").content;
                image_bytes.assign(content.begin(), content.end());
                if (req.has_file("gt")) {
                    const auto& gt = req.get_file_value("gt").content;
                    gt_bytes.emplace(gt.begin(), gt.end());
                }
                if (req.has_file("cfr")) {
                    cfr = CfrConfig::parse(req.get_file_value("cfr").content);
                }
            } else {
                const json body = json::parse(req.body);
                image_bytes = base64_decode(body.at("image_b64").get<std::string>());
                if (body.contains("gt_b64") && !body.at("gt_b64").is_null()) {
                    gt_bytes = base64_decode(body.at("gt_b64").get<std::string>());
                }
                if (body.contains("cfr") && !body.at("cfr").is_null()) {
                    cfr = CfrConfig::parse(body.at("cfr").get<std::string>());
                }
            }
        } catch (const json::exception& e) {
            reply_error(res, 400, std::string("malformed request: ") + e.what());
            return;
        } catch (const Error& e) {
            reply_error(res, 400, e.what());
            return;
        }

        RasterImage image(1, 1);
        std::optional<BinaryMask> gt;
        try {
            image = decode_image(image_bytes);
            if (gt_bytes) {
                gt = decode_mask(*gt_bytes);
            }
        } catch (const Error& e) {
            reply_error(res, 400, std::string("undecodable image: ") + e.what());
            return;
        }
        if (image.width() > cfg.max_dimension || image.height() > cfg.max_dimension) {
            reply_error(res, 413, "image exceeds " + std::to_string(cfg.max_dimension) + " pixels per side");
            return;
        }
        if (gt && !gt->same_shape(image)) {
            reply_error(res, 400, "ground truth does not match image dimensions");
            return;
        }
        const int w = image.width();
        const int h = image.height();
        std::string id;
        try {
            id = store.create(std::move(image), cfr, std::move(gt));
        } catch (const Error& e) {
            reply_error(res, 500, e.what());
            return;
        }
        spdlog::info("session {} created ({}x{}, {})", id, w, h, cfr.label());
        reply(res, 201, json{{"session_id", id}, {"width", w}, {"height", h}, {"cfr", cfr.to_string()}});
    }

    void routes() {
        server.set_payload_max_length(std::size_t{256} << 20);
        if (cfg.static_dir) {
            if (!server.set_mount_point("/", cfg.static_dir->string())) {
                throw Error("static directory " + cfg.static_dir->string() + " does not exist");
            }
        }
        server.set_logger([](const httplib::Request& req, const httplib::Response& res) {
            spdlog::debug("{} {} -> {}", req.method, req.path, res.status);
        });

        server.Post("/api/sessions", [this](const httplib::Request& req, httplib::Response& res) { create(req, res); });

        server.Post(R"(/api/sessions/([^/]+)/clicks)", [this](const httplib::Request& req, httplib::Response& res) {
            with_session(req, res, [&](const std::string&, SessionStore::Entry& e) {
                const json body = json::parse(req.body);
                const Click click{body.at("u").get<int>(), body.at("v").get<int>(),
                                  body.contains("label") ? parse_label(body.at("label")) : 1};
                e.session = interact(e.session, *e.segmenter, click, e.cfr);
                reply(res, 200, mask_payload(e, wants_full(req)));
            });
        });

        server.Post(R"(/api/sessions/([^/]+)/refine)", [this](const httplib::Request& req, httplib::Response& res) {
            with_session(req, res, [&](const std::string&, SessionStore::Entry& e) {
                const json body = req.body.empty() ? json::object() : json::parse(req.body);
                const CfrConfig override_cfg = parse_refine_override(body, e.cfr);
                if (e.session.clicks().empty()) {
                    reply_error(res, 409, "refine needs at least one click");
                    return;
                }
                e.session = refine(e.session, *e.segmenter, override_cfg).session;
                reply(res, 200, mask_payload(e, wants_full(req)));
            });
        });

        server.Post(R"(/api/sessions/([^/]+)/undo)", [this](const httplib::Request& req, httplib::Response& res) {
            with_session(req, res, [&](const std::string&, SessionStore::Entry& e) {
                e.session = undo(e.session, *e.segmenter, e.cfr);
                reply(res, 200, mask_payload(e, wants_full(req)));
            });
        });

        server.Get(R"(/api/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
            with_session(req, res, [&](const std::string& id, SessionStore::Entry& e) {
                reply(res, 200, state_payload(id, e, wants_full(req)));
            });
        });

        server.Delete(R"(/api/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
            const std::string id = req.matches[1];
            if (!store.erase(id)) {
                reply_error(res, 404, "unknown session");
                return;
            }
            res.status = 204;
        });
    }

    int bind() {
        if (cfg.port == 0) {
            const int port = server.bind_to_any_port(cfg.host);
            if (port < 0) {
                throw Error("cannot bind " + cfg.host);
            }
            return port;
        }
        if (!server.bind_to_port(cfg.host, cfg.port)) {
            throw Error("cannot bind " + cfg.host + ":" + std::to_string(cfg.port));
        }
        return cfg.port;
    }
};

Service::Service(SegmenterFactory factory, ServiceConfig cfg)
    : impl_(std::make_unique<Impl>(std::move(factory), std::move(cfg))) {}

Service::~Service() {
    stop();
}

int Service::start() {
    const int port = impl_->bind();
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    spdlog::info("listening on {}:{}", impl_->cfg.host, port);
    return port;
}

void Service::run() {
    const int port = impl_->bind();
    spdlog::info("listening on {}:{}", impl_->cfg.host, port);
    impl_->server.listen_after_bind();
}

void Service::stop() {
    impl_->server.stop();
    if (impl_->thread.joinable()) {
        impl_->thread.join();
    }
}

SessionStore& Service::store() noexcept {
    return impl_->store;
}

void set_log_level(const std::string& level) {
    const auto parsed = spdlog::level::from_str(level);
    if (parsed == spdlog::level::off && level != "off") {
        throw Error("unknown log level '" + level + "'");
    }
    spdlog::set_level(parsed);
}

}  // namespace clickseg
