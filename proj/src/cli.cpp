#include "clickseg/cli.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <opencv2/core/version.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "clickseg/cfr.hpp"
#include "clickseg/dataset.hpp"
#include "clickseg/external_segmenter.hpp"
#include "clickseg/icl.hpp"
#include "clickseg/image_io.hpp"
#include "clickseg/noc.hpp"
#include "clickseg/service.hpp"
#include "clickseg/suem.hpp"
#include "clickseg/synthetic.hpp"
#include "clickseg/toy_model.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace clickseg {

namespace {

constexpr const char* kVersion = "1.0.0";

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\n");
    if (b == std::string::npos) {
        return {};
    }
    return s.substr(b, s.find_last_not_of(" \t\n") - b + 1);
}

int parse_int(const std::string& s, const std::string& what) {
    std::size_t used = 0;
    int value = 0;
    try {
        value = std::stoi(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != s.size()) {
        throw Error("bad " + what + " '" + s + "'");
    }
    return value;
}

std::vector<double> parse_doubles(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stod(trim(item)));
        } catch (const std::exception&) {
            throw Error("bad number '" + item + "'");
        }
    }
    return out;
}

json versions() {
    return {{"clickseg", kVersion},
            {"opencv", CV_VERSION},
            {"spdlog", std::to_string(SPDLOG_VER_MAJOR) + "." + std::to_string(SPDLOG_VER_MINOR) + "." +
                           std::to_string(SPDLOG_VER_PATCH)},
            {"cli11", CLI11_VERSION}};
}

struct Globals {
    std::uint64_t seed = 0;
    int jobs = 1;
    std::string log_level = "info";
    std::vector<std::string> argv;
};

void write_manifest(const fs::path& path, const std::string& command, const Globals& g, const json& config) {
    json doc{{"command", command},
             {"argv", g.argv},
             {"seed", g.seed},
             {"jobs", g.jobs},
             {"config", config},
             {"versions", versions()}};
    write_text(path, doc.dump(2) + "\n");
}

json to_json(const CfrConfig& c) {
    return {{"mode", c.mode == CfrMode::Fixed ? "fixed" : "adaptive"},
            {"n", c.n},
            {"pixel_threshold", c.pixel_threshold},
            {"radius", c.radius},
            {"label", c.label()}};
}

json to_json(const SuemConfig& c) {
    return {{"p_simple", c.p_simple},
            {"p_union", c.p_union},
            {"p_exclusion", c.p_exclusion},
            {"p_mixing", c.p_mixing},
            {"apply_probability", c.apply_probability},
            {"scale_min", c.scale_min},
            {"scale_max", c.scale_max},
            {"mixing_alpha", c.mixing_alpha},
            {"min_residual_fraction", c.min_residual_fraction},
            {"max_placement_tries", c.max_placement_tries},
            {"output_width", c.output_width},
            {"output_height", c.output_height},
            {"standard",
             {{"flip_probability", c.standard.flip_probability},
              {"max_rotation_degrees", c.standard.max_rotation_degrees},
              {"brightness", c.standard.brightness},
              {"contrast", c.standard.contrast},
              {"min_crop_area", c.standard.min_crop_area}}}};
}

json to_json(const ToyModelParams& p) {
    return {{"weights", p.weights}, {"sigma", p.sigma}};
}

fs::path default_toy_params() {
    return fs::path(CLICKSEG_DATA_DIR) / "toy_pretrained.cstm";
}

// ---- subcommands -------------------------------------------------------------------------------------

struct SynthArgs {
    fs::path out;
    SyntheticConfig cfg;
};

int run_synth(const SynthArgs& a, const Globals& g) {
    SyntheticConfig cfg = a.cfg;
    cfg.seed = g.seed;
    const auto samples = generate_synthetic_dataset(cfg);
    write_dataset(a.out, samples);
    write_manifest(a.out / "manifest.json", "synth", g,
                   {{"count", cfg.count},
                    {"width", cfg.width},
                    {"height", cfg.height},
                    {"min_objects", cfg.min_objects},
                    {"max_objects", cfg.max_objects}});
    spdlog::info("wrote {} samples to {}", samples.size(), a.out.string());
    return 0;
}

struct AugmentArgs {
    fs::path data;
    fs::path out;
    int copies = 1;
    int size = 448;
    SuemConfig cfg;
};

int run_augment(AugmentArgs a, const Globals& g) {
    a.cfg.output_width = a.size;
    a.cfg.output_height = a.size;
    a.cfg.validate();
    if (a.copies < 1) {
        throw Error("--copies must be at least 1");
    }
    const auto dataset = load_dataset(a.data);
    if (dataset.empty()) {
        throw Error("dataset " + a.data.string() + " is empty");
    }
    const std::size_t total = dataset.size() * static_cast<std::size_t>(a.copies);
    std::vector<AnnotatedSample> out(total);
    std::vector<Provenance> prov(total);
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        try {
            for (std::size_t k = next++; k < total; k = next++) {
                const std::size_t i = k / static_cast<std::size_t>(a.copies);
                const std::size_t c = k % static_cast<std::size_t>(a.copies);
                SuemConfig cfg = a.cfg;
                cfg.seed = derive_seed(g.seed, i, c);
                Rng rng(cfg.seed);
                AugmentResult r = augment_sample(dataset[i], pool_sampler(dataset, i), rng, cfg);
                r.sample.id = dataset[i].id + "_aug" + std::to_string(c);
                out[k] = std::move(r.sample);
                prov[k] = std::move(r.provenance);
            }
        } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) {
                error = std::current_exception();
            }
            next = total;
        }
    };
    {
        std::vector<std::jthread> pool;
        for (int j = 1; j < g.jobs; ++j) {
            pool.emplace_back(worker);
        }
        worker();
    }
    if (error) {
        std::rethrow_exception(error);
    }
    write_dataset(a.out, out, prov);
    write_manifest(a.out / "manifest.json", "augment", g,
                   {{"data", fs::absolute(a.data).string()}, {"copies", a.copies}, {"suem", to_json(a.cfg)}});
    spdlog::info("wrote {} augmented samples to {}", total, a.out.string());
    return 0;
}

struct TrainArgs {
    fs::path data;
    fs::path holdout;
    fs::path out;
    fs::path init;
    std::string betas = "1,2,3";
    bool augment = false;
    IclConfig cfg;
};

int run_train(TrainArgs a, const Globals& g) {
    a.cfg.seed = g.seed;
    a.cfg.jobs = g.jobs;
    a.cfg.simulator.seed = g.seed;
    a.cfg.betas = parse_doubles(a.betas);
    a.cfg.validate();
    const auto train_set = load_dataset(a.data);
    std::vector<AnnotatedSample> holdout;
    if (!a.holdout.empty()) {
        holdout = load_dataset(a.holdout);
    }
    ToyModelParams initial;
    if (!a.init.empty()) {
        initial = load_params_file(a.init);
    }
    TrainOptions options;
    options.holdout = holdout;
    if (a.augment) {
        SuemConfig suem;
        suem.output_width = train_set.empty() ? 64 : train_set.front().image.width();
        suem.output_height = train_set.empty() ? 64 : train_set.front().image.height();
        options.augmentation = suem;
    }
    const TrainResult result = train(initial, train_set, a.cfg, options);
    save_params_file(a.out / "params.cstm", result.params);
    write_text(a.out / "metrics.csv", metrics_csv(result.epochs));
    write_manifest(a.out / "manifest.json", "train-toy", g,
                   {{"data", fs::absolute(a.data).string()},
                    {"holdout", a.holdout.empty() ? "" : fs::absolute(a.holdout).string()},
                    {"init", a.init.empty() ? "" : fs::absolute(a.init).string()},
                    {"clicks", a.cfg.clicks},
                    {"betas", a.cfg.betas},
                    {"include_initial_loss", a.cfg.include_initial_loss},
                    {"learning_rate", a.cfg.learning_rate},
                    {"epochs", a.cfg.epochs},
                    {"batch_size", a.cfg.batch_size},
                    {"nfl_alpha", a.cfg.nfl_alpha},
                    {"nfl_gamma", a.cfg.nfl_gamma},
                    {"augment", a.augment},
                    {"final_params", to_json(result.params)},
                    {"adam_skipped", result.adam.skipped},
                    {"degenerate_samples", result.degenerate_samples}});
    return 0;
}

struct EvalArgs {
    fs::path data;
    fs::path out;
    std::string name;
    std::string segmenter = "toy";
    std::vector<std::string> cfr{"fixed:0"};
    int max_clicks = kDefaultMaxClicks;
    std::string thresholds = "0.90,0.95";
    bool selected_only = false;
    bool reference = false;
    fs::path reference_file;
};

int run_eval(const EvalArgs& a, const Globals& g) {
    const auto dataset = load_dataset(a.data);
    const auto instances = a.selected_only ? selected_instances(dataset) : evaluation_instances(dataset);
    const std::string name = a.name.empty() ? fs::absolute(a.data).lexically_normal().filename().string() : a.name;
    const SegmenterFactory factory = segmenter_factory(a.segmenter);

    std::vector<DatasetReport> reports;
    json modes = json::array();
    for (const auto& text : a.cfr) {
        EvalConfig cfg;
        cfg.cfr = CfrConfig::parse(text);
        cfg.max_clicks = a.max_clicks;
        cfg.thresholds = parse_doubles(a.thresholds);
        cfg.jobs = g.jobs;
        DatasetReport report = evaluate_dataset(factory, instances, cfg, name);
        if (report.failures > 0) {
            spdlog::warn("{}: {} of {} instances failed", report.inference, report.failures,
                         report.instances.size());
        }
        write_text(a.out / ("instances_" + cfg.cfr.label() + ".csv"), instances_csv(report));
        modes.push_back(to_json(cfg.cfr));
        reports.push_back(std::move(report));
    }
    std::vector<ReferenceEntry> fixtures;
    if (!a.reference_file.empty()) {
        fixtures = load_reference_fixtures(a.reference_file);
    } else if (a.reference) {
        fixtures = load_reference_fixtures(default_fixture_path());
    }
    const RenderedReport rendered = render_report(reports, fixtures);
    write_text(a.out / "report.md", rendered.markdown);
    write_text(a.out / "report.csv", rendered.csv);
    std::cout << rendered.markdown;
    write_manifest(a.out / "manifest.json", "eval", g,
                   {{"data", fs::absolute(a.data).string()},
                    {"name", name},
                    {"segmenter", a.segmenter},
                    {"cfr", modes},
                    {"max_clicks", a.max_clicks},
                    {"thresholds", parse_doubles(a.thresholds)},
                    {"selected_only", a.selected_only},
                    {"instances", instances.size()}});
    return 0;
}

struct SegmentArgs {
    fs::path image;
    std::string clicks;
    fs::path out;
    fs::path prob_out;
    std::string segmenter = "toy";
    std::string cfr = "fixed:0";
};

int run_segment(const SegmentArgs& a, const Globals& g) {
    const RasterImage image = read_image(a.image);
    const ClickSequence clicks = parse_clicks(a.clicks);
    if (clicks.empty()) {
        throw Error("at least one click is required");
    }
    const CfrConfig cfr = CfrConfig::parse(a.cfr);
    const auto segmenter = segmenter_factory(a.segmenter)();
    SegmentationSession session(image);
    for (const Click& c : clicks) {
        session = interact(session, *segmenter, c, cfr);
    }
    write_mask(a.out, binarize(session.current_mask()));
    if (!a.prob_out.empty()) {
        write_file(a.prob_out, encode_cspm(session.current_mask()));
    }
    fs::path manifest = a.out;
    manifest += ".manifest.json";
    write_manifest(manifest, "segment", g,
                   {{"image", fs::absolute(a.image).string()},
                    {"clicks", a.clicks},
                    {"segmenter", a.segmenter},
                    {"cfr", to_json(cfr)}});
    return 0;
}

struct ServeArgs {
    ServiceConfig cfg;
    std::string model;
    std::string segmenter;
    std::string cfr = "fixed:0";
    fs::path static_dir;
    int ttl_minutes = 30;
};

int run_serve(ServeArgs a, const Globals&) {
    std::string selector = a.segmenter;
    if (selector.empty()) {
        selector = a.model.empty() ? "toy" : "toy:" + a.model;
    }
    a.cfg.default_cfr = CfrConfig::parse(a.cfr);
    a.cfg.idle_ttl = std::chrono::minutes(a.ttl_minutes);
    if (!a.static_dir.empty()) {
        a.cfg.static_dir = a.static_dir;
    }
    Service service(segmenter_factory(selector), a.cfg);
    service.run();
    return 0;
}

}  // namespace

ClickSequence parse_clicks(const std::string& text) {
    ClickSequence out;
    std::stringstream ss(text);
    std::string entry;
    while (std::getline(ss, entry, ';')) {
        entry = trim(entry);
        if (entry.empty()) {
            continue;
        }
        std::stringstream fields(entry);
        std::vector<std::string> parts;
        std::string part;
        while (std::getline(fields, part, ',')) {
            parts.push_back(trim(part));
        }
        if (parts.size() != 3) {
            throw Error("click '" + entry + "' must be u,v,label");
        }
        out.push_back(Click{parse_int(parts[0], "click u"), parse_int(parts[1], "click v"),
                            parse_int(parts[2], "click label")});
    }
    return out;
}

SegmenterFactory segmenter_factory(const std::string& selector) {
    if (selector == "oracle") {
        return [] { return std::make_unique<OracleSegmenter>(); };
    }
    if (selector == "empty") {
        return [] { return std::make_unique<EmptySegmenter>(); };
    }
    if (selector == "toy" || selector.starts_with("toy:")) {
        const fs::path file = selector == "toy" ? default_toy_params() : fs::path(selector.substr(4));
        const ToyModelParams params = load_params_file(file);
        return [params] { return std::make_unique<ToySegmenter>(params); };
    }
    if (selector.starts_with("external:")) {
        const std::string command = selector.substr(9);
        if (command.empty()) {
            throw Error("external segmenter needs a command");
        }
        return [command] { return std::make_unique<ExternalSegmenter>(command); };
    }
    throw Error("unknown segmenter '" + selector + "' (toy[:file], external:<cmd>, oracle, empty)");
}

int dispatch(int argc, const char* const* argv) {
    Globals g;
    g.argv.assign(argv, argv + argc);

    CLI::App app{"Click-based interactive segmentation toolkit", "clickseg"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);
    app.add_option("--seed", g.seed, "Base random seed")->capture_default_str();
    app.add_option("--jobs", g.jobs, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
    app.add_option("--log-level", g.log_level, "trace, debug, info, warn, error, critical or off")
        ->capture_default_str();

    SynthArgs synth;
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic shapes dataset");
    synth_cmd->add_option("--out", synth.out, "Output dataset directory")->required();
    synth_cmd->add_option("--count", synth.cfg.count)->capture_default_str();
    synth_cmd->add_option("--width", synth.cfg.width)->capture_default_str();
    synth_cmd->add_option("--height", synth.cfg.height)->capture_default_str();
    synth_cmd->add_option("--max-objects", synth.cfg.max_objects)->capture_default_str();

    AugmentArgs augment;
    auto* augment_cmd = app.add_subcommand("augment", "Copy-paste and standard augmentation over a dataset");
    augment_cmd->add_option("--data", augment.data, "Input dataset directory")->required()->check(CLI::ExistingDirectory);
    augment_cmd->add_option("--out", augment.out, "Output dataset directory")->required();
    augment_cmd->add_option("--copies", augment.copies, "Augmented copies per sample")->capture_default_str();
    augment_cmd->add_option("--size", augment.size, "Output side length")->capture_default_str();
    augment_cmd->add_option("--apply-probability", augment.cfg.apply_probability)->capture_default_str();
    augment_cmd->add_option("--p-simple", augment.cfg.p_simple)->capture_default_str();
    augment_cmd->add_option("--p-union", augment.cfg.p_union)->capture_default_str();
    augment_cmd->add_option("--p-exclusion", augment.cfg.p_exclusion)->capture_default_str();
    augment_cmd->add_option("--p-mixing", augment.cfg.p_mixing)->capture_default_str();

    TrainArgs train_args;
    auto* train_cmd = app.add_subcommand("train-toy", "Train the toy segmenter with the iterative click loss");
    train_cmd->add_option("--data", train_args.data, "Training dataset directory")->required()->check(CLI::ExistingDirectory);
    train_cmd->add_option("--holdout", train_args.holdout, "Holdout dataset for per-epoch NoC")->check(CLI::ExistingDirectory);
    train_cmd->add_option("--out", train_args.out, "Output directory")->required();
    train_cmd->add_option("--init", train_args.init, "Initial parameter file (default: all-zero weights)")->check(CLI::ExistingFile);
    train_cmd->add_option("--epochs", train_args.cfg.epochs)->capture_default_str();
    train_cmd->add_option("--batch-size", train_args.cfg.batch_size)->capture_default_str();
    train_cmd->add_option("--lr", train_args.cfg.learning_rate)->capture_default_str();
    train_cmd->add_option("--clicks", train_args.cfg.clicks, "Corrective clicks per rollout")->capture_default_str();
    train_cmd->add_option("--betas", train_args.betas, "Per-click loss weights")->capture_default_str();
    train_cmd->add_flag("--initial-loss", train_args.cfg.include_initial_loss, "Also weight the random-click prediction");
    train_cmd->add_option("--eval-every", train_args.cfg.eval_every)->capture_default_str();
    train_cmd->add_flag("--augment", train_args.augment, "Apply copy-paste augmentation on the fly");

    EvalArgs eval;
    auto* eval_cmd = app.add_subcommand("eval", "NoC benchmark over a dataset");
    eval_cmd->add_option("--data", eval.data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
    eval_cmd->add_option("--out", eval.out, "Output directory")->required();
    eval_cmd->add_option("--name", eval.name, "Dataset name in the report (default: directory name)");
    eval_cmd->add_option("--segmenter", eval.segmenter, "toy[:file], external:<cmd>, oracle or empty")->capture_default_str();
    eval_cmd->add_option("--cfr", eval.cfr, "fixed:N or adaptive:N[:T], repeatable")->capture_default_str();
    eval_cmd->add_option("--max-clicks", eval.max_clicks)->capture_default_str();
    eval_cmd->add_option("--thresholds", eval.thresholds)->capture_default_str();
    eval_cmd->add_flag("--selected-only", eval.selected_only, "Evaluate only each image's first instance");
    eval_cmd->add_flag("--reference", eval.reference, "Add the shipped reference rows to the report");
    eval_cmd->add_option("--reference-file", eval.reference_file, "Reference fixture JSON")->check(CLI::ExistingFile);

    SegmentArgs segment;
    auto* segment_cmd = app.add_subcommand("segment", "Segment one image from a click list");
    segment_cmd->add_option("--image", segment.image)->required()->check(CLI::ExistingFile);
    segment_cmd->add_option("--clicks", segment.clicks, "u,v,label;u,v,label;...")->required();
    segment_cmd->add_option("--out", segment.out, "Output mask PNG")->required();
    segment_cmd->add_option("--prob-out", segment.prob_out, "Also write the probability map (CSPM)");
    segment_cmd->add_option("--segmenter", segment.segmenter)->capture_default_str();
    segment_cmd->add_option("--cfr", segment.cfr)->capture_default_str();

    ServeArgs serve;
    auto* serve_cmd = app.add_subcommand("serve", "Run the session HTTP service");
    serve_cmd->add_option("--port", serve.cfg.port)->capture_default_str();
    serve_cmd->add_option("--host", serve.cfg.host)->capture_default_str();
    serve_cmd->add_option("--model", serve.model, "Toy parameter file")->check(CLI::ExistingFile);
    serve_cmd->add_option("--segmenter", serve.segmenter, "Overrides --model");
    serve_cmd->add_option("--cfr", serve.cfr, "Default refinement for new sessions")->capture_default_str();
    serve_cmd->add_option("--static", serve.static_dir, "UI build directory")->check(CLI::ExistingDirectory);
    serve_cmd->add_option("--max-dimension", serve.cfg.max_dimension)->capture_default_str();
    serve_cmd->add_option("--ttl-minutes", serve.ttl_minutes)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    }

    try {
        std::string level = g.log_level;
        if (const char* env = std::getenv("CLICKSEG_LOG"); env != nullptr && app.count("--log-level") == 0) {
            level = env;
        }
        set_log_level(level);
        if (!spdlog::get("clickseg")) {
            spdlog::set_default_logger(spdlog::stderr_color_mt("clickseg"));
        }

        if (*synth_cmd) {
            return run_synth(synth, g);
        }
        if (*augment_cmd) {
            return run_augment(augment, g);
        }
        if (*train_cmd) {
            return run_train(train_args, g);
        }
        if (*eval_cmd) {
            return run_eval(eval, g);
        }
        if (*segment_cmd) {
            return run_segment(segment, g);
        }
        if (*serve_cmd) {
            return run_serve(serve, g);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}

}  // namespace clickseg
