#include "clickseg/noc.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "clickseg/click_simulator.hpp"
#include "clickseg/image_io.hpp"

namespace clickseg {

namespace {

std::string fmt2(double v) {
    if (!std::isfinite(v)) {
        return "-";
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

int threshold_label(double t) {
    return static_cast<int>(std::lround(t * 100.0));
}

}  // namespace

void EvalConfig::validate() const {
    if (thresholds.empty()) {
        throw Error("at least one IoU threshold is required");
    }
    for (std::size_t i = 0; i < thresholds.size(); ++i) {
        if (!(thresholds[i] > 0.0 && thresholds[i] < 1.0)) {
            throw Error("IoU thresholds must lie in (0, 1)");
        }
        if (i > 0 && thresholds[i] <= thresholds[i - 1]) {
            throw Error("IoU thresholds must be strictly ascending");
        }
    }
    if (max_clicks < 1) {
        throw Error("max clicks must be at least 1");
    }
    if (jobs < 1) {
        throw Error("jobs must be at least 1");
    }
    cfr.validate();
}

double InstanceResult::iou_at(std::size_t clicks) const {
    if (iou_trace.empty() || clicks == 0) {
        return 0.0;
    }
    return iou_trace[std::min(clicks, iou_trace.size()) - 1];
}

InstanceResult evaluate_instance(Segmenter& segmenter, const RasterImage& image, const BinaryMask& gt,
                                 const EvalConfig& cfg, std::string id) {
    cfg.validate();
    if (!gt.same_shape(image)) {
        throw DimensionMismatch("ground truth does not match image");
    }
    if (gt.count() == 0) {
        throw Error("instance '" + id + "' has an empty ground truth");
    }
    const auto start = std::chrono::steady_clock::now();
    InstanceResult result;
    result.id = std::move(id);
    result.noc.assign(cfg.thresholds.size(), cfg.max_clicks);
    result.reached.assign(cfg.thresholds.size(), false);

    try {
        segmenter.begin_instance(gt);
        SegmentationSession session(image);
        BinaryMask pred(image.width(), image.height());
        for (int k = 1; k <= cfg.max_clicks; ++k) {
            const auto click = next_eval_click(gt, pred, session.clicks());
            if (!click) {
                break;
            }
            session = interact(session, segmenter, *click, cfg.cfr);
            pred = binarize(session.current_mask());
            const double score = iou(pred, gt);
            result.iou_trace.push_back(score);
            for (std::size_t j = 0; j < cfg.thresholds.size(); ++j) {
                if (!result.reached[j] && score >= cfg.thresholds[j]) {
                    result.reached[j] = true;
                    result.noc[j] = k;
                }
            }
            if (result.reached.back()) {
                break;
            }
        }
    } catch (const Error& e) {
        result.failed = true;
        result.error = e.what();
    }
    result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

double DatasetReport::mean_iou_at(std::size_t clicks) const {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& r : instances) {
        if (!r.failed) {
            sum += r.iou_at(clicks);
            ++n;
        }
    }
    return n == 0 ? std::numeric_limits<double>::quiet_NaN() : sum / static_cast<double>(n);
}

DatasetReport evaluate_dataset(const SegmenterFactory& factory, std::span<const EvalInstance> instances,
                               const EvalConfig& cfg, std::string dataset_name) {
    cfg.validate();
    if (instances.empty()) {
        throw Error("cannot evaluate an empty dataset");
    }
    DatasetReport report;
    report.dataset = std::move(dataset_name);
    report.inference = cfg.cfr.label();
    report.thresholds = cfg.thresholds;
    report.instances.resize(instances.size());

    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr fatal;
    std::string segmenter_name;

    auto worker = [&](bool record_name) {
        try {
            std::unique_ptr<Segmenter> segmenter;
            for (std::size_t i = next++; i < instances.size(); i = next++) {
                if (!segmenter) {
                    segmenter = factory();
                    if (record_name) {
                        std::lock_guard lock(error_mutex);
                        segmenter_name = segmenter->name();
                    }
                }
                const EvalInstance& inst = instances[i];
                report.instances[i] = evaluate_instance(*segmenter, *inst.image, *inst.ground_truth, cfg, inst.id);
                if (report.instances[i].failed) {
                    segmenter.reset();  // a crashed external child is not reused
                }
            }
        } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!fatal) {
                fatal = std::current_exception();
            }
            next = instances.size();
        }
    };

    const int jobs = std::min<int>(cfg.jobs, static_cast<int>(instances.size()));
    if (jobs <= 1) {
        worker(true);
    } else {
        std::vector<std::jthread> pool;
        for (int j = 0; j < jobs; ++j) {
            pool.emplace_back(worker, j == 0);
        }
    }
    if (fatal) {
        std::rethrow_exception(fatal);
    }
    if (segmenter_name.empty()) {
        segmenter_name = factory()->name();
    }
    report.segmenter = segmenter_name;

    report.mean_noc.assign(cfg.thresholds.size(), 0.0);
    std::size_t ok = 0;
    for (const auto& r : report.instances) {
        if (r.failed) {
            ++report.failures;
            continue;
        }
        ++ok;
        for (std::size_t j = 0; j < cfg.thresholds.size(); ++j) {
            report.mean_noc[j] += r.noc[j];
        }
    }
    for (double& m : report.mean_noc) {
        m = ok == 0 ? std::numeric_limits<double>::quiet_NaN() : m / static_cast<double>(ok);
    }
    return report;
}

std::vector<ReferenceEntry> load_reference_fixtures(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open fixture file " + path.string());
    }
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("fixture file " + path.string() + ": " + e.what());
    }
    std::vector<ReferenceEntry> out;
    for (const auto& e : doc.at("entries")) {
        out.push_back({e.at("dataset").get<std::string>(), e.at("model").get<std::string>(),
                       e.at("mode").get<std::string>(), e.at("noc90").get<double>(), e.at("noc95").get<double>()});
    }
    return out;
}

std::filesystem::path default_fixture_path() {
    return std::filesystem::path(CLICKSEG_DATA_DIR) / "reference_noc.json";
}

RenderedReport render_report(std::span<const DatasetReport> results, std::span<const ReferenceEntry> fixtures) {
    std::vector<double> thresholds;
    for (const auto& r : results) {
        for (double t : r.thresholds) {
            if (std::find(thresholds.begin(), thresholds.end(), t) == thresholds.end()) {
                thresholds.push_back(t);
            }
        }
    }
    if (thresholds.empty() && !fixtures.empty()) {
        thresholds = {0.90, 0.95};
    }
    std::sort(thresholds.begin(), thresholds.end());

    std::vector<std::string> datasets;
    auto add_dataset = [&](const std::string& d) {
        if (std::find(datasets.begin(), datasets.end(), d) == datasets.end()) {
            datasets.push_back(d);
        }
    };
    for (const auto& r : results) {
        add_dataset(r.dataset);
    }
    for (const auto& f : fixtures) {
        add_dataset(f.dataset);
    }

    struct Row {
        std::string model;
        std::string inference;
        std::string source;
        std::map<std::pair<std::string, int>, double> cells;  // (dataset, threshold label) -> NoC
    };
    std::vector<Row> rows;
    auto row_for = [&](const std::string& model, const std::string& inference, const std::string& source) -> Row& {
        for (auto& row : rows) {
            if (row.model == model && row.inference == inference && row.source == source) {
                return row;
            }
        }
        rows.push_back({model, inference, source, {}});
        return rows.back();
    };
    for (const auto& r : results) {
        Row& row = row_for(r.segmenter, r.inference, "measured");
        for (std::size_t j = 0; j < r.thresholds.size(); ++j) {
            row.cells[{r.dataset, threshold_label(r.thresholds[j])}] = r.mean_noc[j];
        }
    }
    for (const auto& f : fixtures) {
        Row& row = row_for(f.model, f.mode, "reference");
        row.cells[{f.dataset, 90}] = f.noc90;
        row.cells[{f.dataset, 95}] = f.noc95;
    }

    std::ostringstream md;
    md << "| Model | Inference | Source |";
    std::string align = "|---|---|---|";
    for (const auto& d : datasets) {
        for (double t : thresholds) {
            md << ' ' << d << " NoC@" << threshold_label(t) << " |";
            align += "---:|";
        }
    }
    md << '\n' << align << '\n';

    std::ostringstream csv;
    csv << "model,inference,source,dataset,threshold,noc\n";
    for (const auto& row : rows) {
        md << "| " << row.model << " | " << row.inference << " | " << row.source << " |";
        for (const auto& d : datasets) {
            for (double t : thresholds) {
                const auto it = row.cells.find({d, threshold_label(t)});
                const std::string cell = it == row.cells.end() ? "-" : fmt2(it->second);
                md << ' ' << cell << " |";
                if (cell != "-") {
                    csv << '"' << row.model << "\"," << row.inference << ',' << row.source << ",\"" << d << "\","
                        << threshold_label(t) << ',' << cell << '\n';
                }
            }
        }
        md << '\n';
    }
    return {md.str(), csv.str()};
}

std::string instances_csv(const DatasetReport& report) {
    std::ostringstream out;
    out << "id,failed";
    for (double t : report.thresholds) {
        out << ",noc" << threshold_label(t);
    }
    for (double t : report.thresholds) {
        out << ",reached" << threshold_label(t);
    }
    out << ",clicks,final_iou\n";
    for (const auto& r : report.instances) {
        out << '"' << r.id << "\"," << (r.failed ? 1 : 0);
        for (int n : r.noc) {
            out << ',' << n;
        }
        for (bool b : r.reached) {
            out << ',' << (b ? 1 : 0);
        }
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.6f", r.iou_trace.empty() ? 0.0 : r.iou_trace.back());
        out << ',' << r.iou_trace.size() << ',' << buf << '\n';
    }
    return out.str();
}

}  // namespace clickseg
