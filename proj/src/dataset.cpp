#include "clickseg/dataset.hpp"

#include <algorithm>
#include <map>
#include <regex>

#include "clickseg/image_io.hpp"

namespace fs = std::filesystem;

namespace clickseg {

std::vector<AnnotatedSample> load_dataset(const fs::path& root) {
    const fs::path image_dir = root / "images";
    const fs::path mask_dir = root / "masks";
    if (!fs::is_directory(image_dir) || !fs::is_directory(mask_dir)) {
        throw Error("dataset " + root.string() + " needs images/ and masks/ directories");
    }

    std::map<std::string, fs::path> images;
    for (const auto& entry : fs::directory_iterator(image_dir)) {
        std::string ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
        if (entry.is_regular_file() && (ext == ".png" || ext == ".jpg" || ext == ".jpeg")) {
            images.emplace(entry.path().stem().string(), entry.path());
        }
    }

    static const std::regex instance_re(R"((.+)\.inst(\d+)\.png)");
    std::map<std::string, std::map<int, fs::path>> instance_files;
    std::map<std::string, fs::path> single_files;
    for (const auto& entry : fs::directory_iterator(mask_dir)) {
        if (!entry.is_regular_file()) {
            continue;
        }
        const std::string name = entry.path().filename().string();
        std::smatch m;
        if (std::regex_match(name, m, instance_re)) {
            instance_files[m[1].str()][std::stoi(m[2].str())] = entry.path();
        } else if (entry.path().extension() == ".png") {
            single_files.emplace(entry.path().stem().string(), entry.path());
        }
    }

    std::vector<AnnotatedSample> samples;
    for (const auto& [stem, image_path] : images) {
        std::vector<fs::path> mask_paths;
        if (auto it = instance_files.find(stem); it != instance_files.end()) {
            for (const auto& [n, p] : it->second) {
                mask_paths.push_back(p);
            }
        } else if (auto single = single_files.find(stem); single != single_files.end()) {
            mask_paths.push_back(single->second);
        }
        if (mask_paths.empty()) {
            continue;
        }
        AnnotatedSample s;
        s.id = stem;
        s.image = read_image(image_path);
        for (const auto& p : mask_paths) {
            BinaryMask m = read_mask(p);
            if (!m.same_shape(s.image)) {
                throw DimensionMismatch("mask " + p.string() + " does not match its image");
            }
            s.instances.push_back(std::move(m));
        }
        samples.push_back(std::move(s));
    }
    return samples;
}

void write_dataset(const fs::path& root, std::span<const AnnotatedSample> samples,
                   std::span<const Provenance> provenance) {
    if (!provenance.empty() && provenance.size() != samples.size()) {
        throw Error("provenance count does not match sample count");
    }
    fs::create_directories(root / "images");
    fs::create_directories(root / "masks");
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const AnnotatedSample& s = samples[i];
        write_image(root / "images" / (s.id + ".png"), s.image);
        for (std::size_t k = 0; k < s.instances.size(); ++k) {
            write_mask(root / "masks" / (s.id + ".inst" + std::to_string(k) + ".png"), s.instances[k]);
        }
        if (!provenance.empty()) {
            write_text(root / "provenance" / (s.id + ".json"), provenance[i].to_json().dump(2) + "\n");
        }
    }
}

std::vector<EvalInstance> evaluation_instances(std::span<const AnnotatedSample> samples) {
    std::vector<EvalInstance> out;
    for (const auto& s : samples) {
        for (std::size_t k = 0; k < s.instances.size(); ++k) {
            if (s.instances[k].count() == 0) {
                continue;
            }
            const std::string id = s.instances.size() == 1 ? s.id : s.id + "#" + std::to_string(k);
            out.push_back({id, &s.image, &s.instances[k]});
        }
    }
    return out;
}

std::vector<EvalInstance> selected_instances(std::span<const AnnotatedSample> samples) {
    std::vector<EvalInstance> out;
    for (const auto& s : samples) {
        out.push_back({s.id, &s.image, &s.ground_truth()});
    }
    return out;
}

}  // namespace clickseg
