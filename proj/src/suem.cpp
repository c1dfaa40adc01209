#include "clickseg/suem.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace clickseg {

namespace {

struct Box {
    int x0 = 0;
    int y0 = 0;
    int width = 0;
    int height = 0;
};

Box bounding_box(const BinaryMask& mask) {
    int x0 = mask.width();
    int y0 = mask.height();
    int x1 = -1;
    int y1 = -1;
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            if (mask(x, y)) {
                x0 = std::min(x0, x);
                y0 = std::min(y0, y);
                x1 = std::max(x1, x);
                y1 = std::max(y1, y);
            }
        }
    }
    if (x1 < 0) {
        throw Error("cannot paste an empty object");
    }
    return {x0, y0, x1 - x0 + 1, y1 - y0 + 1};
}

Placement draw_placement(const BinaryMask& object_mask, int target_width, int target_height, Rng& rng,
                         const SuemConfig& cfg) {
    const Box box = bounding_box(object_mask);
    Placement p;
    p.scale = cfg.scale_min == cfg.scale_max ? cfg.scale_min : uniform_real(rng, cfg.scale_min, cfg.scale_max);
    p.patch_width = std::max(1, static_cast<int>(std::lround(box.width * p.scale)));
    p.patch_height = std::max(1, static_cast<int>(std::lround(box.height * p.scale)));
    const int cx = uniform_int(rng, 0, target_width - 1);
    const int cy = uniform_int(rng, 0, target_height - 1);
    p.offset_x = cx - p.patch_width / 2;
    p.offset_y = cy - p.patch_height / 2;
    return p;
}

BinaryMask set_union(const BinaryMask& a, const BinaryMask& b) {
    BinaryMask out(a.width(), a.height());
    for (std::size_t i = 0; i < a.size(); ++i) {
        out[i] = (a[i] || b[i]) ? 1 : 0;
    }
    return out;
}

BinaryMask set_difference(const BinaryMask& a, const BinaryMask& b) {
    BinaryMask out(a.width(), a.height());
    for (std::size_t i = 0; i < a.size(); ++i) {
        out[i] = (a[i] && !b[i]) ? 1 : 0;
    }
    return out;
}

AnnotatedSample single_instance(std::string id, RasterImage image, BinaryMask gt) {
    AnnotatedSample s;
    s.id = std::move(id);
    s.image = std::move(image);
    s.instances.push_back(std::move(gt));
    s.selected = 0;
    return s;
}

AugmentResult unchanged(const AnnotatedSample& source, SuemMode mode) {
    AugmentResult r{single_instance(source.id, source.image, source.ground_truth()), {}};
    r.provenance.mode = mode;
    r.provenance.source_id = source.id;
    r.provenance.fallback = true;
    return r;
}

std::uint8_t clamp_channel(double v) {
    return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

// Geometric part of the standard stack as an inverse map from output pixel to source pixel.
struct InverseMap {
    int source_width = 0;
    int source_height = 0;
    int output_width = 0;
    int output_height = 0;
    bool flip = false;
    double angle = 0.0;  // radians
    double crop_x = 0.0;
    double crop_y = 0.0;
    double crop_width = 0.0;
    double crop_height = 0.0;

    // Returns false when the output pixel maps outside the source.
    bool operator()(int ox, int oy, int& sx, int& sy) const {
        // Output pixel centre -> crop frame (same size as the source).
        double x = crop_x + (ox + 0.5) * crop_width / output_width;
        double y = crop_y + (oy + 0.5) * crop_height / output_height;
        // Undo the rotation about the image centre.
        const double cx = source_width / 2.0;
        const double cy = source_height / 2.0;
        const double c = std::cos(angle);
        const double s = std::sin(angle);
        const double dx = x - cx;
        const double dy = y - cy;
        x = c * dx + s * dy + cx;
        y = -s * dx + c * dy + cy;
        // Undo the horizontal flip.
        if (flip) {
            x = source_width - x;
        }
        sx = static_cast<int>(std::floor(x));
        sy = static_cast<int>(std::floor(y));
        return sx >= 0 && sy >= 0 && sx < source_width && sy < source_height;
    }
};

void apply_geometry(const AnnotatedSample& in, const InverseMap& map, RasterImage& image, BinaryMask& mask) {
    image = RasterImage(map.output_width, map.output_height);
    mask = BinaryMask(map.output_width, map.output_height);
    const BinaryMask& gt = in.ground_truth();
    for (int y = 0; y < map.output_height; ++y) {
        for (int x = 0; x < map.output_width; ++x) {
            int sx = 0;
            int sy = 0;
            if (map(x, y, sx, sy)) {
                image(x, y) = in.image(sx, sy);
                mask(x, y) = gt(sx, sy);
            }
        }
    }
}

}  // namespace

std::string to_string(SuemMode mode) {
    switch (mode) {
        case SuemMode::None: return "none";
        case SuemMode::Simple: return "simple";
        case SuemMode::Union: return "union";
        case SuemMode::Exclusion: return "exclusion";
        case SuemMode::Mixing: return "mixing";
    }
    return "unknown";
}

void AnnotatedSample::validate() const {
    if (instances.empty() || selected >= instances.size()) {
        throw Error("sample '" + id + "': selected instance out of range");
    }
    for (const auto& m : instances) {
        if (!m.same_shape(image)) {
            throw DimensionMismatch("sample '" + id + "': instance mask does not match image");
        }
    }
    if (ground_truth().count() == 0) {
        throw Error("sample '" + id + "': selected instance is empty");
    }
}

void SuemConfig::validate() const {
    const double probs[] = {p_simple, p_union, p_exclusion, p_mixing};
    double sum = 0.0;
    for (double p : probs) {
        if (p < 0.0) {
            throw Error("copy-paste mode probabilities must be non-negative");
        }
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw Error("copy-paste mode probabilities must sum to 1");
    }
    if (apply_probability < 0.0 || apply_probability > 1.0) {
        throw Error("apply probability must lie in [0, 1]");
    }
    if (!(mixing_alpha >= 0.0 && mixing_alpha <= 1.0)) {
        throw Error("mixing alpha must lie in [0, 1]");
    }
    if (!(scale_min > 0.0) || scale_max < scale_min) {
        throw Error("scale range must be positive and ordered");
    }
    if (output_width < 1 || output_height < 1 || max_placement_tries < 1) {
        throw Error("invalid output size or placement tries");
    }
}

nlohmann::json Provenance::to_json() const {
    nlohmann::json j{{"mode", to_string(mode)}, {"source", source_id}, {"fallback", fallback}, {"seed", seed}};
    if (!extra_id.empty()) {
        j["extra"] = extra_id;
    }
    if (placement) {
        j["offset"] = {placement->offset_x, placement->offset_y};
        j["scale"] = placement->scale;
        j["patch_size"] = {placement->patch_width, placement->patch_height};
        j["tries"] = placement->tries;
    }
    if (alpha) {
        j["alpha"] = *alpha;
    }
    if (standard) {
        j["standard"] = {{"flipped", standard->flipped},
                         {"rotation_degrees", standard->rotation_degrees},
                         {"brightness", standard->brightness},
                         {"contrast", standard->contrast},
                         {"crop", {standard->crop_x, standard->crop_y, standard->crop_width, standard->crop_height}},
                         {"fallback", standard->fallback}};
    }
    return j;
}

PasteResult paste_object(const RasterImage& object_image, const BinaryMask& object_mask, const RasterImage& target,
                         const Placement& placement) {
    if (!object_image.same_shape(object_mask)) {
        throw DimensionMismatch("object mask does not match its image");
    }
    const Box box = bounding_box(object_mask);
    PasteResult out{target, BinaryMask(target.width(), target.height())};
    for (int py = 0; py < placement.patch_height; ++py) {
        const int ty = placement.offset_y + py;
        if (ty < 0 || ty >= target.height()) {
            continue;
        }
        const int sy = box.y0 + std::min(box.height - 1, (2 * py + 1) * box.height / (2 * placement.patch_height));
        for (int px = 0; px < placement.patch_width; ++px) {
            const int tx = placement.offset_x + px;
            if (tx < 0 || tx >= target.width()) {
                continue;
            }
            const int sx = box.x0 + std::min(box.width - 1, (2 * px + 1) * box.width / (2 * placement.patch_width));
            if (object_mask(sx, sy)) {
                out.image(tx, ty) = object_image(sx, sy);
                out.pasted(tx, ty) = 1;
            }
        }
    }
    return out;
}

AugmentResult simple_cp(const AnnotatedSample& source, const AnnotatedSample& extra, Rng& rng, const SuemConfig& cfg) {
    const BinaryMask& object = source.ground_truth();
    for (int attempt = 1; attempt <= cfg.max_placement_tries; ++attempt) {
        Placement placement = draw_placement(object, extra.image.width(), extra.image.height(), rng, cfg);
        placement.tries = attempt;
        PasteResult paste = paste_object(source.image, object, extra.image, placement);
        if (paste.pasted.count() == 0) {
            continue;
        }
        AugmentResult r{single_instance(source.id, std::move(paste.image), std::move(paste.pasted)), {}};
        r.provenance.mode = SuemMode::Simple;
        r.provenance.source_id = source.id;
        r.provenance.extra_id = extra.id;
        r.provenance.placement = placement;
        return r;
    }
    return unchanged(source, SuemMode::Simple);
}

AugmentResult union_cp(const AnnotatedSample& source, const AnnotatedSample& extra, Rng& rng, const SuemConfig& cfg) {
    const BinaryMask& object = extra.ground_truth();
    for (int attempt = 1; attempt <= cfg.max_placement_tries; ++attempt) {
        Placement placement = draw_placement(object, source.image.width(), source.image.height(), rng, cfg);
        placement.tries = attempt;
        PasteResult paste = paste_object(extra.image, object, source.image, placement);
        if (paste.pasted.count() == 0) {
            continue;
        }
        AugmentResult r{
            single_instance(source.id, std::move(paste.image), set_union(source.ground_truth(), paste.pasted)), {}};
        r.provenance.mode = SuemMode::Union;
        r.provenance.source_id = source.id;
        r.provenance.extra_id = extra.id;
        r.provenance.placement = placement;
        return r;
    }
    return unchanged(source, SuemMode::Union);
}

AugmentResult exclusion_cp(const AnnotatedSample& source, const AnnotatedSample& extra, Rng& rng,
                           const SuemConfig& cfg) {
    const BinaryMask& object = extra.ground_truth();
    const BinaryMask& gt = source.ground_truth();
    const double floor = cfg.min_residual_fraction * static_cast<double>(gt.count());
    for (int attempt = 1; attempt <= cfg.max_placement_tries; ++attempt) {
        Placement placement = draw_placement(object, source.image.width(), source.image.height(), rng, cfg);
        placement.tries = attempt;
        PasteResult paste = paste_object(extra.image, object, source.image, placement);
        BinaryMask residual = set_difference(gt, paste.pasted);
        const auto kept = residual.count();
        if (kept == 0 || static_cast<double>(kept) < floor) {
            continue;
        }
        AugmentResult r{single_instance(source.id, std::move(paste.image), std::move(residual)), {}};
        r.provenance.mode = SuemMode::Exclusion;
        r.provenance.source_id = source.id;
        r.provenance.extra_id = extra.id;
        r.provenance.placement = placement;
        return r;
    }
    // Recorded under the selected mode; the fallback flag marks the simple-mode output.
    AugmentResult r = simple_cp(source, extra, rng, cfg);
    r.provenance.mode = SuemMode::Exclusion;
    r.provenance.fallback = true;
    return r;
}

AugmentResult image_mixing(const AnnotatedSample& source, const AnnotatedSample& extra, Rng& /*rng*/,
                           const SuemConfig& cfg) {
    const RasterImage other = resize_nearest(extra.image, source.image.width(), source.image.height());
    const double a = cfg.mixing_alpha;
    RasterImage blended(source.image.width(), source.image.height());
    for (std::size_t i = 0; i < blended.size(); ++i) {
        const Rgb& s = source.image[i];
        const Rgb& e = other[i];
        blended[i] = Rgb{clamp_channel(a * s.r + (1.0 - a) * e.r), clamp_channel(a * s.g + (1.0 - a) * e.g),
                         clamp_channel(a * s.b + (1.0 - a) * e.b)};
    }
    AugmentResult r{single_instance(source.id, std::move(blended), source.ground_truth()), {}};
    r.provenance.mode = SuemMode::Mixing;
    r.provenance.source_id = source.id;
    r.provenance.extra_id = extra.id;
    r.provenance.alpha = a;
    return r;
}

AugmentResult standard_augment(const AnnotatedSample& sample, Rng& rng, const SuemConfig& cfg) {
    const StandardAugmentConfig& sc = cfg.standard;
    const int w = sample.image.width();
    const int h = sample.image.height();

    StandardAugmentRecord rec;
    rec.flipped = bernoulli(rng, sc.flip_probability);
    rec.rotation_degrees =
        sc.max_rotation_degrees > 0.0 ? uniform_real(rng, -sc.max_rotation_degrees, sc.max_rotation_degrees) : 0.0;
    rec.brightness = sc.brightness > 0.0 ? uniform_real(rng, 1.0 - sc.brightness, 1.0 + sc.brightness) : 1.0;
    rec.contrast = sc.contrast > 0.0 ? uniform_real(rng, 1.0 - sc.contrast, 1.0 + sc.contrast) : 1.0;
    const double area = sc.min_crop_area < 1.0 ? uniform_real(rng, sc.min_crop_area, 1.0) : 1.0;
    rec.crop_width = std::clamp(static_cast<int>(std::lround(w * std::sqrt(area))), 1, w);
    rec.crop_height = std::clamp(static_cast<int>(std::lround(h * std::sqrt(area))), 1, h);
    rec.crop_x = uniform_int(rng, 0, w - rec.crop_width);
    rec.crop_y = uniform_int(rng, 0, h - rec.crop_height);

    InverseMap map{w,
                   h,
                   cfg.output_width,
                   cfg.output_height,
                   rec.flipped,
                   rec.rotation_degrees * std::numbers::pi / 180.0,
                   double(rec.crop_x),
                   double(rec.crop_y),
                   double(rec.crop_width),
                   double(rec.crop_height)};
    RasterImage image;
    BinaryMask mask;
    apply_geometry(sample, map, image, mask);
    if (mask.count() == 0) {
        // Jitter pushed the object out of frame; keep the full view instead.
        rec = StandardAugmentRecord{};
        rec.fallback = true;
        rec.crop_width = w;
        rec.crop_height = h;
        map = InverseMap{w, h, cfg.output_width, cfg.output_height, false, 0.0, 0.0, 0.0, double(w), double(h)};
        apply_geometry(sample, map, image, mask);
    }

    double mean = 0.0;
    for (const Rgb& p : image.values()) {
        mean += double(p.r) + p.g + p.b;
    }
    mean /= 3.0 * static_cast<double>(image.size());
    if (rec.brightness != 1.0 || rec.contrast != 1.0) {
        auto adjust = [&](std::uint8_t v) { return clamp_channel((v - mean) * rec.contrast + mean * rec.brightness); };
        for (Rgb& p : image.values()) {
            p = Rgb{adjust(p.r), adjust(p.g), adjust(p.b)};
        }
    }

    AugmentResult r{single_instance(sample.id, std::move(image), std::move(mask)), {}};
    r.provenance.source_id = sample.id;
    r.provenance.standard = rec;
    return r;
}

ExtraSampler pool_sampler(std::span<const AnnotatedSample> pool, std::size_t source_index) {
    if (pool.empty()) {
        throw Error("extra-sample pool is empty");
    }
    return [pool, source_index](Rng& rng) -> const AnnotatedSample& {
        if (pool.size() == 1) {
            return pool[0];
        }
        std::size_t idx = uniform_int<std::size_t>(rng, 0, pool.size() - 2);
        if (idx >= source_index) {
            ++idx;
        }
        return pool[idx];
    };
}

AugmentResult augment_sample(const AnnotatedSample& source, const ExtraSampler& extras, Rng& rng,
                             const SuemConfig& cfg) {
    cfg.validate();
    Provenance prov;
    prov.source_id = source.id;
    AnnotatedSample pasted = source;
    if (bernoulli(rng, cfg.apply_probability)) {
        const double u = uniform_real(rng, 0.0, 1.0);
        const AnnotatedSample& extra = extras(rng);
        AugmentResult r;
        if (u < cfg.p_simple) {
            r = simple_cp(source, extra, rng, cfg);
        } else if (u < cfg.p_simple + cfg.p_union) {
            r = union_cp(source, extra, rng, cfg);
        } else if (u < cfg.p_simple + cfg.p_union + cfg.p_exclusion) {
            r = exclusion_cp(source, extra, rng, cfg);
        } else {
            r = image_mixing(source, extra, rng, cfg);
        }
        pasted = std::move(r.sample);
        prov = std::move(r.provenance);
    }
    AugmentResult out = standard_augment(pasted, rng, cfg);
    prov.standard = out.provenance.standard;
    prov.seed = cfg.seed;
    out.provenance = std::move(prov);
    return out;
}

RasterImage resize_nearest(const RasterImage& image, int width, int height) {
    RasterImage out(width, height);
    for (int y = 0; y < height; ++y) {
        const int sy = std::min(image.height() - 1, static_cast<int>((2LL * y + 1) * image.height() / (2LL * height)));
        for (int x = 0; x < width; ++x) {
            const int sx = std::min(image.width() - 1, static_cast<int>((2LL * x + 1) * image.width() / (2LL * width)));
            out(x, y) = image(sx, sy);
        }
    }
    return out;
}

BinaryMask resize_nearest(const BinaryMask& mask, int width, int height) {
    BinaryMask out(width, height);
    for (int y = 0; y < height; ++y) {
        const int sy = std::min(mask.height() - 1, static_cast<int>((2LL * y + 1) * mask.height() / (2LL * height)));
        for (int x = 0; x < width; ++x) {
            const int sx = std::min(mask.width() - 1, static_cast<int>((2LL * x + 1) * mask.width() / (2LL * width)));
            out(x, y) = mask(sx, sy);
        }
    }
    return out;
}

}  // namespace clickseg
