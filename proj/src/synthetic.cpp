#include "clickseg/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "clickseg/random.hpp"

namespace clickseg {

namespace {

using Color = std::array<double, 3>;

Color random_color(Rng& rng) {
    return {uniform_real(rng, 0, 255), uniform_real(rng, 0, 255), uniform_real(rng, 0, 255)};
}

double color_distance(const Color& a, const Color& b) {
    return std::sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) + (a[2] - b[2]) * (a[2] - b[2]));
}

std::uint8_t to_channel(double v) {
    return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

struct Shape {
    bool ellipse = true;
    double cx = 0;
    double cy = 0;
    double rx = 0;
    double ry = 0;
    double angle = 0;

    bool contains(double x, double y) const {
        const double c = std::cos(angle);
        const double s = std::sin(angle);
        const double dx = x - cx;
        const double dy = y - cy;
        const double u = c * dx + s * dy;
        const double v = -s * dx + c * dy;
        if (ellipse) {
            return (u * u) / (rx * rx) + (v * v) / (ry * ry) <= 1.0;
        }
        return std::abs(u) <= rx && std::abs(v) <= ry;
    }
};

AnnotatedSample make_sample(int index, const SyntheticConfig& cfg, Rng& rng) {
    const int w = cfg.width;
    const int h = cfg.height;
    const double min_dim = std::min(w, h);

    // Background: base colour, a sinusoidal stripe pattern and per-pixel noise.
    const Color bg = random_color(rng);
    const double freq = uniform_real(rng, 0.1, 0.6);
    const double theta = uniform_real(rng, 0.0, std::numbers::pi);
    const double stripe_amp = uniform_real(rng, 10.0, 35.0);
    std::vector<Color> canvas(static_cast<std::size_t>(w) * h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double stripe = stripe_amp * std::sin(freq * (x * std::cos(theta) + y * std::sin(theta)));
            const double noise = uniform_real(rng, -20.0, 20.0);
            canvas[static_cast<std::size_t>(y) * w + x] = {bg[0] + stripe + noise, bg[1] + stripe + noise,
                                                          bg[2] + stripe + noise};
        }
    }

    const int objects = uniform_int(rng, cfg.min_objects, cfg.max_objects);
    std::vector<BinaryMask> masks;
    // Paint back to front: the selected object (instance 0) is painted last so it stays mostly visible.
    std::vector<Shape> shapes(static_cast<std::size_t>(objects));
    std::vector<Color> colors(static_cast<std::size_t>(objects));
    for (int k = 0; k < objects; ++k) {
        Shape& s = shapes[static_cast<std::size_t>(k)];
        s.ellipse = bernoulli(rng, 0.5);
        s.rx = uniform_real(rng, 0.10, 0.28) * min_dim;
        s.ry = uniform_real(rng, 0.10, 0.28) * min_dim;
        s.cx = uniform_real(rng, 0.2, 0.8) * w;
        s.cy = uniform_real(rng, 0.2, 0.8) * h;
        s.angle = uniform_real(rng, 0.0, std::numbers::pi);
        Color c = random_color(rng);
        for (int tries = 0; tries < 20 && color_distance(c, bg) < 90.0; ++tries) {
            c = random_color(rng);
        }
        colors[static_cast<std::size_t>(k)] = c;
    }

    masks.assign(static_cast<std::size_t>(objects), BinaryMask(w, h));
    for (int k = objects - 1; k >= 0; --k) {
        const Shape& s = shapes[static_cast<std::size_t>(k)];
        const Color& c = colors[static_cast<std::size_t>(k)];
        const double noise_amp = uniform_real(rng, 5.0, 20.0);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                if (!s.contains(x + 0.5, y + 0.5)) {
                    continue;
                }
                const std::size_t i = static_cast<std::size_t>(y) * w + x;
                const double noise = uniform_real(rng, -noise_amp, noise_amp);
                canvas[i] = {c[0] + noise, c[1] + noise, c[2] + noise};
                for (auto& m : masks) {
                    m[i] = 0;
                }
                masks[static_cast<std::size_t>(k)][i] = 1;
            }
        }
    }

    AnnotatedSample sample;
    sample.id = "synth_" + std::to_string(index);
    sample.image = RasterImage(w, h);
    for (std::size_t i = 0; i < canvas.size(); ++i) {
        sample.image[i] = Rgb{to_channel(canvas[i][0]), to_channel(canvas[i][1]), to_channel(canvas[i][2])};
    }
    for (auto& m : masks) {
        if (m.count() > 0) {
            sample.instances.push_back(std::move(m));
        }
    }
    sample.selected = 0;
    return sample;
}

}  // namespace

std::vector<AnnotatedSample> generate_synthetic_dataset(const SyntheticConfig& cfg) {
    if (cfg.count < 0 || cfg.width < 8 || cfg.height < 8 || cfg.min_objects < 1 || cfg.max_objects < cfg.min_objects) {
        throw Error("invalid synthetic dataset configuration");
    }
    std::vector<AnnotatedSample> out;
    out.reserve(static_cast<std::size_t>(cfg.count));
    const double min_area = 0.05 * cfg.width * cfg.height;
    for (int i = 0; i < cfg.count; ++i) {
        Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(i)));
        AnnotatedSample s = make_sample(i, cfg, rng);
        while (s.instances.empty() || static_cast<double>(s.instances[0].count()) < min_area) {
            s = make_sample(i, cfg, rng);
        }
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace clickseg
