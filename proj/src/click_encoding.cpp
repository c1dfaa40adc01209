#include "clickseg/click_encoding.hpp"

#include <algorithm>

namespace clickseg {

ClickMaps encode_click_maps(const ClickSequence& clicks, int width, int height, int radius) {
    if (radius < 0) {
        throw Error("disk radius must be non-negative");
    }
    clicks.check_bounds(width, height);
    ClickMaps maps{ProbabilityMap::zeros(width, height), ProbabilityMap::zeros(width, height)};
    const int r2 = radius * radius;
    for (const Click& c : clicks) {
        ProbabilityMap& target = c.positive() ? maps.positive : maps.negative;
        const int y0 = std::max(0, c.v - radius);
        const int y1 = std::min(height - 1, c.v + radius);
        const int x0 = std::max(0, c.u - radius);
        const int x1 = std::min(width - 1, c.u + radius);
        for (int y = y0; y <= y1; ++y) {
            const int dy = y - c.v;
            for (int x = x0; x <= x1; ++x) {
                const int dx = x - c.u;
                if (dx * dx + dy * dy <= r2) {
                    target(x, y) = 1.0;
                }
            }
        }
    }
    return maps;
}

ModelInput assemble_model_input(const RasterImage& image, const ClickSequence& clicks,
                                const ProbabilityMap& previous, int radius) {
    if (!image.same_shape(previous)) {
        throw DimensionMismatch("previous mask does not match image dimensions");
    }
    return ModelInput{image, clicks, encode_click_maps(clicks, image.width(), image.height(), radius), previous};
}

}  // namespace clickseg
