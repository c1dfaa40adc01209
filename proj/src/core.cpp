#include "clickseg/core.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>

namespace clickseg {

namespace {

void require_same_shape(const BinaryMask& a, const BinaryMask& b, const char* what) {
    if (!a.same_shape(b)) {
        throw DimensionMismatch(std::string(what) + ": " + std::to_string(a.width()) + "x" +
                                std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" +
                                std::to_string(b.height()));
    }
}

// Felzenszwalb-Huttenlocher lower envelope of parabolas over one line of squared distances.
void squared_edt_1d(std::span<const double> f, std::span<double> d, std::vector<int>& vertex,
                    std::vector<double>& boundary) {
    const int n = static_cast<int>(f.size());
    constexpr double inf = std::numeric_limits<double>::infinity();
    vertex.assign(static_cast<std::size_t>(n), 0);
    boundary.assign(static_cast<std::size_t>(n) + 1, 0.0);

    int k = -1;
    for (int q = 0; q < n; ++q) {
        if (f[q] == inf) {
            continue;
        }
        while (k >= 0) {
            const int p = vertex[k];
            const double s = ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * (q - p));
            if (s <= boundary[k]) {
                --k;
            } else {
                break;
            }
        }
        ++k;
        vertex[k] = q;
        boundary[k] = (k == 0) ? -inf : ((f[q] + double(q) * q) - (f[vertex[k - 1]] + double(vertex[k - 1]) * vertex[k - 1])) /
                                            (2.0 * (q - vertex[k - 1]));
        boundary[k + 1] = inf;
    }
    if (k < 0) {
        std::fill(d.begin(), d.end(), inf);
        return;
    }
    int j = 0;
    for (int q = 0; q < n; ++q) {
        while (boundary[j + 1] < q) {
            ++j;
        }
        const double dq = q - vertex[j];
        d[q] = dq * dq + f[vertex[j]];
    }
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

}  // namespace

std::size_t BinaryMask::count() const noexcept {
    return static_cast<std::size_t>(std::count_if(values().begin(), values().end(), [](auto b) { return b != 0; }));
}

BinaryMask BinaryMask::complement() const {
    BinaryMask out(width(), height());
    for (std::size_t i = 0; i < size(); ++i) {
        out[i] = (*this)[i] ? 0 : 1;
    }
    return out;
}

void ProbabilityMap::validate() const {
    for (double v : values()) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw Error("probability map value outside [0, 1]: " + std::to_string(v));
        }
    }
}

ClickSequence::ClickSequence(std::vector<Click> clicks) {
    for (const auto& c : clicks) {
        push_back(c);
    }
}

void ClickSequence::push_back(const Click& click) {
    if (click.label != 0 && click.label != 1) {
        throw Error("click label must be 0 or 1");
    }
    if (contains_position(click.u, click.v)) {
        throw Error("duplicate click at (" + std::to_string(click.u) + ", " + std::to_string(click.v) + ")");
    }
    clicks_.push_back(click);
}

void ClickSequence::pop_back() {
    if (clicks_.empty()) {
        throw StateError("pop_back on empty click sequence");
    }
    clicks_.pop_back();
}

bool ClickSequence::contains_position(int u, int v) const noexcept {
    return std::any_of(clicks_.begin(), clicks_.end(), [&](const Click& c) { return c.u == u && c.v == v; });
}

void check_click_bounds(const Click& click, int width, int height) {
    if (click.u < 0 || click.v < 0 || click.u >= width || click.v >= height) {
        throw OutOfBounds("click (" + std::to_string(click.u) + ", " + std::to_string(click.v) + ") outside " +
                          std::to_string(width) + "x" + std::to_string(height));
    }
}

void ClickSequence::check_bounds(int width, int height) const {
    for (const auto& c : clicks_) {
        check_click_bounds(c, width, height);
    }
}

double iou(const BinaryMask& a, const BinaryMask& b) {
    require_same_shape(a, b, "iou");
    std::size_t inter = 0;
    std::size_t uni = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const bool x = a[i] != 0;
        const bool y = b[i] != 0;
        inter += (x && y) ? 1 : 0;
        uni += (x || y) ? 1 : 0;
    }
    if (uni == 0) {
        return 1.0;
    }
    return static_cast<double>(inter) / static_cast<double>(uni);
}

BinaryMask binarize(const ProbabilityMap& p, double threshold) {
    BinaryMask out(p.width(), p.height());
    for (std::size_t i = 0; i < p.size(); ++i) {
        out[i] = p[i] >= threshold ? 1 : 0;
    }
    return out;
}

std::size_t pixel_delta(const BinaryMask& a, const BinaryMask& b) {
    require_same_shape(a, b, "pixel_delta");
    std::size_t n = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        n += ((a[i] != 0) != (b[i] != 0)) ? 1 : 0;
    }
    return n;
}

std::vector<Component> connected_components(const BinaryMask& m) {
    const int w = m.width();
    const int h = m.height();
    std::vector<std::uint8_t> seen(m.size(), 0);
    std::vector<Component> out;
    std::vector<std::size_t> stack;

    for (std::size_t start = 0; start < m.size(); ++start) {
        if (!m[start] || seen[start]) {
            continue;
        }
        Component comp;
        seen[start] = 1;
        stack.push_back(start);
        while (!stack.empty()) {
            const std::size_t idx = stack.back();
            stack.pop_back();
            comp.pixels.push_back(idx);
            const int x = static_cast<int>(idx % static_cast<std::size_t>(w));
            const int y = static_cast<int>(idx / static_cast<std::size_t>(w));
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    const int nx = x + dx;
                    const int ny = y + dy;
                    if ((dx == 0 && dy == 0) || nx < 0 || ny < 0 || nx >= w || ny >= h) {
                        continue;
                    }
                    const std::size_t n = m.index(nx, ny);
                    if (m[n] && !seen[n]) {
                        seen[n] = 1;
                        stack.push_back(n);
                    }
                }
            }
        }
        std::sort(comp.pixels.begin(), comp.pixels.end());
        out.push_back(std::move(comp));
    }

    std::stable_sort(out.begin(), out.end(), [](const Component& a, const Component& b) {
        if (a.area() != b.area()) {
            return a.area() > b.area();
        }
        return a.first_pixel() < b.first_pixel();
    });
    return out;
}

DistanceMap distance_transform(const BinaryMask& m) {
    // Pad by one background pixel on every side so the border acts as background.
    const int w = m.width() + 2;
    const int h = m.height() + 2;
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> grid(static_cast<std::size_t>(w) * h, 0.0);
    for (int y = 0; y < m.height(); ++y) {
        for (int x = 0; x < m.width(); ++x) {
            grid[static_cast<std::size_t>(y + 1) * w + (x + 1)] = m(x, y) ? inf : 0.0;
        }
    }

    std::vector<int> vertex;
    std::vector<double> boundary;
    std::vector<double> line_in(static_cast<std::size_t>(std::max(w, h)));
    std::vector<double> line_out(line_in.size());

    for (int x = 0; x < w; ++x) {
        for (int y = 0; y < h; ++y) {
            line_in[y] = grid[static_cast<std::size_t>(y) * w + x];
        }
        squared_edt_1d(std::span(line_in).first(h), std::span(line_out).first(h), vertex, boundary);
        for (int y = 0; y < h; ++y) {
            grid[static_cast<std::size_t>(y) * w + x] = line_out[y];
        }
    }
    for (int y = 0; y < h; ++y) {
        auto row = std::span(grid).subspan(static_cast<std::size_t>(y) * w, w);
        std::copy(row.begin(), row.end(), line_in.begin());
        squared_edt_1d(std::span(line_in).first(w), row, vertex, boundary);
    }

    DistanceMap out(m.width(), m.height(), 0.0);
    for (int y = 0; y < m.height(); ++y) {
        for (int x = 0; x < m.width(); ++x) {
            if (m(x, y)) {
                out(x, y) = std::sqrt(grid[static_cast<std::size_t>(y + 1) * w + (x + 1)]);
            }
        }
    }
    return out;
}

BinaryMask component_mask(const Component& c, int width, int height) {
    BinaryMask out(width, height);
    for (auto idx : c.pixels) {
        out[idx] = 1;
    }
    return out;
}

std::vector<std::uint8_t> encode_cspm(const ProbabilityMap& p) {
    if (p.width() > 0xffff || p.height() > 0xffff) {
        throw FormatError("CSPM dimensions exceed 16 bits");
    }
    std::vector<std::uint8_t> out{'C', 'S', 'P', 'M'};
    out.reserve(8 + 4 * p.size());
    put_u16(out, static_cast<std::uint16_t>(p.width()));
    put_u16(out, static_cast<std::uint16_t>(p.height()));
    for (double v : p.values()) {
        const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
        for (int s = 0; s < 32; s += 8) {
            out.push_back(static_cast<std::uint8_t>((bits >> s) & 0xff));
        }
    }
    return out;
}

ProbabilityMap decode_cspm(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 8 || std::memcmp(bytes.data(), "CSPM", 4) != 0) {
        throw FormatError("missing CSPM header");
    }
    const int w = bytes[4] | (bytes[5] << 8);
    const int h = bytes[6] | (bytes[7] << 8);
    if (w < 1 || h < 1) {
        throw FormatError("CSPM dimensions must be positive");
    }
    const std::size_t n = static_cast<std::size_t>(w) * h;
    if (bytes.size() != 8 + 4 * n) {
        throw FormatError("CSPM payload size mismatch");
    }
    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto* p = bytes.data() + 8 + 4 * i;
        const std::uint32_t bits = std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
                                   (std::uint32_t(p[3]) << 24);
        values[i] = std::bit_cast<float>(bits);
    }
    ProbabilityMap out(w, h, std::move(values));
    out.validate();
    return out;
}

}  // namespace clickseg
