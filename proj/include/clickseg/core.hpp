#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "clickseg/error.hpp"

namespace clickseg {

// Coordinates throughout: u / x = column, v / y = row, origin at the top-left pixel.

/// Dense row-major 2-D grid. Width and height are at least 1 for any constructed grid.
template <typename T>
class Grid {
public:
    using value_type = T;

    Grid() = default;

    Grid(int width, int height, T fill = T{})
        : width_(width), height_(height) {
        check_dims(width, height);
        values_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
    }

    Grid(int width, int height, std::vector<T> values)
        : width_(width), height_(height), values_(std::move(values)) {
        check_dims(width, height);
        if (values_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
            throw DimensionMismatch("grid value count does not match " + std::to_string(width) + "x" +
                                    std::to_string(height));
        }
    }

    [[nodiscard]] int width() const noexcept { return width_; }
    [[nodiscard]] int height() const noexcept { return height_; }
    [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }
    [[nodiscard]] bool empty() const noexcept { return values_.empty(); }

    [[nodiscard]] bool contains(int x, int y) const noexcept {
        return x >= 0 && y >= 0 && x < width_ && y < height_;
    }
    [[nodiscard]] std::size_t index(int x, int y) const noexcept {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
    }

    T& operator()(int x, int y) noexcept { return values_[index(x, y)]; }
    const T& operator()(int x, int y) const noexcept { return values_[index(x, y)]; }
    T& operator[](std::size_t i) noexcept { return values_[i]; }
    const T& operator[](std::size_t i) const noexcept { return values_[i]; }

    [[nodiscard]] std::span<T> values() noexcept { return values_; }
    [[nodiscard]] std::span<const T> values() const noexcept { return values_; }

    template <typename U>
    [[nodiscard]] bool same_shape(const Grid<U>& other) const noexcept {
        return width_ == other.width() && height_ == other.height();
    }

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    static void check_dims(int width, int height) {
        if (width < 1 || height < 1) {
            throw DimensionMismatch("grid dimensions must be positive, got " + std::to_string(width) + "x" +
                                    std::to_string(height));
        }
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<T> values_;
};

struct Rgb {
    std::uint8_t r = 0;
    std::uint8_t g = 0;
    std::uint8_t b = 0;

    friend bool operator==(const Rgb&, const Rgb&) = default;
};

class RasterImage : public Grid<Rgb> {
public:
    using Grid::Grid;
};

/// Binary mask, one byte per pixel holding 0 or 1.
class BinaryMask : public Grid<std::uint8_t> {
public:
    using Grid::Grid;

    [[nodiscard]] std::size_t count() const noexcept;
    [[nodiscard]] BinaryMask complement() const;
};

/// Per-pixel foreground probability in [0, 1].
class ProbabilityMap : public Grid<double> {
public:
    using Grid::Grid;

    /// All-zero map of the given size.
    static ProbabilityMap zeros(int width, int height) { return ProbabilityMap(width, height, 0.0); }

    /// Throws Error if any value is non-finite or outside [0, 1].
    void validate() const;
};

using DistanceMap = Grid<double>;

struct Click {
    int u = 0;
    int v = 0;
    int label = 1;  // 1 foreground / positive, 0 background / negative

    [[nodiscard]] bool positive() const noexcept { return label == 1; }
    [[nodiscard]] bool same_position(const Click& other) const noexcept { return u == other.u && v == other.v; }

    friend bool operator==(const Click&, const Click&) = default;
};

/// Ordered clicks; the k-th entry is the k-th user action. Positions are unique.
class ClickSequence {
public:
    ClickSequence() = default;
    explicit ClickSequence(std::vector<Click> clicks);

    /// Appends a click. Throws Error when a click already exists at (u, v) or label is not 0/1.
    void push_back(const Click& click);
    void pop_back();

    [[nodiscard]] bool contains_position(int u, int v) const noexcept;
    [[nodiscard]] std::size_t size() const noexcept { return clicks_.size(); }
    [[nodiscard]] bool empty() const noexcept { return clicks_.empty(); }
    [[nodiscard]] const Click& operator[](std::size_t i) const noexcept { return clicks_[i]; }
    [[nodiscard]] const Click& back() const { return clicks_.back(); }
    [[nodiscard]] std::span<const Click> clicks() const noexcept { return clicks_; }
    [[nodiscard]] auto begin() const noexcept { return clicks_.begin(); }
    [[nodiscard]] auto end() const noexcept { return clicks_.end(); }

    /// Throws OutOfBounds if any click lies outside [0, width) x [0, height).
    void check_bounds(int width, int height) const;

    friend bool operator==(const ClickSequence&, const ClickSequence&) = default;

private:
    std::vector<Click> clicks_;
};

void check_click_bounds(const Click& click, int width, int height);

struct Component {
    std::vector<std::size_t> pixels;  // linear indices, ascending raster order
    [[nodiscard]] std::size_t area() const noexcept { return pixels.size(); }
    [[nodiscard]] std::size_t first_pixel() const noexcept { return pixels.front(); }
};

inline constexpr double kDefaultThreshold = 0.5;

/// |a ∩ b| / |a ∪ b|; 1.0 when both masks are empty.
[[nodiscard]] double iou(const BinaryMask& a, const BinaryMask& b);

[[nodiscard]] BinaryMask binarize(const ProbabilityMap& p, double threshold = kDefaultThreshold);

/// Number of positions where the masks differ.
[[nodiscard]] std::size_t pixel_delta(const BinaryMask& a, const BinaryMask& b);

/// 8-connected foreground components ordered by area descending, then by topmost-leftmost pixel.
[[nodiscard]] std::vector<Component> connected_components(const BinaryMask& m);

/// Exact Euclidean distance from each foreground pixel to the nearest background pixel. Positions
/// outside the image count as background; background pixels map to 0.
[[nodiscard]] DistanceMap distance_transform(const BinaryMask& m);

/// Mask holding only the given component's pixels.
[[nodiscard]] BinaryMask component_mask(const Component& c, int width, int height);

// Probability map wire format: "CSPM", u16 width, u16 height (little endian), then row-major f32 LE values.
[[nodiscard]] std::vector<std::uint8_t> encode_cspm(const ProbabilityMap& p);
[[nodiscard]] ProbabilityMap decode_cspm(std::span<const std::uint8_t> bytes);

}  // namespace clickseg
