#include "clickseg/image_io.hpp"

#include <fstream>
#include <iterator>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <sodium.h>

namespace clickseg {

namespace {

cv::Mat decode_raw(std::span<const std::uint8_t> bytes, int flags) {
    if (bytes.empty()) {
        throw FormatError("empty image data");
    }
    const cv::Mat buffer(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<std::uint8_t*>(bytes.data()));
    cv::Mat decoded;
    try {
        decoded = cv::imdecode(buffer, flags);
    } catch (const cv::Exception& e) {
        throw FormatError(std::string("image decode failed: ") + e.what());
    }
    if (decoded.empty()) {
        throw FormatError("undecodable image data");
    }
    return decoded;
}

std::vector<std::uint8_t> encode_mat(const cv::Mat& mat) {
    std::vector<std::uint8_t> out;
    if (!cv::imencode(".png", mat, out)) {
        throw FormatError("PNG encoding failed");
    }
    return out;
}

}  // namespace

RasterImage decode_image(std::span<const std::uint8_t> bytes) {
    const cv::Mat bgr = decode_raw(bytes, cv::IMREAD_COLOR);
    RasterImage out(bgr.cols, bgr.rows);
    for (int y = 0; y < bgr.rows; ++y) {
        const auto* row = bgr.ptr<cv::Vec3b>(y);
        for (int x = 0; x < bgr.cols; ++x) {
            out(x, y) = Rgb{row[x][2], row[x][1], row[x][0]};
        }
    }
    return out;
}

RasterImage read_image(const std::filesystem::path& path) {
    return decode_image(read_file(path));
}

BinaryMask decode_mask(std::span<const std::uint8_t> bytes) {
    cv::Mat raw = decode_raw(bytes, cv::IMREAD_UNCHANGED);
    if (raw.depth() != CV_8U) {
        raw.convertTo(raw, CV_8U);
    }
    const int channels = raw.channels();
    BinaryMask out(raw.cols, raw.rows);
    for (int y = 0; y < raw.rows; ++y) {
        const auto* row = raw.ptr<std::uint8_t>(y);
        for (int x = 0; x < raw.cols; ++x) {
            bool fg = false;
            // Alpha channel (4th) is ignored.
            for (int c = 0; c < std::min(channels, 3); ++c) {
                fg = fg || row[x * channels + c] != 0;
            }
            out(x, y) = fg ? 1 : 0;
        }
    }
    return out;
}

BinaryMask read_mask(const std::filesystem::path& path) {
    return decode_mask(read_file(path));
}

std::vector<std::uint8_t> encode_png(const RasterImage& image) {
    cv::Mat bgr(image.height(), image.width(), CV_8UC3);
    for (int y = 0; y < image.height(); ++y) {
        auto* row = bgr.ptr<cv::Vec3b>(y);
        for (int x = 0; x < image.width(); ++x) {
            const Rgb& p = image(x, y);
            row[x] = cv::Vec3b(p.b, p.g, p.r);
        }
    }
    return encode_mat(bgr);
}

std::vector<std::uint8_t> encode_png(const BinaryMask& mask) {
    cv::Mat gray(mask.height(), mask.width(), CV_8UC1);
    for (int y = 0; y < mask.height(); ++y) {
        auto* row = gray.ptr<std::uint8_t>(y);
        for (int x = 0; x < mask.width(); ++x) {
            row[x] = mask(x, y) ? 255 : 0;
        }
    }
    return encode_mat(gray);
}

void write_image(const std::filesystem::path& path, const RasterImage& image) {
    write_file(path, encode_png(image));
}

void write_mask(const std::filesystem::path& path, const BinaryMask& mask) {
    write_file(path, encode_png(mask));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw Error("short write to " + path.string());
    }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
    constexpr int variant = sodium_base64_VARIANT_ORIGINAL;
    std::string out(sodium_base64_encoded_len(bytes.size(), variant), '\0');
    sodium_bin2base64(out.data(), out.size(), bytes.data(), bytes.size(), variant);
    out.resize(out.size() - 1);  // drop the terminating NUL
    return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
    std::vector<std::uint8_t> out(text.size() / 4 * 3 + 3);
    std::size_t len = 0;
    const char* end = nullptr;
    if (sodium_base642bin(out.data(), out.size(), text.data(), text.size(), nullptr, &len, &end,
                          sodium_base64_VARIANT_ORIGINAL) != 0 ||
        end != text.data() + text.size()) {
        throw FormatError("invalid base64 payload");
    }
    out.resize(len);
    return out;
}

}  // namespace clickseg
