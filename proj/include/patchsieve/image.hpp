#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace patchsieve {

/// 8-bit raster, row-major with interleaved channels (1 = gray, 3 = RGB).
struct Image {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<std::uint8_t> pixels;

    Image() = default;
    Image(int w, int h, int c, std::uint8_t fill = 0)
        : width(w), height(h), channels(c),
          pixels(static_cast<std::size_t>(w) * h * c, fill) {}

    std::uint8_t& at(int x, int y, int c = 0) {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    std::uint8_t at(int x, int y, int c = 0) const {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    bool empty() const { return pixels.empty(); }

    friend bool operator==(const Image&, const Image&) = default;
};

/// 0.299R + 0.587G + 0.114B rounded to nearest, in integer arithmetic.
inline std::uint8_t luma(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    return static_cast<std::uint8_t>((299u * r + 587u * g + 114u * b + 500u) / 1000u);
}

/// Single-channel copy; RGB goes through luma().
Image to_grayscale(const Image& image);

/// Crops a w×h window whose top-left corner is (x0, y0).
Image crop(const Image& image, int x0, int y0, int w, int h);

/// Reads PNG, TIFF and the other lossless formats the codec backend supports.
/// Returns 1-channel images for gray inputs and 3-channel RGB otherwise.
Image read_image(const std::string& path);
void write_png(const Image& image, const std::string& path);

}  // namespace patchsieve
