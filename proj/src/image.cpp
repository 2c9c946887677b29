#include "patchsieve/image.hpp"

#include "patchsieve/common.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <cstring>

namespace patchsieve {

Image to_grayscale(const Image& image) {
    if (image.channels == 1) return image;
    if (image.channels != 3)
        throw InputError("unsupported channel count " + std::to_string(image.channels));
    Image gray(image.width, image.height, 1);
    const std::size_t n = static_cast<std::size_t>(image.width) * image.height;
    for (std::size_t i = 0; i < n; ++i) {
        const auto* px = &image.pixels[i * 3];
        gray.pixels[i] = luma(px[0], px[1], px[2]);
    }
    return gray;
}

Image crop(const Image& image, int x0, int y0, int w, int h) {
    if (x0 < 0 || y0 < 0 || w < 0 || h < 0 || x0 + w > image.width || y0 + h > image.height)
        throw UsageError("crop window outside image bounds");
    Image out(w, h, image.channels);
    const std::size_t row_bytes = static_cast<std::size_t>(w) * image.channels;
    for (int y = 0; y < h; ++y) {
        const auto* src = &image.pixels[(static_cast<std::size_t>(y0 + y) * image.width + x0) * image.channels];
        std::memcpy(&out.pixels[static_cast<std::size_t>(y) * row_bytes], src, row_bytes);
    }
    return out;
}

Image read_image(const std::string& path) {
    cv::Mat mat = cv::imread(path, cv::IMREAD_UNCHANGED);
    if (mat.empty()) throw InputError("cannot decode image '" + path + "'");
    if (mat.depth() != CV_8U) throw InputError("'" + path + "' is not an 8-bit image");

    const int channels = mat.channels();
    Image out;
    if (channels == 1) {
        out = Image(mat.cols, mat.rows, 1);
        for (int y = 0; y < mat.rows; ++y)
            std::memcpy(&out.pixels[static_cast<std::size_t>(y) * mat.cols], mat.ptr<std::uint8_t>(y),
                        static_cast<std::size_t>(mat.cols));
        return out;
    }
    if (channels != 3 && channels != 4)
        throw InputError("'" + path + "' has unsupported channel count " + std::to_string(channels));
    // BGR(A) -> RGB, alpha dropped.
    out = Image(mat.cols, mat.rows, 3);
    for (int y = 0; y < mat.rows; ++y) {
        const auto* row = mat.ptr<std::uint8_t>(y);
        for (int x = 0; x < mat.cols; ++x) {
            const auto* px = row + static_cast<std::size_t>(x) * channels;
            out.at(x, y, 0) = px[2];
            out.at(x, y, 1) = px[1];
            out.at(x, y, 2) = px[0];
        }
    }
    return out;
}

void write_png(const Image& image, const std::string& path) {
    cv::Mat mat;
    if (image.channels == 1) {
        mat = cv::Mat(image.height, image.width, CV_8UC1,
                      const_cast<std::uint8_t*>(image.pixels.data())).clone();
    } else if (image.channels == 3) {
        mat = cv::Mat(image.height, image.width, CV_8UC3);
        for (int y = 0; y < image.height; ++y) {
            auto* row = mat.ptr<std::uint8_t>(y);
            for (int x = 0; x < image.width; ++x) {
                row[x * 3 + 0] = image.at(x, y, 2);
                row[x * 3 + 1] = image.at(x, y, 1);
                row[x * 3 + 2] = image.at(x, y, 0);
            }
        }
    } else {
        throw UsageError("write_png: unsupported channel count");
    }
    if (!cv::imwrite(path, mat)) throw InputError("cannot write image '" + path + "'");
}

}  // namespace patchsieve
