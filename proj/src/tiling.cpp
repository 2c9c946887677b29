#include "patchsieve/tiling.hpp"

#include "patchsieve/common.hpp"
#include "patchsieve/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <thread>

namespace patchsieve {

int default_jobs() {
    if (const char* env = std::getenv("PATCHSIEVE_JOBS"); env && *env) {
        const int jobs = std::atoi(env);
        if (jobs >= 1) return jobs;
    }
    return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

void TilingConfig::validate() const {
    if (patch_size < 1) throw UsageError("tiling.patch_size must be >= 1");
    if (stride < 1) throw UsageError("tiling.stride must be >= 1");
    if (downsample_to < 1 || downsample_to > patch_size)
        throw UsageError("tiling.downsample_to must lie in [1, patch_size]");
    if (!(bg_threshold >= 0.0 && bg_threshold <= 1.0))
        throw UsageError("tiling.bg_threshold must lie in [0, 1]");
    if (bg_brightness_cutoff < 0 || bg_brightness_cutoff > 255)
        throw UsageError("tiling.bg_brightness_cutoff must be an 8-bit level");
}

std::string Patch::id() const { return make_patch_id(scan_id, grid_x, grid_y); }

namespace {

Image box_reduce(const Image& src, int target) {
    const int factor = src.width / target;
    const unsigned area = static_cast<unsigned>(factor) * factor;
    Image out(target, target, src.channels);
    for (int ty = 0; ty < target; ++ty) {
        for (int tx = 0; tx < target; ++tx) {
            for (int c = 0; c < src.channels; ++c) {
                unsigned sum = 0;
                for (int dy = 0; dy < factor; ++dy)
                    for (int dx = 0; dx < factor; ++dx)
                        sum += src.at(tx * factor + dx, ty * factor + dy, c);
                // round half up
                out.at(tx, ty, c) = static_cast<std::uint8_t>((sum + area / 2) / area);
            }
        }
    }
    return out;
}

Image bilinear_resize(const Image& src, int target) {
    const double scale = static_cast<double>(src.width) / target;
    const int last = src.width - 1;
    Image out(target, target, src.channels);
    for (int ty = 0; ty < target; ++ty) {
        const double sy = std::clamp((ty + 0.5) * scale - 0.5, 0.0, static_cast<double>(last));
        const int y0 = static_cast<int>(sy);
        const int y1 = std::min(y0 + 1, last);
        const double fy = sy - y0;
        for (int tx = 0; tx < target; ++tx) {
            const double sx = std::clamp((tx + 0.5) * scale - 0.5, 0.0, static_cast<double>(last));
            const int x0 = static_cast<int>(sx);
            const int x1 = std::min(x0 + 1, last);
            const double fx = sx - x0;
            for (int c = 0; c < src.channels; ++c) {
                const double top = src.at(x0, y0, c) + fx * (src.at(x1, y0, c) - src.at(x0, y0, c));
                const double bot = src.at(x0, y1, c) + fx * (src.at(x1, y1, c) - src.at(x0, y1, c));
                const double v = top + fy * (bot - top);
                out.at(tx, ty, c) = static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
            }
        }
    }
    return out;
}

}  // namespace

Image downsample(const Image& square, int target, bool* used_fallback) {
    if (square.width != square.height) throw UsageError("downsample expects a square image");
    if (target < 1 || target > square.width)
        throw UsageError("downsample target must lie in [1, " + std::to_string(square.width) + "]");
    if (used_fallback) *used_fallback = false;
    if (target == square.width) return square;
    if (square.width % target == 0) return box_reduce(square, target);
    if (used_fallback) *used_fallback = true;
    return bilinear_resize(square, target);
}

double background_ratio(const Image& image, int brightness_cutoff) {
    const std::size_t n = static_cast<std::size_t>(image.width) * image.height;
    if (n == 0) return 0.0;
    std::size_t bright = 0;
    if (image.channels == 1) {
        for (auto v : image.pixels) bright += v > brightness_cutoff;
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            const auto* px = &image.pixels[i * image.channels];
            bright += luma(px[0], px[1], px[2]) > brightness_cutoff;
        }
    }
    return static_cast<double>(bright) / static_cast<double>(n);
}

std::vector<Patch> tile_scan(const Image& image, const std::string& scan_id,
                             const TilingConfig& cfg, int jobs) {
    cfg.validate();
    if (image.width < cfg.patch_size || image.height < cfg.patch_size) {
        throw InputError("empty result: image " + std::to_string(image.width) + "x" +
                         std::to_string(image.height) + " is smaller than one " +
                         std::to_string(cfg.patch_size) + "-pixel patch");
    }
    const int cols = (image.width - cfg.patch_size) / cfg.stride + 1;
    const int rows = (image.height - cfg.patch_size) / cfg.stride + 1;

    std::vector<Patch> patches(static_cast<std::size_t>(cols) * rows);
    std::atomic<bool> fallback{false};
    parallel_for(patches.size(), jobs, [&](std::size_t i) {
        const int gx = static_cast<int>(i % cols);
        const int gy = static_cast<int>(i / cols);
        bool used = false;
        Patch& p = patches[i];
        p.scan_id = scan_id;
        p.grid_x = gx;
        p.grid_y = gy;
        p.pixels = downsample(crop(image, gx * cfg.stride, gy * cfg.stride, cfg.patch_size, cfg.patch_size),
                              cfg.downsample_to, &used);
        if (used) fallback = true;
    });
    if (fallback) {
        std::clog << "warning: " << cfg.downsample_to << " does not divide " << cfg.patch_size
                  << "; patches of scan '" << scan_id << "' were resampled bilinearly\n";
    }
    return patches;
}

std::vector<Patch> filter_patches(const std::vector<Patch>& patches, const TilingConfig& cfg) {
    std::vector<Patch> kept;
    kept.reserve(patches.size());
    for (const auto& p : patches)
        if (background_ratio(p.pixels, cfg.bg_brightness_cutoff) <= cfg.bg_threshold) kept.push_back(p);
    return kept;
}

std::vector<TileRecord> tile_and_measure(const Image& image, const std::string& scan_id,
                                         const TilingConfig& cfg, int jobs) {
    auto patches = tile_scan(image, scan_id, cfg, jobs);
    std::vector<TileRecord> records(patches.size());
    parallel_for(patches.size(), jobs, [&](std::size_t i) {
        records[i].background_ratio = background_ratio(patches[i].pixels, cfg.bg_brightness_cutoff);
        records[i].retained = records[i].background_ratio <= cfg.bg_threshold;
        records[i].patch = std::move(patches[i]);
    });
    return records;
}

}  // namespace patchsieve
