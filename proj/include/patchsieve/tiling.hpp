#pragma once

#include "patchsieve/image.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace patchsieve {

struct TilingConfig {
    int patch_size = 1000;
    int stride = 1000;
    int downsample_to = 250;
    double bg_threshold = 0.99;
    int bg_brightness_cutoff = 200;

    /// Throws UsageError on an invalid combination.
    void validate() const;
};

/// A square tile cut from a scan. `pixels` is side×side after downsampling.
struct Patch {
    std::string scan_id;
    int grid_x = 0;
    int grid_y = 0;
    Image pixels;

    int side() const { return pixels.width; }
    std::string id() const;
};

/// Cuts whole tiles on a regular grid and downsamples each one. Partial edge
/// tiles are dropped. Output is ordered by (grid_y, grid_x).
std::vector<Patch> tile_scan(const Image& image, const std::string& scan_id,
                             const TilingConfig& cfg, int jobs = 1);

/// Box-filter reduction when `target` divides the side, bilinear otherwise.
/// `used_fallback`, when given, reports which path ran.
Image downsample(const Image& square, int target, bool* used_fallback = nullptr);

/// Fraction of pixels whose gray level (luma for RGB) exceeds `brightness_cutoff`.
double background_ratio(const Image& image, int brightness_cutoff);

/// Keeps patches with background_ratio <= cfg.bg_threshold, order preserved.
std::vector<Patch> filter_patches(const std::vector<Patch>& patches, const TilingConfig& cfg);

struct TileRecord {
    Patch patch;
    double background_ratio = 0.0;
    bool retained = false;
};

/// tile_scan followed by the background measurement used for the manifest.
std::vector<TileRecord> tile_and_measure(const Image& image, const std::string& scan_id,
                                         const TilingConfig& cfg, int jobs = 1);

}  // namespace patchsieve
