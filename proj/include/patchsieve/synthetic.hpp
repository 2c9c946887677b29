#pragma once

#include "patchsieve/image.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace patchsieve {

/// Procedural stand-in for a scan archive. Each scan is an RGB canvas with a
/// white margin around a tissue area made of three textures. Query patches
/// are cut out of the canvas and the holes are painted as background.
struct SyntheticConfig {
    int scans = 6;
    int grid = 26;         // patches per canvas side
    int patch_size = 128;
    int queries_per_scan = 20;
    double jitter = 0.15;  // relative spread of a pooled tissue between scans
    std::uint64_t seed = 1;

    int side() const { return grid * patch_size; }
    void validate() const;
};

struct SyntheticQuery {
    std::string id;
    std::string scan_id;
    Image image;
};

std::string synthetic_scan_id(int scan);

struct SyntheticScan {
    Image image;
    std::vector<SyntheticQuery> queries;
};

SyntheticScan render_scan(const SyntheticConfig& cfg, int scan, int jobs = 1);

/// Writes `scans/<scan_id>.png`, `test/<query_id>.png` and `test_truth.csv`
/// under `dir`.
void write_synthetic_corpus(const SyntheticConfig& cfg, const std::string& dir, int jobs = 1);

}  // namespace patchsieve
