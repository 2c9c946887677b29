#include "patchsieve/synthetic.hpp"

#include "patchsieve/common.hpp"
#include "patchsieve/parallel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <random>

namespace patchsieve {

namespace fs = std::filesystem;

namespace {

std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double lattice(std::uint64_t seed, std::int64_t ix, std::int64_t iy) {
    const auto h = mix(seed ^ mix(static_cast<std::uint64_t>(ix) * 0x9E3779B1ULL + mix(static_cast<std::uint64_t>(iy))));
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double value_noise(std::uint64_t seed, double x, double y) {
    const double fx = std::floor(x), fy = std::floor(y);
    const auto ix = static_cast<std::int64_t>(fx), iy = static_cast<std::int64_t>(fy);
    double tx = x - fx, ty = y - fy;
    tx = tx * tx * (3 - 2 * tx);
    ty = ty * ty * (3 - 2 * ty);
    const double a = lattice(seed, ix, iy), b = lattice(seed, ix + 1, iy);
    const double c = lattice(seed, ix, iy + 1), d = lattice(seed, ix + 1, iy + 1);
    return (a + tx * (b - a)) + ty * ((c + tx * (d - c)) - (a + tx * (b - a)));
}

struct Tissue {
    std::array<double, 3> base;
    std::array<double, 3> gain;
    double frequency, phase, angle, stripe_amp;
    double blob_scale, blob_amp, blob_threshold, nucleus_dark;
    double grain;
    std::uint64_t noise_seed;

    std::array<std::uint8_t, 3> shade(double x, double y) const {
        const double u = x * std::cos(angle) + y * std::sin(angle);
        double v = stripe_amp * std::sin(2 * std::numbers::pi * frequency * u + phase);
        const double blob = value_noise(noise_seed, x / blob_scale, y / blob_scale);
        v += blob_amp * (2 * blob - 1);
        if (blob > blob_threshold) v -= nucleus_dark;
        const auto gx = static_cast<std::int64_t>(std::floor(x)), gy = static_cast<std::int64_t>(std::floor(y));
        v += grain * (2 * lattice(noise_seed ^ 0xA5A5A5A5ULL, gx, gy) - 1);
        std::array<std::uint8_t, 3> out{};
        for (int c = 0; c < 3; ++c)
            out[c] = static_cast<std::uint8_t>(std::clamp(std::lround(base[c] + gain[c] * v), 0L, 255L));
        return out;
    }
};

struct ScanModel {
    std::array<Tissue, 3> tissues;
    std::vector<std::array<double, 2>> sites;
    std::vector<int> site_tissue;
    std::uint64_t background_seed;

    int tissue_at(double x, double y) const {
        std::size_t best = 0;
        double best_d = INFINITY;
        for (std::size_t i = 0; i < sites.size(); ++i) {
            const double dx = x - sites[i][0], dy = y - sites[i][1];
            const double d = dx * dx + dy * dy;
            if (d < best_d) best_d = d, best = i;
        }
        return site_tissue[best];
    }
};

Tissue make_tissue(std::mt19937_64& rng) {
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit_uniform(rng); };
    Tissue t;
    const double lum = uniform(120, 200);
    t.base = {lum + uniform(10, 40), lum - uniform(10, 50), lum + uniform(0, 30)};
    t.gain = {1.0, uniform(0.8, 1.2), uniform(0.6, 1.0)};
    t.frequency = uniform(0.02, 0.2);
    t.phase = uniform(0, 2 * std::numbers::pi);
    t.angle = uniform(0, std::numbers::pi);
    t.stripe_amp = uniform(0, 35);
    t.blob_scale = uniform(2, 20);
    t.blob_amp = uniform(5, 40);
    t.blob_threshold = uniform(0.6, 0.9);
    t.nucleus_dark = uniform(0, 60);
    t.grain = uniform(2, 30);
    t.noise_seed = rng();
    return t;
}

// Scans draw their tissues from a shared pool and perturb them, so the same
// tissue kind shows up in several scans with slightly different statistics.
ScanModel make_model(const SyntheticConfig& cfg, int scan) {
    std::mt19937_64 pool_rng(derive_seed(cfg.seed, "synthetic/pool"));
    std::vector<Tissue> pool;
    for (int i = 0; i < std::max(cfg.scans, 3); ++i) pool.push_back(make_tissue(pool_rng));

    std::mt19937_64 rng(derive_seed(cfg.seed, "synthetic/" + synthetic_scan_id(scan)));
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit_uniform(rng); };
    auto jitter = [&](double v) { return v * (1 + cfg.jitter * uniform(-1, 1)); };
    ScanModel m;
    for (int k = 0; k < 3; ++k) {
        Tissue t = pool[static_cast<std::size_t>(scan + k) % pool.size()];
        for (auto& b : t.base) b = jitter(b);
        t.frequency = jitter(t.frequency);
        t.stripe_amp = jitter(t.stripe_amp);
        t.blob_scale = jitter(t.blob_scale);
        t.blob_amp = jitter(t.blob_amp);
        t.nucleus_dark = jitter(t.nucleus_dark);
        t.grain = jitter(t.grain);
        t.angle = uniform(0, std::numbers::pi);
        t.noise_seed = rng();
        m.tissues[static_cast<std::size_t>(k)] = t;
    }
    const double side = cfg.side();
    const int n_sites = 12;
    for (int i = 0; i < n_sites; ++i) {
        m.sites.push_back({uniform(0, side), uniform(0, side)});
        m.site_tissue.push_back(i % 3);
    }
    m.background_seed = rng();
    return m;
}

}  // namespace

void SyntheticConfig::validate() const {
    if (scans < 1) throw UsageError("synthetic corpus needs at least one scan");
    if (grid < 1 || patch_size < 8) throw UsageError("synthetic grid or patch size too small");
    if (queries_per_scan < 1) throw UsageError("synthetic corpus needs at least one query per scan");
}

std::string synthetic_scan_id(int scan) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "scan%02d", scan);
    return buf;
}

namespace {

bool is_background(const ScanModel& model, double side, int x, int y) {
    const double centre = side / 2.0;
    const double radius = 0.47 * side;
    // Superellipse outline with a wobbly edge.
    const double dx = std::abs(x + 0.5 - centre) / radius, dy = std::abs(y + 0.5 - centre) / radius;
    const double edge = 1.0 + 0.08 * (2 * value_noise(model.background_seed, x / 300.0, y / 300.0) - 1);
    return std::pow(dx, 4) + std::pow(dy, 4) > edge;
}

std::array<std::uint8_t, 3> background_pixel(const ScanModel& model, int x, int y) {
    const auto g = static_cast<std::uint8_t>(240 + std::lround(8 * lattice(model.background_seed, x, y)));
    return {g, g, g};
}

}  // namespace

SyntheticScan render_scan(const SyntheticConfig& cfg, int scan, int jobs) {
    cfg.validate();
    const auto model = make_model(cfg, scan);
    const int side = cfg.side();
    const int p = cfg.patch_size;
    SyntheticScan out;
    out.image = Image(side, side, 3);
    parallel_for(static_cast<std::size_t>(side), jobs, [&](std::size_t row) {
        const int y = static_cast<int>(row);
        for (int x = 0; x < side; ++x) {
            const auto px = is_background(model, side, x, y) ? background_pixel(model, x, y)
                                                             : model.tissues[model.tissue_at(x, y)].shade(x, y);
            for (int c = 0; c < 3; ++c) out.image.at(x, y, c) = px[c];
        }
    });

    // Query windows are cut out of the canvas and blanked, so no training
    // patch shares pixels with a query.
    std::mt19937_64 rng(derive_seed(cfg.seed, "synthetic/queries/" + synthetic_scan_id(scan)));
    std::vector<std::array<int, 2>> placed;
    for (int attempt = 0; attempt < 1000 * cfg.queries_per_scan &&
                          static_cast<int>(placed.size()) < cfg.queries_per_scan;
         ++attempt) {
        const int x0 = static_cast<int>(bounded(rng, static_cast<std::uint64_t>(side - p + 1)));
        const int y0 = static_cast<int>(bounded(rng, static_cast<std::uint64_t>(side - p + 1)));
        const bool overlaps = std::any_of(placed.begin(), placed.end(), [&](const auto& q) {
            return std::abs(q[0] - x0) < p && std::abs(q[1] - y0) < p;
        });
        if (overlaps) continue;
        int tissue = 0;
        for (int y = y0; y < y0 + p; y += 4)
            for (int x = x0; x < x0 + p; x += 4) tissue += !is_background(model, side, x, y);
        const int samples = ((p + 3) / 4) * ((p + 3) / 4);
        if (tissue * 10 < samples * 9) continue;
        placed.push_back({x0, y0});
    }
    if (static_cast<int>(placed.size()) < cfg.queries_per_scan)
        throw UsageError("synthetic canvas too small for the requested number of queries");

    for (std::size_t q = 0; q < placed.size(); ++q) {
        const auto [x0, y0] = placed[q];
        char id[48];
        std::snprintf(id, sizeof id, "q%02d_%03zu", scan, q);
        out.queries.push_back({id, synthetic_scan_id(scan), crop(out.image, x0, y0, p, p)});
    }
    for (const auto& [x0, y0] : placed)
        for (int y = y0; y < y0 + p; ++y)
            for (int x = x0; x < x0 + p; ++x) {
                const auto px = background_pixel(model, x, y);
                for (int c = 0; c < 3; ++c) out.image.at(x, y, c) = px[c];
            }
    return out;
}

void write_synthetic_corpus(const SyntheticConfig& cfg, const std::string& dir, int jobs) {
    cfg.validate();
    const fs::path root(dir);
    fs::create_directories(root / "scans");
    fs::create_directories(root / "test");
    std::string truth = "query_id,scan_id\n";
    for (int s = 0; s < cfg.scans; ++s) {
        const auto rendered = render_scan(cfg, s, jobs);
        write_png(rendered.image, (root / "scans" / (synthetic_scan_id(s) + ".png")).string());
        for (const auto& q : rendered.queries) {
            write_png(q.image, (root / "test" / (q.id + ".png")).string());
            truth += q.id + "," + q.scan_id + "\n";
        }
    }
    write_file_atomic((root / "test_truth.csv").string(), truth);
}

}  // namespace patchsieve
