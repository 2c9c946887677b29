#pragma once

#include "patchsieve/clustering.hpp"
#include "patchsieve/descriptor.hpp"
#include "patchsieve/evaluation.hpp"
#include "patchsieve/lbp.hpp"
#include "patchsieve/retrieval.hpp"
#include "patchsieve/selection.hpp"
#include "patchsieve/tiling.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace patchsieve {

inline constexpr const char* kToolVersion = "0.1.0";

/// Every tunable of the pipeline. Sections mirror the JSON config document.
struct PipelineConfig {
    TilingConfig tiling;
    LbpConfig lbp;
    struct Pca {
        double retained_fraction = 0.95;
    } pca;
    SomConfig som;
    struct Selection {
        SelectionMethod method = SelectionMethod::gmm;
        SelectionCriterion criterion = SelectionCriterion::density;
        double fraction = 0.5;
        std::vector<double> fractions{0.10, 0.15, 0.20, 0.30, 0.40, 0.50};
        std::vector<SelectionMethod> methods{SelectionMethod::gmm, SelectionMethod::random};
    } selection;
    struct Retrieval {
        std::size_t k = 1;
    } retrieval;
    struct Eval {
        bool include_full = false;  // add a 100% row per feature to sweeps
    } eval;
    struct Paths {
        std::string work_dir;
    } paths;
    std::uint64_t seed = 0;
    int jobs = 1;

    void validate() const;
};

/// Overlays a config document on `base`. Unknown keys are rejected with a
/// UsageError naming the offending key.
PipelineConfig config_from_json(const nlohmann::json& doc, PipelineConfig base = {});
nlohmann::json config_to_json(const PipelineConfig& cfg);

/// Stage seeds, all expanded from the root seed by stable labels.
std::uint64_t som_seed(const PipelineConfig& cfg);
std::uint64_t selection_seed(const PipelineConfig& cfg);

// --- tiling artifacts -------------------------------------------------------

struct TileManifestEntry {
    std::string id;
    std::string scan_id;
    int grid_x = 0;
    int grid_y = 0;
    std::string file;  // relative to the manifest directory
    double background_ratio = 0.0;
    bool retained = false;
};

struct TileManifest {
    TilingConfig tiling;
    std::vector<TileManifestEntry> patches;
};

/// Tiles one scan, writes every candidate patch as PNG into `out_dir` and
/// returns its manifest entries.
std::vector<TileManifestEntry> write_scan_tiles(const Image& scan, const std::string& scan_id,
                                                const TilingConfig& cfg, const std::string& out_dir, int jobs);

std::string tile_manifest_to_json(const TileManifest& manifest);
TileManifest tile_manifest_from_json(const std::string& text);

/// LBP descriptors of the retained patches listed in a manifest.
DescriptorSet extract_lbp_from_manifest(const std::string& manifest_path, const LbpConfig& cfg, int jobs);

/// LBP descriptors of images under `dir`; id = file stem. Images are first
/// downsampled to `downsample_to` when it is positive.
DescriptorSet extract_lbp_from_directory(const std::string& dir, const LbpConfig& cfg, int downsample_to, int jobs);

DescriptorSet lbp_descriptors(const std::vector<Patch>& patches, const LbpConfig& cfg, int jobs);

/// Text feature matrix: header `id,v0,v1,...`, one row per descriptor.
DescriptorSet features_from_csv(const std::string& text, DescriptorKind kind);

// --- sweeps -----------------------------------------------------------------

struct FeatureSource {
    std::string name;        // label in the sweep CSV
    DescriptorSet train;
    DescriptorSet queries;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::string csv;
};

/// For every feature source: clusters the training descriptors once, then
/// runs select -> index -> search -> eval for every (fraction, method) pair.
/// When `artifact_dir` is set, every intermediate artifact is written there.
SweepResult run_sweep(const std::vector<FeatureSource>& sources, const Truth& truth, const PipelineConfig& cfg,
                      const std::optional<std::string>& artifact_dir = std::nullopt);

/// Rank-1 predicted scan per query.
Top1 top1_predictions(const DescriptorSet& queries, const std::vector<std::vector<Match>>& results);

// --- run manifests ----------------------------------------------------------

/// Writes `<artifact>.run.json` describing how `artifact` was produced.
void write_run_manifest(const std::string& artifact, const std::string& subcommand,
                        const std::vector<std::string>& argv, const PipelineConfig& cfg,
                        const std::vector<std::string>& inputs, const std::vector<std::string>& outputs);

}  // namespace patchsieve
