#pragma once

#include "patchsieve/descriptor.hpp"
#include "patchsieve/som.hpp"

#include <map>
#include <string>
#include <vector>

namespace patchsieve {

/// Result of clustering the patches of one scan.
struct ClusterModel {
    std::string scan_id;
    int map_side = 0;
    std::uint64_t seed = 0;
    RowMatrixXd weights;                 // map_side²×d
    std::vector<std::string> patch_ids;  // row order of the input
    std::vector<int> labels;             // compacted, one per patch
    std::vector<std::size_t> sizes;      // by label
    int raw_cluster_count = 0;           // occupied units before merging
    double variance_ratio = 0.0;         // +inf when within-cluster spread is zero

    int cluster_count() const { return static_cast<int>(sizes.size()); }
};

/// Trains a SOM on one scan's descriptors, labels patches by BMU, merges
/// undersized clusters and scores the result.
ClusterModel cluster_scan(const std::string& scan_id, const std::vector<std::string>& patch_ids,
                          const RowMatrixXd& features, const SomConfig& cfg);

/// Row indices of `set` grouped by scan id (parsed from patch ids), scans in
/// lexicographic order, rows in input order.
std::map<std::string, std::vector<std::size_t>> rows_by_scan(const DescriptorSet& set);

/// One model per scan; scan seeds are derived from cfg.seed and the scan id.
std::vector<ClusterModel> cluster_all(const DescriptorSet& set, const SomConfig& cfg, int jobs = 1);

/// JSON document holding every scan's clustering (weights omitted).
std::string clusters_to_json(const std::vector<ClusterModel>& models, const SomConfig& cfg);

/// Reads labels back; weights are left empty.
std::vector<ClusterModel> clusters_from_json(const std::string& text);

}  // namespace patchsieve
