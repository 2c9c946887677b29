#pragma once

#include "patchsieve/descriptor.hpp"
#include "patchsieve/selection.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace patchsieve {

struct Match {
    std::string patch_id;
    std::string scan_id;
    double distance = 0.0;
    int rank = 0;  // 1-based
};

/// Immutable exact nearest-neighbor index. Entries are stored in
/// lexicographic id order, so entry order and tie-breaking never depend on
/// insertion order.
class RetrievalIndex {
public:
    RetrievalIndex() = default;
    RetrievalIndex(DescriptorSet entries, std::vector<std::string> scan_ids, nlohmann::json metadata);

    DescriptorKind kind() const { return entries_.kind; }
    Eigen::Index dim() const { return entries_.dim(); }
    std::size_t size() const { return entries_.size(); }
    const std::vector<std::string>& ids() const { return entries_.ids; }
    const std::vector<std::string>& scan_ids() const { return scan_ids_; }
    const RowMatrixXf& vectors() const { return entries_.values; }
    const nlohmann::json& metadata() const { return metadata_; }

    /// The k entries closest to `q` by Euclidean distance, ties to the
    /// lexicographically smaller id.
    std::vector<Match> query(const Eigen::Ref<const Eigen::VectorXf>& q, std::size_t k) const;
    std::vector<Match> query(const Descriptor& q, std::size_t k) const;

    /// One result list per row of `queries`, computed on up to `jobs` threads.
    std::vector<std::vector<Match>> query_batch(const DescriptorSet& queries, std::size_t k, int jobs = 1) const;

    friend bool operator==(const RetrievalIndex& a, const RetrievalIndex& b) {
        return a.entries_ == b.entries_ && a.scan_ids_ == b.scan_ids_ && a.metadata_ == b.metadata_;
    }

private:
    DescriptorSet entries_;
    std::vector<std::string> scan_ids_;
    nlohmann::json metadata_;
};

/// Index over the selected descriptors, or over all of them when no
/// selection is given. Scan ids come from the patch ids. `metadata` is stored
/// as given, with the entry count and selection summary added.
RetrievalIndex build_index(const DescriptorSet& descriptors, const std::vector<SelectionSet>* selection,
                           nlohmann::json metadata = nlohmann::json::object());

/// Layout: feature payload | JSON metadata | u64 JSON length | "PSIX".
std::string encode_index(const RetrievalIndex& index);
RetrievalIndex decode_index(std::string_view bytes);
void save_index(const RetrievalIndex& index, const std::string& path);
RetrievalIndex load_index(const std::string& path);

/// CSV lines `query_id,rank,patch_id,scan_id,distance` with a header.
std::string matches_to_csv(const std::vector<std::string>& query_ids,
                           const std::vector<std::vector<Match>>& results);

/// Rank-1 prediction per query from a results CSV.
std::vector<std::pair<std::string, std::string>> top1_from_csv(const std::string& text);

}  // namespace patchsieve
