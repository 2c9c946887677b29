#pragma once

#include "patchsieve/clustering.hpp"
#include "patchsieve/descriptor.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace patchsieve {

enum class SelectionMethod { gmm, random, all };
enum class SelectionCriterion { density, nearest_mean };

std::string_view to_string(SelectionMethod method);
std::string_view to_string(SelectionCriterion criterion);
std::optional<SelectionMethod> method_from_string(std::string_view name);
std::optional<SelectionCriterion> criterion_from_string(std::string_view name);

/// Patches kept to represent one scan.
struct SelectionSet {
    std::string scan_id;
    SelectionMethod method = SelectionMethod::gmm;
    double fraction = 1.0;
    std::uint64_t seed = 0;
    std::vector<std::string> retained;  // sorted, unique
};

/// Member ids and descriptors of one cluster, rows aligned with ids.
struct ClusterMembers {
    std::vector<std::string> ids;
    RowMatrixXd features;
};

/// round(fraction · n), halves away from zero.
std::size_t target_count(double fraction, std::size_t n);

/// Largest-remainder split of `total` across groups proportional to `sizes`.
/// Remainder ties go to the lower group index. Sum is exactly `total`.
std::vector<std::size_t> apportion(const std::vector<std::size_t>& sizes, std::size_t total);

/// Components used for a cluster of n members: min(3, ceil(n / 20)).
int components_for(std::size_t n);

/// Per cluster: fits a GMM and keeps its quota of members with the highest
/// mixture log-density (or nearest to a component mean), ties to the
/// lexicographically lower id.
SelectionSet select_gmm(const std::string& scan_id, const std::vector<ClusterMembers>& clusters, double fraction,
                        std::uint64_t seed, SelectionCriterion criterion = SelectionCriterion::density,
                        int jobs = 1);

/// Same quotas as select_gmm, members drawn uniformly without replacement.
SelectionSet select_random(const std::string& scan_id, const std::vector<std::vector<std::string>>& ids_by_cluster,
                           double fraction, std::uint64_t seed);

/// Groups a scan's descriptors by cluster label.
std::vector<ClusterMembers> members_by_cluster(const ClusterModel& model, const DescriptorSet& set);

struct SelectionOptions {
    SelectionMethod method = SelectionMethod::gmm;
    SelectionCriterion criterion = SelectionCriterion::density;
    double fraction = 0.5;
    std::uint64_t seed = 0;  // root; per-scan seeds are derived from it
};

/// Runs the chosen selection on every clustered scan, in model order.
std::vector<SelectionSet> select_all(const std::vector<ClusterModel>& models, const DescriptorSet& set,
                                     const SelectionOptions& options, int jobs = 1);

std::string selections_to_json(const std::vector<SelectionSet>& selections);
std::vector<SelectionSet> selections_from_json(const std::string& text);

/// Union of the retained ids, sorted.
std::vector<std::string> retained_ids(const std::vector<SelectionSet>& selections);

}  // namespace patchsieve
