#pragma once

#include "patchsieve/common.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace patchsieve {

// Numeric codes are part of the feature file format.
enum class DescriptorKind : std::uint32_t { lbp36 = 1, deep4096 = 2, pca_reduced = 3 };

std::string_view to_string(DescriptorKind kind);
std::optional<DescriptorKind> kind_from_code(std::uint32_t code);
std::optional<DescriptorKind> kind_from_string(std::string_view name);

struct Descriptor {
    std::string id;
    DescriptorKind kind = DescriptorKind::lbp36;
    Eigen::VectorXf values;

    Eigen::Index dim() const { return values.size(); }
};

/// Homogeneous batch of descriptors: one row per id.
struct DescriptorSet {
    DescriptorKind kind = DescriptorKind::lbp36;
    std::vector<std::string> ids;
    RowMatrixXf values;

    std::size_t size() const { return ids.size(); }
    Eigen::Index dim() const { return values.cols(); }
    bool empty() const { return ids.empty(); }

    Descriptor at(std::size_t i) const;

    /// Throws InputError unless ids are unique, rows match ids, values are
    /// finite and lbp36 sets have 36 columns.
    void validate() const;

    friend bool operator==(const DescriptorSet& a, const DescriptorSet& b) {
        return a.kind == b.kind && a.ids == b.ids && a.values.rows() == b.values.rows() &&
               a.values.cols() == b.values.cols() && a.values == b.values;
    }
};

/// Stacks individual descriptors into a set; all must share kind and dim.
DescriptorSet make_descriptor_set(const std::vector<Descriptor>& descriptors);

/// Rows whose ids are listed, in the order given. Throws InputError for an
/// unknown id.
DescriptorSet subset(const DescriptorSet& set, const std::vector<std::string>& ids);

}  // namespace patchsieve
