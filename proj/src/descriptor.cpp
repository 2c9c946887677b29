#include "patchsieve/descriptor.hpp"

#include <unordered_map>
#include <unordered_set>

namespace patchsieve {

std::string_view to_string(DescriptorKind kind) {
    switch (kind) {
        case DescriptorKind::lbp36: return "lbp36";
        case DescriptorKind::deep4096: return "deep4096";
        case DescriptorKind::pca_reduced: return "pca_reduced";
    }
    return "unknown";
}

std::optional<DescriptorKind> kind_from_code(std::uint32_t code) {
    switch (code) {
        case 1: return DescriptorKind::lbp36;
        case 2: return DescriptorKind::deep4096;
        case 3: return DescriptorKind::pca_reduced;
        default: return std::nullopt;
    }
}

std::optional<DescriptorKind> kind_from_string(std::string_view name) {
    for (auto kind : {DescriptorKind::lbp36, DescriptorKind::deep4096, DescriptorKind::pca_reduced})
        if (to_string(kind) == name) return kind;
    return std::nullopt;
}

Descriptor DescriptorSet::at(std::size_t i) const {
    return Descriptor{ids.at(i), kind, values.row(static_cast<Eigen::Index>(i)).transpose()};
}

void DescriptorSet::validate() const {
    if (values.rows() != static_cast<Eigen::Index>(ids.size()))
        throw InputError("descriptor set has " + std::to_string(ids.size()) + " ids but " +
                         std::to_string(values.rows()) + " rows");
    if (kind == DescriptorKind::lbp36 && !ids.empty() && values.cols() != 36)
        throw InputError("lbp36 descriptors must have 36 values, got " + std::to_string(values.cols()));
    if (kind == DescriptorKind::deep4096 && !ids.empty() && values.cols() != 4096)
        throw InputError("deep4096 descriptors must have 4096 values, got " + std::to_string(values.cols()));
    std::unordered_set<std::string_view> seen;
    for (const auto& id : ids)
        if (!seen.insert(id).second) throw InputError("duplicate descriptor id '" + id + "'");
    if (!values.allFinite()) throw InputError("descriptor set contains non-finite values");
}

DescriptorSet make_descriptor_set(const std::vector<Descriptor>& descriptors) {
    DescriptorSet set;
    if (descriptors.empty()) return set;
    set.kind = descriptors.front().kind;
    const auto dim = descriptors.front().dim();
    set.values.resize(static_cast<Eigen::Index>(descriptors.size()), dim);
    set.ids.reserve(descriptors.size());
    for (std::size_t i = 0; i < descriptors.size(); ++i) {
        const auto& d = descriptors[i];
        if (d.kind != set.kind || d.dim() != dim)
            throw InputError("descriptor '" + d.id + "' differs in kind or dimension from the first");
        set.ids.push_back(d.id);
        set.values.row(static_cast<Eigen::Index>(i)) = d.values.transpose();
    }
    return set;
}

DescriptorSet subset(const DescriptorSet& set, const std::vector<std::string>& ids) {
    std::unordered_map<std::string_view, Eigen::Index> row_of;
    row_of.reserve(set.ids.size());
    for (std::size_t i = 0; i < set.ids.size(); ++i) row_of.emplace(set.ids[i], static_cast<Eigen::Index>(i));

    DescriptorSet out;
    out.kind = set.kind;
    out.ids = ids;
    out.values.resize(static_cast<Eigen::Index>(ids.size()), set.dim());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        auto it = row_of.find(ids[i]);
        if (it == row_of.end()) throw InputError("id '" + ids[i] + "' not present in descriptor set");
        out.values.row(static_cast<Eigen::Index>(i)) = set.values.row(it->second);
    }
    return out;
}

}  // namespace patchsieve
