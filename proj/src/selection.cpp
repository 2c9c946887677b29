#include "patchsieve/selection.hpp"

#include "patchsieve/gmm.hpp"
#include "patchsieve/parallel.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_map>

namespace patchsieve {

using nlohmann::json;

std::string_view to_string(SelectionMethod method) {
    switch (method) {
        case SelectionMethod::gmm: return "gmm";
        case SelectionMethod::random: return "random";
        case SelectionMethod::all: return "all";
    }
    return "unknown";
}

std::string_view to_string(SelectionCriterion criterion) {
    return criterion == SelectionCriterion::density ? "density" : "nearest-mean";
}

std::optional<SelectionMethod> method_from_string(std::string_view name) {
    for (auto m : {SelectionMethod::gmm, SelectionMethod::random, SelectionMethod::all})
        if (to_string(m) == name) return m;
    return std::nullopt;
}

std::optional<SelectionCriterion> criterion_from_string(std::string_view name) {
    for (auto c : {SelectionCriterion::density, SelectionCriterion::nearest_mean})
        if (to_string(c) == name) return c;
    return std::nullopt;
}

std::size_t target_count(double fraction, std::size_t n) {
    return static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
}

std::vector<std::size_t> apportion(const std::vector<std::size_t>& sizes, std::size_t total) {
    const std::size_t n = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
    std::vector<std::size_t> quotas(sizes.size(), 0);
    if (n == 0) return quotas;
    if (total > n) throw UsageError("apportion: total exceeds population");

    // Exact integer arithmetic: quota = floor(total·size/n), remainder = (total·size) mod n.
    std::vector<std::pair<std::size_t, std::size_t>> remainders;  // (remainder, group)
    std::size_t assigned = 0;
    for (std::size_t g = 0; g < sizes.size(); ++g) {
        const unsigned __int128 product = static_cast<unsigned __int128>(total) * sizes[g];
        quotas[g] = static_cast<std::size_t>(product / n);
        remainders.emplace_back(static_cast<std::size_t>(product % n), g);
        assigned += quotas[g];
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t i = 0; assigned < total; ++i, ++assigned) quotas[remainders[i].second] += 1;
    return quotas;
}

int components_for(std::size_t n) {
    return static_cast<int>(std::min<std::size_t>(3, (n + 19) / 20));
}

namespace {

void check_fraction(double fraction) {
    if (!(fraction > 0.0 && fraction <= 1.0)) throw UsageError("selection fraction must lie in (0, 1]");
}

std::vector<std::string> keep_best(const std::vector<std::string>& ids, const Eigen::VectorXd& score,
                                   std::size_t quota) {
    std::vector<std::size_t> order(ids.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto sa = score[static_cast<Eigen::Index>(a)];
        const auto sb = score[static_cast<Eigen::Index>(b)];
        if (sa != sb) return sa > sb;
        return ids[a] < ids[b];
    });
    std::vector<std::string> kept;
    kept.reserve(quota);
    for (std::size_t i = 0; i < quota; ++i) kept.push_back(ids[order[i]]);
    return kept;
}

}  // namespace

SelectionSet select_gmm(const std::string& scan_id, const std::vector<ClusterMembers>& clusters, double fraction,
                        std::uint64_t seed, SelectionCriterion criterion, int jobs) {
    check_fraction(fraction);
    if (clusters.empty()) throw UsageError("select_gmm: scan '" + scan_id + "' has no clusters");
    std::vector<std::size_t> sizes;
    for (const auto& c : clusters) {
        if (static_cast<Eigen::Index>(c.ids.size()) != c.features.rows())
            throw UsageError("select_gmm: cluster ids and feature rows differ");
        sizes.push_back(c.ids.size());
    }
    const std::size_t n = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
    const auto quotas = apportion(sizes, target_count(fraction, n));

    std::vector<std::vector<std::string>> kept(clusters.size());
    parallel_for(clusters.size(), jobs, [&](std::size_t c) {
        const auto& members = clusters[c];
        if (quotas[c] == 0) return;
        if (quotas[c] == members.ids.size()) {
            kept[c] = members.ids;
            return;
        }
        const auto model = gmm_fit(members.features, components_for(members.ids.size()),
                                   derive_seed(seed, "gmm/cluster/" + std::to_string(c)));
        Eigen::VectorXd score;
        if (criterion == SelectionCriterion::density) {
            score = gmm_log_density(model, members.features);
        } else {
            score.resize(members.features.rows());
            for (Eigen::Index i = 0; i < members.features.rows(); ++i)
                score[i] = -(model.means.rowwise() - members.features.row(i)).rowwise().squaredNorm().minCoeff();
        }
        kept[c] = keep_best(members.ids, score, quotas[c]);
    });

    SelectionSet out{scan_id, SelectionMethod::gmm, fraction, seed, {}};
    for (auto& k : kept) out.retained.insert(out.retained.end(), k.begin(), k.end());
    std::sort(out.retained.begin(), out.retained.end());
    return out;
}

SelectionSet select_random(const std::string& scan_id, const std::vector<std::vector<std::string>>& ids_by_cluster,
                           double fraction, std::uint64_t seed) {
    check_fraction(fraction);
    std::vector<std::size_t> sizes;
    for (const auto& ids : ids_by_cluster) sizes.push_back(ids.size());
    const std::size_t n = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
    const auto quotas = apportion(sizes, target_count(fraction, n));

    std::mt19937_64 rng(seed);
    SelectionSet out{scan_id, SelectionMethod::random, fraction, seed, {}};
    for (std::size_t c = 0; c < ids_by_cluster.size(); ++c) {
        auto pool = ids_by_cluster[c];
        // Partial Fisher-Yates: the first quota slots are a uniform sample.
        for (std::size_t i = 0; i < quotas[c]; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(bounded(rng, pool.size() - i));
            std::swap(pool[i], pool[j]);
        }
        out.retained.insert(out.retained.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(quotas[c]));
    }
    std::sort(out.retained.begin(), out.retained.end());
    return out;
}

std::vector<ClusterMembers> members_by_cluster(const ClusterModel& model, const DescriptorSet& set) {
    std::unordered_map<std::string_view, Eigen::Index> row_of;
    for (std::size_t i = 0; i < set.ids.size(); ++i) row_of.emplace(set.ids[i], static_cast<Eigen::Index>(i));

    std::vector<std::vector<std::size_t>> members(model.sizes.size());
    for (std::size_t i = 0; i < model.patch_ids.size(); ++i) {
        if (model.labels[i] < 0 || static_cast<std::size_t>(model.labels[i]) >= members.size())
            throw InputError("cluster label out of range");
        members[static_cast<std::size_t>(model.labels[i])].push_back(i);
    }
    std::vector<ClusterMembers> out(members.size());
    for (std::size_t c = 0; c < members.size(); ++c) {
        auto& dst = out[c];
        dst.features.resize(static_cast<Eigen::Index>(members[c].size()), set.dim());
        for (std::size_t r = 0; r < members[c].size(); ++r) {
            const auto& id = model.patch_ids[members[c][r]];
            auto it = row_of.find(id);
            if (it == row_of.end()) throw InputError("clustered patch '" + id + "' missing from features");
            dst.ids.push_back(id);
            dst.features.row(static_cast<Eigen::Index>(r)) = set.values.row(it->second).cast<double>();
        }
    }
    return out;
}

std::vector<SelectionSet> select_all(const std::vector<ClusterModel>& models, const DescriptorSet& set,
                                     const SelectionOptions& options, int jobs) {
    std::vector<SelectionSet> out(models.size());
    parallel_for(models.size(), jobs, [&](std::size_t s) {
        const auto& model = models[s];
        const auto seed = derive_seed(options.seed, std::string("select/") + std::string(to_string(options.method)) +
                                                        "/" + model.scan_id);
        auto clusters = members_by_cluster(model, set);
        switch (options.method) {
            case SelectionMethod::gmm:
                out[s] = select_gmm(model.scan_id, clusters, options.fraction, seed, options.criterion);
                break;
            case SelectionMethod::random: {
                std::vector<std::vector<std::string>> ids;
                for (auto& c : clusters) ids.push_back(std::move(c.ids));
                out[s] = select_random(model.scan_id, ids, options.fraction, seed);
                break;
            }
            case SelectionMethod::all: {
                SelectionSet all{model.scan_id, SelectionMethod::all, 1.0, seed, model.patch_ids};
                std::sort(all.retained.begin(), all.retained.end());
                out[s] = std::move(all);
                break;
            }
        }
    });
    return out;
}

std::string selections_to_json(const std::vector<SelectionSet>& selections) {
    json doc;
    doc["format"] = "patchsieve.selection";
    doc["version"] = 1;
    json scans = json::array();
    for (const auto& s : selections) {
        scans.push_back({{"scan_id", s.scan_id},
                         {"method", to_string(s.method)},
                         {"fraction", s.fraction},
                         {"seed", s.seed},
                         {"retained", s.retained}});
    }
    doc["scans"] = std::move(scans);
    return doc.dump(1) + "\n";
}

std::vector<SelectionSet> selections_from_json(const std::string& text) {
    try {
        const json doc = json::parse(text);
        if (doc.at("format") != "patchsieve.selection") throw InputError("not a selection document");
        std::vector<SelectionSet> out;
        for (const auto& s : doc.at("scans")) {
            SelectionSet set;
            set.scan_id = s.at("scan_id").get<std::string>();
            const auto method = method_from_string(s.at("method").get<std::string>());
            if (!method) throw InputError("unknown selection method in '" + set.scan_id + "'");
            set.method = *method;
            set.fraction = s.at("fraction").get<double>();
            set.seed = s.at("seed").get<std::uint64_t>();
            set.retained = s.at("retained").get<std::vector<std::string>>();
            out.push_back(std::move(set));
        }
        return out;
    } catch (const json::exception& e) {
        throw InputError(std::string("malformed selection document: ") + e.what());
    }
}

std::vector<std::string> retained_ids(const std::vector<SelectionSet>& selections) {
    std::vector<std::string> ids;
    for (const auto& s : selections) ids.insert(ids.end(), s.retained.begin(), s.retained.end());
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
}

}  // namespace patchsieve
