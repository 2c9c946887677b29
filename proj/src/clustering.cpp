#include "patchsieve/clustering.hpp"

#include "patchsieve/parallel.hpp"

#include <nlohmann/json.hpp>

#include <cmath>

namespace patchsieve {

using nlohmann::json;

ClusterModel cluster_scan(const std::string& scan_id, const std::vector<std::string>& patch_ids,
                          const RowMatrixXd& features, const SomConfig& cfg) {
    if (static_cast<Eigen::Index>(patch_ids.size()) != features.rows())
        throw UsageError("cluster_scan: one patch id per feature row required");
    ClusterModel model;
    model.scan_id = scan_id;
    model.map_side = cfg.map_side;
    model.seed = cfg.seed;
    model.patch_ids = patch_ids;
    model.weights = som_train(features, cfg);

    const auto raw = som_assign(features, model.weights);
    std::vector<int> units(raw);
    std::sort(units.begin(), units.end());
    model.raw_cluster_count = static_cast<int>(std::unique(units.begin(), units.end()) - units.begin());
    auto merged = merge_small_clusters(features, raw, cfg.min_cluster_fraction);
    model.labels = std::move(merged.labels);
    model.sizes = std::move(merged.sizes);
    model.variance_ratio = variance_ratio(features, model.labels);
    return model;
}

std::map<std::string, std::vector<std::size_t>> rows_by_scan(const DescriptorSet& set) {
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < set.ids.size(); ++i) groups[parse_patch_id(set.ids[i]).scan_id].push_back(i);
    return groups;
}

std::vector<ClusterModel> cluster_all(const DescriptorSet& set, const SomConfig& cfg, int jobs) {
    const auto groups = rows_by_scan(set);
    std::vector<const std::pair<const std::string, std::vector<std::size_t>>*> scans;
    for (const auto& g : groups) scans.push_back(&g);

    std::vector<ClusterModel> models(scans.size());
    parallel_for(scans.size(), jobs, [&](std::size_t s) {
        const auto& [scan_id, rows] = *scans[s];
        RowMatrixXd features(static_cast<Eigen::Index>(rows.size()), set.dim());
        std::vector<std::string> ids;
        ids.reserve(rows.size());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            features.row(static_cast<Eigen::Index>(r)) = set.values.row(static_cast<Eigen::Index>(rows[r])).cast<double>();
            ids.push_back(set.ids[rows[r]]);
        }
        SomConfig scan_cfg = cfg;
        scan_cfg.seed = derive_seed(cfg.seed, "som/" + scan_id);
        models[s] = cluster_scan(scan_id, ids, features, scan_cfg);
    });
    return models;
}

std::string clusters_to_json(const std::vector<ClusterModel>& models, const SomConfig& cfg) {
    json doc;
    doc["format"] = "patchsieve.clusters";
    doc["version"] = 1;
    doc["som"] = {{"map_side", cfg.map_side},
                  {"epochs", cfg.epochs},
                  {"initial_learning_rate", cfg.initial_learning_rate},
                  {"initial_neighborhood_radius", cfg.radius0()},
                  {"min_cluster_fraction", cfg.min_cluster_fraction},
                  {"seed", cfg.seed}};
    json scans = json::array();
    for (const auto& m : models) {
        json s;
        s["scan_id"] = m.scan_id;
        s["map_side"] = m.map_side;
        s["seed"] = m.seed;
        s["raw_cluster_count"] = m.raw_cluster_count;
        s["cluster_count"] = m.cluster_count();
        s["cluster_sizes"] = m.sizes;
        if (std::isinf(m.variance_ratio)) {
            s["variance_ratio"] = nullptr;
            s["variance_ratio_infinite"] = true;
        } else {
            s["variance_ratio"] = m.variance_ratio;
            s["variance_ratio_infinite"] = false;
        }
        json labels = json::object();
        for (std::size_t i = 0; i < m.patch_ids.size(); ++i) labels[m.patch_ids[i]] = m.labels[i];
        s["labels"] = std::move(labels);
        scans.push_back(std::move(s));
    }
    doc["scans"] = std::move(scans);
    return doc.dump(1) + "\n";
}

std::vector<ClusterModel> clusters_from_json(const std::string& text) {
    try {
        const json doc = json::parse(text);
        if (doc.at("format") != "patchsieve.clusters") throw InputError("not a clusters document");
        std::vector<ClusterModel> models;
        for (const auto& s : doc.at("scans")) {
            ClusterModel m;
            m.scan_id = s.at("scan_id").get<std::string>();
            m.map_side = s.at("map_side").get<int>();
            m.seed = s.at("seed").get<std::uint64_t>();
            m.raw_cluster_count = s.at("raw_cluster_count").get<int>();
            m.sizes = s.at("cluster_sizes").get<std::vector<std::size_t>>();
            m.variance_ratio = s.at("variance_ratio_infinite").get<bool>()
                                   ? std::numeric_limits<double>::infinity()
                                   : s.at("variance_ratio").get<double>();
            // nlohmann objects iterate in key order, matching lexicographic ids.
            for (const auto& [id, label] : s.at("labels").items()) {
                const int l = label.get<int>();
                if (l < 0 || l >= static_cast<int>(m.sizes.size()))
                    throw InputError("cluster label out of range for patch '" + id + "'");
                m.patch_ids.push_back(id);
                m.labels.push_back(l);
            }
            models.push_back(std::move(m));
        }
        return models;
    } catch (const json::exception& e) {
        throw InputError(std::string("malformed clusters document: ") + e.what());
    }
}

}  // namespace patchsieve
