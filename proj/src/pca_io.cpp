#include "patchsieve/pca.hpp"

#include <nlohmann/json.hpp>

namespace patchsieve {

using nlohmann::json;

namespace {

json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vector_from(const json& j) {
    const auto values = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

std::string pca_to_json(const PcaModel<double>& model) {
    json j;
    j["format"] = "patchsieve.pca";
    j["version"] = 1;
    j["input_dim"] = model.input_dim();
    j["output_dim"] = model.output_dim();
    j["retained_fraction"] = model.retained_fraction;
    j["total_variance"] = model.total_variance;
    j["mean"] = vector_json(model.mean);
    j["explained_variance"] = vector_json(model.explained_variance);
    json rows = json::array();
    for (Eigen::Index r = 0; r < model.components.rows(); ++r)
        rows.push_back(vector_json(model.components.row(r).transpose()));
    j["components"] = std::move(rows);
    return j.dump(1) + "\n";
}

PcaModel<double> pca_from_json(const std::string& text) {
    try {
        const json j = json::parse(text);
        if (j.at("format") != "patchsieve.pca") throw InputError("not a PCA model document");
        PcaModel<double> model;
        model.retained_fraction = j.at("retained_fraction").get<double>();
        model.total_variance = j.at("total_variance").get<double>();
        model.mean = vector_from(j.at("mean"));
        model.explained_variance = vector_from(j.at("explained_variance"));
        const auto& rows = j.at("components");
        const auto d = model.mean.size();
        model.components.resize(static_cast<Eigen::Index>(rows.size()), d);
        for (std::size_t r = 0; r < rows.size(); ++r) {
            const auto row = vector_from(rows[r]);
            if (row.size() != d) throw InputError("PCA component row has wrong length");
            model.components.row(static_cast<Eigen::Index>(r)) = row.transpose();
        }
        if (model.explained_variance.size() != model.components.rows())
            throw InputError("PCA explained_variance length differs from component count");
        return model;
    } catch (const json::exception& e) {
        throw InputError(std::string("malformed PCA model: ") + e.what());
    }
}

}  // namespace patchsieve
