#include "patchsieve/evaluation.hpp"

#include "patchsieve/common.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>
#include <tuple>

namespace patchsieve {

EvalReport evaluate(const Top1& top1, const Truth& truth, const std::optional<std::vector<std::string>>& expected_scans) {
    EvalReport report;
    std::set<std::string> predicted;
    for (const auto& [query, scan] : top1) {
        auto it = truth.find(query);
        if (it == truth.end()) throw InputError("query '" + query + "' has no truth label");
        if (!predicted.insert(query).second) throw InputError("query '" + query + "' predicted twice");
        auto& tally = report.per_scan[it->second];
        tally.total += 1;
        tally.correct += scan == it->second;
    }
    for (const auto& [query, scan] : truth)
        if (!predicted.count(query)) throw InputError("labelled query '" + query + "' has no prediction");
    if (expected_scans) {
        for (const auto& scan : *expected_scans)
            if (!report.per_scan.count(scan)) throw InputError("scan '" + scan + "' has no queries");
    }
    if (report.per_scan.empty()) throw InputError("nothing to evaluate: no queries");

    std::size_t correct = 0;
    double per_scan_sum = 0.0;
    for (const auto& [scan, tally] : report.per_scan) {
        correct += tally.correct;
        report.n_queries += tally.total;
        per_scan_sum += static_cast<double>(tally.correct) / static_cast<double>(tally.total);
    }
    report.eta_p = static_cast<double>(correct) / static_cast<double>(report.n_queries);
    report.eta_w = per_scan_sum / static_cast<double>(report.per_scan.size());
    report.eta_total = report.eta_p * report.eta_w;
    return report;
}

Truth truth_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line.rfind("query_id,scan_id", 0) != 0)
        throw InputError("truth CSV must start with header query_id,scan_id");
    Truth truth;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos)
            throw InputError("truth CSV line " + std::to_string(line_no) + " needs exactly 2 fields");
        if (!truth.emplace(line.substr(0, comma), line.substr(comma + 1)).second)
            throw InputError("truth CSV line " + std::to_string(line_no) + ": duplicate query id");
    }
    return truth;
}

std::string report_to_json(const EvalReport& report) {
    nlohmann::json j;
    j["eta_p"] = report.eta_p;
    j["eta_w"] = report.eta_w;
    j["eta_total"] = report.eta_total;
    j["n_queries"] = report.n_queries;
    nlohmann::json scans = nlohmann::json::object();
    for (const auto& [scan, tally] : report.per_scan)
        scans[scan] = {{"n_correct", tally.correct}, {"n_total", tally.total}};
    j["per_scan"] = std::move(scans);
    return j.dump(1) + "\n";
}

std::string sweep_report(std::vector<SweepRow> rows) {
    std::sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
        return std::tie(a.feature, a.method, a.fraction) < std::tie(b.feature, b.method, b.fraction);
    });
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& a = rows[i - 1];
        const auto& b = rows[i];
        if (a.feature == b.feature && a.method == b.method && a.fraction == b.fraction)
            throw UsageError("duplicate sweep row for feature '" + a.feature + "', method '" + a.method + "'");
    }
    std::string out = "fraction,method,feature,eta_p,eta_w,eta_total\n";
    char line[256];
    for (const auto& r : rows) {
        std::snprintf(line, sizeof line, "%.2f,%s,%s,%.2f,%.2f,%.2f\n", r.fraction, r.method.c_str(),
                      r.feature.c_str(), 100.0 * r.report.eta_p, 100.0 * r.report.eta_w,
                      100.0 * r.report.eta_total);
        out += line;
    }
    return out;
}

}  // namespace patchsieve
