#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace patchsieve {

struct ScanTally {
    std::size_t correct = 0;
    std::size_t total = 0;
};

/// Retrieval accuracies as fractions in [0, 1].
///   eta_p     correct queries / all queries
///   eta_w     mean over scans of the per-scan correct fraction
///   eta_total eta_p * eta_w
struct EvalReport {
    double eta_p = 0.0;
    double eta_w = 0.0;
    double eta_total = 0.0;
    std::map<std::string, ScanTally> per_scan;
    std::size_t n_queries = 0;
};

using Top1 = std::vector<std::pair<std::string, std::string>>;   // query_id -> predicted scan
using Truth = std::map<std::string, std::string>;                // query_id -> true scan

/// Scores rank-1 predictions. Every prediction needs a truth label and every
/// labelled query a prediction. When `expected_scans` is given, each of them
/// must own at least one query.
EvalReport evaluate(const Top1& top1, const Truth& truth,
                    const std::optional<std::vector<std::string>>& expected_scans = std::nullopt);

/// Reads `query_id,scan_id` rows (header required).
Truth truth_from_csv(const std::string& text);

std::string report_to_json(const EvalReport& report);

struct SweepRow {
    double fraction = 1.0;
    std::string method;
    std::string feature;
    EvalReport report;
};

/// Long-format CSV `fraction,method,feature,eta_p,eta_w,eta_total`, accuracies
/// in percent with two decimals, rows sorted by (feature, method, fraction).
/// Duplicate (fraction, method, feature) keys are rejected.
std::string sweep_report(std::vector<SweepRow> rows);

}  // namespace patchsieve
