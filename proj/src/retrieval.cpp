#include "patchsieve/retrieval.hpp"

#include "patchsieve/feature_file.hpp"
#include "patchsieve/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace patchsieve {

using nlohmann::json;

namespace {

constexpr char kIndexMagic[4] = {'P', 'S', 'I', 'X'};

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

}  // namespace

RetrievalIndex::RetrievalIndex(DescriptorSet entries, std::vector<std::string> scan_ids, json metadata)
    : entries_(std::move(entries)), scan_ids_(std::move(scan_ids)), metadata_(std::move(metadata)) {
    entries_.validate();
    if (scan_ids_.size() != entries_.size()) throw UsageError("one scan id per index entry required");
    if (!std::is_sorted(entries_.ids.begin(), entries_.ids.end()))
        throw InputError("index entries must be sorted by id");
}

std::vector<Match> RetrievalIndex::query(const Eigen::Ref<const Eigen::VectorXf>& q, std::size_t k) const {
    if (size() == 0) throw InputError("query against an empty index");
    if (q.size() != dim())
        throw InputError("query has dimension " + std::to_string(q.size()) + ", index " + std::to_string(dim()));
    if (k < 1 || k > size())
        throw UsageError("k must lie in [1, " + std::to_string(size()) + "], got " + std::to_string(k));

    const Eigen::VectorXd query = q.cast<double>();
    const auto d = static_cast<std::size_t>(dim());
    const float* base = entries_.values.data();
    std::vector<std::pair<double, std::size_t>> scored(size());
    for (std::size_t i = 0; i < size(); ++i) {
        const float* row = base + i * d;
        double sum = 0;
        for (std::size_t j = 0; j < d; ++j) {
            const double t = static_cast<double>(row[j]) - query[static_cast<Eigen::Index>(j)];
            sum += t * t;
        }
        scored[i] = {sum, i};
    }
    // Row order is id order, so comparing indices breaks ties by id.
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end());

    std::vector<Match> out;
    out.reserve(k);
    for (std::size_t r = 0; r < k; ++r) {
        const auto i = scored[r].second;
        out.push_back(Match{entries_.ids[i], scan_ids_[i], std::sqrt(scored[r].first), static_cast<int>(r + 1)});
    }
    return out;
}

std::vector<Match> RetrievalIndex::query(const Descriptor& q, std::size_t k) const {
    if (q.kind != kind())
        throw InputError("query kind " + std::string(to_string(q.kind)) + " differs from index kind " +
                         std::string(to_string(kind())));
    return query(q.values, k);
}

std::vector<std::vector<Match>> RetrievalIndex::query_batch(const DescriptorSet& queries, std::size_t k,
                                                            int jobs) const {
    if (queries.kind != kind())
        throw InputError("query kind " + std::string(to_string(queries.kind)) + " differs from index kind " +
                         std::string(to_string(kind())));
    std::vector<std::vector<Match>> out(queries.size());
    parallel_for(queries.size(), jobs, [&](std::size_t i) {
        out[i] = query(queries.values.row(static_cast<Eigen::Index>(i)).transpose(), k);
    });
    return out;
}

RetrievalIndex build_index(const DescriptorSet& descriptors, const std::vector<SelectionSet>* selection,
                           json metadata) {
    descriptors.validate();
    std::vector<std::string> ids;
    if (selection) {
        ids = retained_ids(*selection);
    } else {
        ids = descriptors.ids;
        std::sort(ids.begin(), ids.end());
    }
    DescriptorSet entries = subset(descriptors, ids);
    std::vector<std::string> scans;
    scans.reserve(entries.size());
    for (const auto& id : entries.ids) scans.push_back(parse_patch_id(id).scan_id);

    if (!metadata.is_object()) metadata = json::object();
    metadata["count"] = entries.size();
    if (selection) {
        json sel = json::object();
        if (!selection->empty()) {
            sel["method"] = to_string(selection->front().method);
            sel["fraction"] = selection->front().fraction;
        }
        json seeds = json::object();
        for (const auto& s : *selection) seeds[s.scan_id] = s.seed;
        sel["seeds"] = std::move(seeds);
        metadata["selection"] = std::move(sel);
    } else {
        metadata["selection"] = {{"method", "all"}, {"fraction", 1.0}};
    }
    return RetrievalIndex(std::move(entries), std::move(scans), std::move(metadata));
}

std::string encode_index(const RetrievalIndex& index) {
    DescriptorSet entries;
    entries.kind = index.kind();
    entries.ids = index.ids();
    entries.values = index.vectors();
    std::string out = encode_features(entries);
    const std::string meta = index.metadata().dump();
    out += meta;
    const std::uint64_t length = meta.size();
    char buf[8];
    std::memcpy(buf, &length, 8);
    out.append(buf, 8);
    out.append(kIndexMagic, 4);
    return out;
}

RetrievalIndex decode_index(std::string_view bytes) {
    using Reason = FeatureFormatError::Reason;
    if (bytes.size() < 12 || std::memcmp(bytes.data() + bytes.size() - 4, kIndexMagic, 4) != 0)
        throw FeatureFormatError(Reason::truncated, "index trailer missing: file truncated or not an index");
    std::uint64_t length = 0;
    std::memcpy(&length, bytes.data() + bytes.size() - 12, 8);
    if (length > bytes.size() - 12)
        throw FeatureFormatError(Reason::truncated, "index metadata length exceeds file size");
    const std::size_t payload = bytes.size() - 12 - static_cast<std::size_t>(length);
    DescriptorSet entries = decode_features(bytes.substr(0, payload));
    json metadata;
    try {
        metadata = json::parse(bytes.substr(payload, static_cast<std::size_t>(length)));
    } catch (const json::exception& e) {
        throw InputError(std::string("corrupt index metadata: ") + e.what());
    }
    std::vector<std::string> scans;
    scans.reserve(entries.size());
    for (const auto& id : entries.ids) scans.push_back(parse_patch_id(id).scan_id);
    return RetrievalIndex(std::move(entries), std::move(scans), std::move(metadata));
}

void save_index(const RetrievalIndex& index, const std::string& path) { write_file_atomic(path, encode_index(index)); }

RetrievalIndex load_index(const std::string& path) {
    try {
        return decode_index(read_file(path));
    } catch (const FeatureFormatError& e) {
        throw FeatureFormatError(e.reason(), path + ": " + e.what());
    }
}

std::string matches_to_csv(const std::vector<std::string>& query_ids,
                           const std::vector<std::vector<Match>>& results) {
    if (query_ids.size() != results.size()) throw UsageError("one result list per query id required");
    std::string out = "query_id,rank,patch_id,scan_id,distance\n";
    char number[64];
    for (std::size_t q = 0; q < results.size(); ++q) {
        if (query_ids[q].find_first_of(",\n\"") != std::string::npos)
            throw InputError("query id '" + query_ids[q] + "' cannot be written to CSV");
        for (const auto& m : results[q]) {
            std::snprintf(number, sizeof number, "%.9g", m.distance);
            out += query_ids[q] + "," + std::to_string(m.rank) + "," + m.patch_id + "," + m.scan_id + "," + number + "\n";
        }
    }
    return out;
}

std::vector<std::pair<std::string, std::string>> top1_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line.rfind("query_id,rank,patch_id,scan_id,distance", 0) != 0)
        throw InputError("results CSV must start with header query_id,rank,patch_id,scan_id,distance");
    std::vector<std::pair<std::string, std::string>> out;
    std::unordered_set<std::string> seen;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != 5) throw InputError("results CSV line " + std::to_string(line_no) + " needs 5 fields");
        if (fields[1] != "1") continue;
        if (!seen.insert(fields[0]).second)
            throw InputError("query '" + fields[0] + "' has more than one rank-1 match");
        out.emplace_back(fields[0], fields[3]);
    }
    return out;
}

}  // namespace patchsieve
