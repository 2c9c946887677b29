#include "patchsieve/pipeline.hpp"

#include "patchsieve/feature_file.hpp"
#include "patchsieve/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <initializer_list>
#include <set>
#include <sstream>

namespace patchsieve {

namespace fs = std::filesystem;
using nlohmann::json;

void PipelineConfig::validate() const {
    tiling.validate();
    lbp.validate();
    som.validate();
    if (!(pca.retained_fraction > 0 && pca.retained_fraction <= 1))
        throw UsageError("pca.retained_fraction must lie in (0, 1]");
    auto check_fraction = [](double f) {
        if (!(f > 0 && f <= 1)) throw UsageError("selection fractions must lie in (0, 1]");
    };
    check_fraction(selection.fraction);
    for (double f : selection.fractions) check_fraction(f);
    if (selection.fractions.empty()) throw UsageError("selection.fractions must not be empty");
    if (selection.methods.empty()) throw UsageError("selection.methods must not be empty");
    if (retrieval.k < 1) throw UsageError("retrieval.k must be >= 1");
    if (jobs < 1) throw UsageError("jobs must be >= 1");
}

namespace {

void reject_unknown(const json& section, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!section.is_object()) throw UsageError("config section '" + where + "' must be an object");
    for (const auto& [key, value] : section.items()) {
        const bool known = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; });
        if (!known) throw UsageError("unknown config key '" + (where.empty() ? key : where + "." + key) + "'");
    }
}

template <typename T>
void read_key(const json& section, const char* key, T& out) {
    if (auto it = section.find(key); it != section.end()) out = it->get<T>();
}

SelectionMethod parse_method(const std::string& name) {
    auto m = method_from_string(name);
    if (!m) throw UsageError("unknown selection method '" + name + "'");
    return *m;
}

}  // namespace

PipelineConfig config_from_json(const json& doc, PipelineConfig cfg) {
    try {
        reject_unknown(doc, "",
                       {"tiling", "lbp", "pca", "som", "selection", "retrieval", "eval", "paths", "seed", "jobs"});
        if (auto it = doc.find("tiling"); it != doc.end()) {
            reject_unknown(*it, "tiling",
                           {"patch_size", "stride", "downsample_to", "bg_threshold", "bg_brightness_cutoff"});
            read_key(*it, "patch_size", cfg.tiling.patch_size);
            read_key(*it, "stride", cfg.tiling.stride);
            read_key(*it, "downsample_to", cfg.tiling.downsample_to);
            read_key(*it, "bg_threshold", cfg.tiling.bg_threshold);
            read_key(*it, "bg_brightness_cutoff", cfg.tiling.bg_brightness_cutoff);
        }
        if (auto it = doc.find("lbp"); it != doc.end()) {
            reject_unknown(*it, "lbp", {"scales", "normalize"});
            read_key(*it, "normalize", cfg.lbp.normalize);
            if (auto s = it->find("scales"); s != it->end()) {
                cfg.lbp.scales.clear();
                for (const auto& pair : *s) {
                    if (!pair.is_array() || pair.size() != 2)
                        throw UsageError("lbp.scales entries must be [radius, neighbors]");
                    cfg.lbp.scales.push_back({pair[0].get<double>(), pair[1].get<int>()});
                }
            }
        }
        if (auto it = doc.find("pca"); it != doc.end()) {
            reject_unknown(*it, "pca", {"retained_fraction"});
            read_key(*it, "retained_fraction", cfg.pca.retained_fraction);
        }
        if (auto it = doc.find("som"); it != doc.end()) {
            reject_unknown(*it, "som",
                           {"map_side", "epochs", "initial_learning_rate", "initial_neighborhood_radius",
                            "min_cluster_fraction"});
            read_key(*it, "map_side", cfg.som.map_side);
            read_key(*it, "epochs", cfg.som.epochs);
            read_key(*it, "initial_learning_rate", cfg.som.initial_learning_rate);
            read_key(*it, "initial_neighborhood_radius", cfg.som.initial_neighborhood_radius);
            read_key(*it, "min_cluster_fraction", cfg.som.min_cluster_fraction);
        }
        if (auto it = doc.find("selection"); it != doc.end()) {
            reject_unknown(*it, "selection", {"method", "criterion", "fraction", "fractions", "methods"});
            if (auto m = it->find("method"); m != it->end()) cfg.selection.method = parse_method(m->get<std::string>());
            if (auto c = it->find("criterion"); c != it->end()) {
                auto crit = criterion_from_string(c->get<std::string>());
                if (!crit) throw UsageError("unknown selection criterion '" + c->get<std::string>() + "'");
                cfg.selection.criterion = *crit;
            }
            read_key(*it, "fraction", cfg.selection.fraction);
            read_key(*it, "fractions", cfg.selection.fractions);
            if (auto ms = it->find("methods"); ms != it->end()) {
                cfg.selection.methods.clear();
                for (const auto& m : *ms) cfg.selection.methods.push_back(parse_method(m.get<std::string>()));
            }
        }
        if (auto it = doc.find("retrieval"); it != doc.end()) {
            reject_unknown(*it, "retrieval", {"k"});
            read_key(*it, "k", cfg.retrieval.k);
        }
        if (auto it = doc.find("eval"); it != doc.end()) {
            reject_unknown(*it, "eval", {"include_full"});
            read_key(*it, "include_full", cfg.eval.include_full);
        }
        if (auto it = doc.find("paths"); it != doc.end()) {
            reject_unknown(*it, "paths", {"work_dir"});
            read_key(*it, "work_dir", cfg.paths.work_dir);
        }
        read_key(doc, "seed", cfg.seed);
        read_key(doc, "jobs", cfg.jobs);
    } catch (const json::exception& e) {
        throw UsageError(std::string("invalid config value: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

json config_to_json(const PipelineConfig& cfg) {
    json scales = json::array();
    for (const auto& s : cfg.lbp.scales) scales.push_back({s.radius, s.neighbors});
    json methods = json::array();
    for (auto m : cfg.selection.methods) methods.push_back(to_string(m));
    return {
        {"tiling",
         {{"patch_size", cfg.tiling.patch_size},
          {"stride", cfg.tiling.stride},
          {"downsample_to", cfg.tiling.downsample_to},
          {"bg_threshold", cfg.tiling.bg_threshold},
          {"bg_brightness_cutoff", cfg.tiling.bg_brightness_cutoff}}},
        {"lbp", {{"scales", scales}, {"normalize", cfg.lbp.normalize}}},
        {"pca", {{"retained_fraction", cfg.pca.retained_fraction}}},
        {"som",
         {{"map_side", cfg.som.map_side},
          {"epochs", cfg.som.epochs},
          {"initial_learning_rate", cfg.som.initial_learning_rate},
          {"initial_neighborhood_radius", cfg.som.radius0()},
          {"min_cluster_fraction", cfg.som.min_cluster_fraction}}},
        {"selection",
         {{"method", to_string(cfg.selection.method)},
          {"criterion", to_string(cfg.selection.criterion)},
          {"fraction", cfg.selection.fraction},
          {"fractions", cfg.selection.fractions},
          {"methods", methods}}},
        {"retrieval", {{"k", cfg.retrieval.k}}},
        {"eval", {{"include_full", cfg.eval.include_full}}},
        {"paths", {{"work_dir", cfg.paths.work_dir}}},
        {"seed", cfg.seed},
        {"jobs", cfg.jobs},
    };
}

std::uint64_t som_seed(const PipelineConfig& cfg) { return derive_seed(cfg.seed, "som"); }
std::uint64_t selection_seed(const PipelineConfig& cfg) { return derive_seed(cfg.seed, "select"); }

// --- tiling artifacts -------------------------------------------------------

std::vector<TileManifestEntry> write_scan_tiles(const Image& scan, const std::string& scan_id,
                                                const TilingConfig& cfg, const std::string& out_dir, int jobs) {
    fs::create_directories(out_dir);
    const auto records = tile_and_measure(scan, scan_id, cfg, jobs);
    std::vector<TileManifestEntry> entries(records.size());
    parallel_for(records.size(), jobs, [&](std::size_t i) {
        const auto& r = records[i];
        auto& e = entries[i];
        e.id = r.patch.id();
        e.scan_id = scan_id;
        e.grid_x = r.patch.grid_x;
        e.grid_y = r.patch.grid_y;
        e.file = e.id + ".png";
        e.background_ratio = r.background_ratio;
        e.retained = r.retained;
        write_png(r.patch.pixels, (fs::path(out_dir) / e.file).string());
    });
    return entries;
}

std::string tile_manifest_to_json(const TileManifest& manifest) {
    json patches = json::array();
    for (const auto& p : manifest.patches) {
        patches.push_back({{"id", p.id},
                           {"scan_id", p.scan_id},
                           {"grid_x", p.grid_x},
                           {"grid_y", p.grid_y},
                           {"file", p.file},
                           {"background_ratio", p.background_ratio},
                           {"retained", p.retained}});
    }
    json doc;
    doc["format"] = "patchsieve.tiles";
    doc["version"] = 1;
    doc["tiling"] = {{"patch_size", manifest.tiling.patch_size},
                     {"stride", manifest.tiling.stride},
                     {"downsample_to", manifest.tiling.downsample_to},
                     {"bg_threshold", manifest.tiling.bg_threshold},
                     {"bg_brightness_cutoff", manifest.tiling.bg_brightness_cutoff}};
    doc["patches"] = std::move(patches);
    return doc.dump(1) + "\n";
}

TileManifest tile_manifest_from_json(const std::string& text) {
    try {
        const json doc = json::parse(text);
        if (doc.at("format") != "patchsieve.tiles") throw InputError("not a tile manifest");
        TileManifest m;
        const auto& t = doc.at("tiling");
        m.tiling.patch_size = t.at("patch_size").get<int>();
        m.tiling.stride = t.at("stride").get<int>();
        m.tiling.downsample_to = t.at("downsample_to").get<int>();
        m.tiling.bg_threshold = t.at("bg_threshold").get<double>();
        m.tiling.bg_brightness_cutoff = t.at("bg_brightness_cutoff").get<int>();
        std::set<std::string> seen;
        for (const auto& p : doc.at("patches")) {
            TileManifestEntry e;
            e.id = p.at("id").get<std::string>();
            e.scan_id = p.at("scan_id").get<std::string>();
            e.grid_x = p.at("grid_x").get<int>();
            e.grid_y = p.at("grid_y").get<int>();
            e.file = p.at("file").get<std::string>();
            e.background_ratio = p.at("background_ratio").get<double>();
            e.retained = p.at("retained").get<bool>();
            if (!seen.insert(e.id).second) throw InputError("duplicate patch id '" + e.id + "' in manifest");
            m.patches.push_back(std::move(e));
        }
        return m;
    } catch (const json::exception& e) {
        throw InputError(std::string("malformed tile manifest: ") + e.what());
    }
}

DescriptorSet lbp_descriptors(const std::vector<Patch>& patches, const LbpConfig& cfg, int jobs) {
    std::vector<Descriptor> out(patches.size());
    parallel_for(patches.size(), jobs, [&](std::size_t i) { out[i] = lbp_descriptor(patches[i], cfg); });
    if (out.empty()) return DescriptorSet{};
    return make_descriptor_set(out);
}

DescriptorSet extract_lbp_from_manifest(const std::string& manifest_path, const LbpConfig& cfg, int jobs) {
    const auto manifest = tile_manifest_from_json(read_file(manifest_path));
    const fs::path root = fs::path(manifest_path).parent_path();
    std::vector<const TileManifestEntry*> kept;
    for (const auto& p : manifest.patches)
        if (p.retained) kept.push_back(&p);
    std::vector<Descriptor> out(kept.size());
    parallel_for(kept.size(), jobs, [&](std::size_t i) {
        Patch patch{kept[i]->scan_id, kept[i]->grid_x, kept[i]->grid_y, read_image((root / kept[i]->file).string())};
        if (patch.pixels.width != patch.pixels.height)
            throw InputError("patch '" + kept[i]->id + "' is not square");
        out[i] = lbp_descriptor(patch, cfg);
        out[i].id = kept[i]->id;
    });
    if (out.empty()) throw InputError("manifest '" + manifest_path + "' lists no retained patches");
    return make_descriptor_set(out);
}

DescriptorSet extract_lbp_from_directory(const std::string& dir, const LbpConfig& cfg, int downsample_to,
                                         int jobs) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        auto ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
        if (ext == ".png" || ext == ".tif" || ext == ".tiff" || ext == ".bmp" || ext == ".pgm" || ext == ".ppm")
            files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw InputError("no images found in '" + dir + "'");
    std::vector<Descriptor> out(files.size());
    parallel_for(files.size(), jobs, [&](std::size_t i) {
        Image image = read_image(files[i].string());
        if (downsample_to > 0 && image.width == image.height && image.width != downsample_to)
            image = downsample(image, std::min(downsample_to, image.width));
        out[i] = Descriptor{files[i].stem().string(), DescriptorKind::lbp36, lbp_vector(image, cfg).cast<float>()};
        if (out[i].dim() != 36) throw UsageError("lbp scales must yield 36 bins");
    });
    return make_descriptor_set(out);
}

DescriptorSet features_from_csv(const std::string& text, DescriptorKind kind) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line.rfind("id,", 0) != 0) throw InputError("feature CSV must start with 'id,'");
    const auto dim = static_cast<Eigen::Index>(std::count(line.begin(), line.end(), ','));
    std::vector<std::string> ids;
    std::vector<float> values;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string field;
        std::getline(row, field, ',');
        ids.push_back(field);
        Eigen::Index count = 0;
        while (std::getline(row, field, ',')) {
            char* end = nullptr;
            const float v = std::strtof(field.c_str(), &end);
            if (end == field.c_str() || *end != '\0')
                throw InputError("feature CSV line " + std::to_string(line_no) + ": bad number '" + field + "'");
            values.push_back(v);
            ++count;
        }
        if (count != dim)
            throw InputError("feature CSV line " + std::to_string(line_no) + " has " + std::to_string(count) +
                             " values, header declares " + std::to_string(dim));
    }
    DescriptorSet set;
    set.kind = kind;
    set.ids = std::move(ids);
    set.values = Eigen::Map<const RowMatrixXf>(values.data(), static_cast<Eigen::Index>(set.ids.size()), dim);
    set.validate();
    return set;
}

// --- sweeps -----------------------------------------------------------------

Top1 top1_predictions(const DescriptorSet& queries, const std::vector<std::vector<Match>>& results) {
    Top1 top1;
    top1.reserve(results.size());
    for (std::size_t i = 0; i < results.size(); ++i) top1.emplace_back(queries.ids[i], results[i].front().scan_id);
    return top1;
}

namespace {

std::string fraction_tag(double fraction) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%03d", static_cast<int>(std::lround(fraction * 100)));
    return buf;
}

}  // namespace

SweepResult run_sweep(const std::vector<FeatureSource>& sources, const Truth& truth, const PipelineConfig& cfg,
                      const std::optional<std::string>& artifact_dir) {
    cfg.validate();
    SweepResult result;
    auto artifact = [&](const std::string& name) { return (fs::path(*artifact_dir) / name).string(); };

    for (const auto& source : sources) {
        if (source.train.empty()) throw InputError("feature '" + source.name + "' has no training descriptors");
        if (source.train.kind != source.queries.kind || source.train.dim() != source.queries.dim())
            throw InputError("feature '" + source.name + "': training and query descriptors differ in kind or dim");

        SomConfig som = cfg.som;
        som.seed = som_seed(cfg);
        const auto models = cluster_all(source.train, som, cfg.jobs);
        if (artifact_dir) write_file_atomic(artifact(source.name + ".clusters.json"), clusters_to_json(models, som));

        auto run_one = [&](SelectionMethod method, double fraction) {
            const std::string tag = source.name + "." + std::string(to_string(method)) + "." + fraction_tag(fraction);
            RetrievalIndex index;
            json meta = {{"feature", source.name}, {"seed", cfg.seed}};
            if (method == SelectionMethod::all) {
                index = build_index(source.train, nullptr, meta);
            } else {
                SelectionOptions options{method, cfg.selection.criterion, fraction, selection_seed(cfg)};
                const auto selections = select_all(models, source.train, options, cfg.jobs);
                if (artifact_dir) write_file_atomic(artifact(tag + ".selection.json"), selections_to_json(selections));
                index = build_index(source.train, &selections, meta);
            }
            const auto results = index.query_batch(source.queries, std::min(cfg.retrieval.k, index.size()), cfg.jobs);
            const auto report = evaluate(top1_predictions(source.queries, results), truth);
            if (artifact_dir) {
                save_index(index, artifact(tag + ".index"));
                write_file_atomic(artifact(tag + ".results.csv"), matches_to_csv(source.queries.ids, results));
                write_file_atomic(artifact(tag + ".report.json"), report_to_json(report));
            }
            result.rows.push_back(SweepRow{fraction, std::string(to_string(method)), source.name, report});
        };

        for (double fraction : cfg.selection.fractions)
            for (auto method : cfg.selection.methods) run_one(method, fraction);
        if (cfg.eval.include_full) run_one(SelectionMethod::all, 1.0);
    }
    result.csv = sweep_report(result.rows);
    if (artifact_dir) write_file_atomic(artifact("sweep.csv"), result.csv);
    return result;
}

// --- run manifests ----------------------------------------------------------

void write_run_manifest(const std::string& artifact, const std::string& subcommand,
                        const std::vector<std::string>& argv, const PipelineConfig& cfg,
                        const std::vector<std::string>& inputs, const std::vector<std::string>& outputs) {
    auto describe = [](const std::vector<std::string>& paths) {
        json list = json::array();
        for (const auto& p : paths) {
            json entry = {{"path", p}};
            if (fs::is_regular_file(p)) entry["sha256"] = sha256_file(p);
            else if (fs::is_directory(p)) entry["directory"] = true;
            list.push_back(std::move(entry));
        }
        return list;
    };
    json doc;
    doc["format"] = "patchsieve.run";
    doc["tool"] = "patchsieve";
    doc["version"] = kToolVersion;
    doc["subcommand"] = subcommand;
    doc["argv"] = argv;
    doc["created"] = utc_timestamp();
    doc["seed"] = cfg.seed;
    doc["stage_seeds"] = {{"som", som_seed(cfg)}, {"select", selection_seed(cfg)}};
    doc["config"] = config_to_json(cfg);
    doc["inputs"] = describe(inputs);
    doc["outputs"] = describe(outputs);
    write_file_atomic(artifact + ".run.json", doc.dump(1) + "\n");
}

}  // namespace patchsieve
