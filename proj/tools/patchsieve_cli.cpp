#include "patchsieve/feature_file.hpp"
#include "patchsieve/parallel.hpp"
#include "patchsieve/pca.hpp"
#include "patchsieve/pipeline.hpp"
#include "patchsieve/synthetic.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace patchsieve;

namespace {

struct ConfigFlags {
    std::string config_file;
    std::map<std::string, std::string> values;  // flag key -> raw text
    std::map<std::string, CLI::Option*> options;
};

// Registers one flag per config key, named after its dotted path.
void add_config_flags(CLI::App& app, ConfigFlags& flags) {
    app.add_option("--config", flags.config_file, "JSON config document; flags override it");
    const json defaults = config_to_json(PipelineConfig{});
    for (const auto& [section, body] : defaults.items()) {
        if (!body.is_object()) {
            flags.options[section] =
                app.add_option("--" + section, flags.values[section], "config key " + section);
            continue;
        }
        for (const auto& [key, value] : body.items()) {
            const std::string name = section + "." + key;
            flags.options[name] =
                app.add_option("--" + name, flags.values[name], "config key " + name + " (default " + value.dump() + ")");
        }
    }
    flags.options["jobs"]->description("worker threads (default: $PATCHSIEVE_JOBS, else hardware threads)");
}

json parse_flag_value(const std::string& text, const json& like) {
    if (like.is_string()) return text;
    try {
        return json::parse(text);
    } catch (const json::exception&) {
        return text;
    }
}

PipelineConfig resolve_config(const ConfigFlags& flags) {
    PipelineConfig cfg;
    cfg.jobs = default_jobs();
    if (!flags.config_file.empty()) {
        json doc;
        try {
            doc = json::parse(read_file(flags.config_file));
        } catch (const json::exception& e) {
            throw UsageError("config '" + flags.config_file + "' is not valid JSON: " + e.what());
        }
        cfg = config_from_json(doc, cfg);
    }
    const json defaults = config_to_json(PipelineConfig{});
    json overlay = json::object();
    for (const auto& [name, option] : flags.options) {
        if (option->count() == 0) continue;
        const auto dot = name.find('.');
        const std::string& text = flags.values.at(name);
        if (dot == std::string::npos) {
            overlay[name] = parse_flag_value(text, defaults.at(name));
        } else {
            const auto section = name.substr(0, dot), key = name.substr(dot + 1);
            overlay[section][key] = parse_flag_value(text, defaults.at(section).at(key));
        }
    }
    return config_from_json(overlay, cfg);
}

std::string resolve(const PipelineConfig& cfg, const std::string& path) {
    if (path.empty() || cfg.paths.work_dir.empty() || fs::path(path).is_absolute()) return path;
    return (fs::path(cfg.paths.work_dir) / path).string();
}

std::vector<std::string> resolve_all(const PipelineConfig& cfg, const std::vector<std::string>& paths) {
    std::vector<std::string> out;
    for (const auto& p : paths) out.push_back(resolve(cfg, p));
    return out;
}

void ensure_parent(const std::string& path) {
    const auto parent = fs::path(path).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
}

DescriptorSet load_features(const std::string& path) { return read_features(path); }

std::vector<std::string> image_files(const std::string& dir) {
    std::vector<std::string> out;
    if (!fs::is_directory(dir)) throw InputError("'" + dir + "' is not a directory");
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        auto ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
        if (ext == ".png" || ext == ".tif" || ext == ".tiff") out.push_back(entry.path().string());
    }
    std::sort(out.begin(), out.end());
    return out;
}

void print_error(const std::string& category, int code, const std::string& message) {
    json err = {{"error", {{"code", code}, {"category", category}, {"message", message}}}};
    std::cerr << err.dump() << "\n";
}

int run(std::vector<std::string> args) {
    const std::vector<std::string> recorded = args;
    CLI::App app{"Representative patch selection and retrieval for scan archives", "patchsieve"};
    app.require_subcommand(1);
    app.fallthrough();
    ConfigFlags flags;
    add_config_flags(app, flags);

    std::function<void(const PipelineConfig&)> action;
    auto manifest = [&](const std::string& artifact, const std::string& sub, const PipelineConfig& cfg,
                        const std::vector<std::string>& inputs, const std::vector<std::string>& outputs) {
        write_run_manifest(artifact, sub, recorded, cfg, inputs, outputs);
    };

    // tile
    std::vector<std::string> tile_scans;
    std::string tile_scans_dir, tile_out;
    auto* tile = app.add_subcommand("tile", "Cut scans into patches, measure background, write PNGs and a manifest");
    tile->add_option("--scan", tile_scans, "scan image (PNG or TIFF); repeatable; scan id = file stem");
    tile->add_option("--scans-dir", tile_scans_dir, "directory of scan images");
    tile->add_option("--out", tile_out, "output directory")->required();
    tile->callback([&] {
        action = [&](const PipelineConfig& cfg) {
            std::vector<std::string> scans = resolve_all(cfg, tile_scans);
            if (!tile_scans_dir.empty())
                for (const auto& f : image_files(resolve(cfg, tile_scans_dir))) scans.push_back(f);
            if (scans.empty()) throw UsageError("tile needs --scan or --scans-dir");
            const std::string out = resolve(cfg, tile_out);
            TileManifest m{cfg.tiling, {}};
            std::set<std::string> ids;
            for (const auto& path : scans) {
                const std::string scan_id = fs::path(path).stem().string();
                if (!ids.insert(scan_id).second) throw InputError("two scans share the id '" + scan_id + "'");
                auto entries = write_scan_tiles(read_image(path), scan_id, cfg.tiling, out, cfg.jobs);
                m.patches.insert(m.patches.end(), entries.begin(), entries.end());
            }
            const std::string artifact = (fs::path(out) / "tiles.json").string();
            write_file_atomic(artifact, tile_manifest_to_json(m));
            manifest(artifact, "tile", cfg, scans, {artifact});
        };
    });

    // extract-lbp
    std::string lbp_manifest, lbp_images, lbp_out;
    auto* lbp = app.add_subcommand("extract-lbp", "Compute LBP-36 descriptors for tiled patches or a folder of images");
    lbp->add_option("--manifest", lbp_manifest, "tile manifest written by 'tile'");
    lbp->add_option("--images", lbp_images, "directory of query images; id = file stem; resized to tiling.downsample_to");
    lbp->add_option("--out", lbp_out, "output feature file")->required();
    lbp->callback([&] {
        action = [&](const PipelineConfig& cfg) {
            if (lbp_manifest.empty() == lbp_images.empty())
                throw UsageError("extract-lbp needs exactly one of --manifest or --images");
            const std::string in = resolve(cfg, lbp_manifest.empty() ? lbp_images : lbp_manifest);
            const auto set = lbp_manifest.empty()
                                 ? extract_lbp_from_directory(in, cfg.lbp, cfg.tiling.downsample_to, cfg.jobs)
                                 : extract_lbp_from_manifest(in, cfg.lbp, cfg.jobs);
            const std::string out = resolve(cfg, lbp_out);
            ensure_parent(out);
            write_features(set, out);
            manifest(out, "extract-lbp", cfg, {in}, {out});
        };
    });

    // ingest-features
    std::string ing_in, ing_out, ing_format = "auto", ing_kind = "deep4096", ing_manifest;
    auto* ing = app.add_subcommand("ingest-features", "Validate externally computed descriptors and store them");
    ing->add_option("--in", ing_in, "feature file or CSV (header id,v0,v1,...)")->required();
    ing->add_option("--format", ing_format, "auto | featurefile | csv")
        ->check(CLI::IsMember({"auto", "featurefile", "csv"}));
    ing->add_option("--kind", ing_kind, "descriptor kind of CSV input: lbp36 | deep4096 | pca_reduced");
    ing->add_option("--manifest", ing_manifest, "tile manifest whose retained ids must match exactly");
    ing->add_option("--out", ing_out, "output feature file")->required();
    ing->callback([&] {
        action = [&](const PipelineConfig& cfg) {
            const std::string in = resolve(cfg, ing_in);
            std::string format = ing_format;
            if (format == "auto") format = fs::path(in).extension() == ".csv" ? "csv" : "featurefile";
            DescriptorSet set;
            if (format == "csv") {
                auto kind = kind_from_string(ing_kind);
                if (!kind) throw UsageError("unknown descriptor kind '" + ing_kind + "'");
                set = features_from_csv(read_file(in), *kind);
            } else {
                set = read_features(in);
            }
            if (set.empty()) throw InputError("'" + in + "' holds no descriptors");
            std::vector<std::string> inputs{in};
            if (!ing_manifest.empty()) {
                const std::string mpath = resolve(cfg, ing_manifest);
                const auto tiles = tile_manifest_from_json(read_file(mpath));
                std::set<std::string> expected, got(set.ids.begin(), set.ids.end());
                for (const auto& p : tiles.patches)
                    if (p.retained) expected.insert(p.id);
                for (const auto& id : expected)
                    if (!got.count(id)) throw InputError("manifest patch '" + id + "' has no descriptor");
                for (const auto& id : got)
                    if (!expected.count(id)) throw InputError("descriptor '" + id + "' is not a retained manifest patch");
                inputs.push_back(mpath);
            }
            const std::string out = resolve(cfg, ing_out);
            ensure_parent(out);
            write_features(set, out);
            manifest(out, "ingest-features", cfg, inputs, {out});
        };
    });

    // pca fit / apply
    std::string pca_in, pca_out, pca_model;
    auto* pca = app.add_subcommand("pca", "Fit or apply a PCA projection");
    pca->require_subcommand(1);
    auto* pca_fit_cmd = pca->add_subcommand("fit", "Fit on training descriptors, keep pca.retained_fraction of variance");
    pca_fit_cmd->add_option("--in", pca_in, "training feature file")->required();
    pca_fit_cmd->add_option("--out", pca_out, "output model JSON")->required();
    pca_fit_cmd->callback([&] {
        action = [&](const PipelineConfig& cfg) {
            const std::string in = resolve(cfg, pca_in), out = resolve(cfg, pca_out);
            const auto set = load_features(in);
            const RowMatrixXd x = set.values.cast<double>();
            const auto model = pca_fit(x, cfg.pca.retained_fraction);
            ensure_parent(out);
            write_file_atomic(out, pca_to_json(model));
            manifest(out, "pca fit", cfg, {in}, {out});
        };
    });
    auto* pca_apply_cmd = pca->add_subcommand("apply", "Project descriptors with a fitted model");
    pca_apply_cmd->add_option("--model", pca_model, "model JSON from 'pca fit'")->required();
    pca_apply_cmd->add_option("--in", pca_in, "feature file to project")->required();
    pca_apply_cmd->add_option("--out", pca_out, "output feature file (kind pca_reduced)")->required();
    pca_apply_cmd->callback([&] {
        action = [&](const PipelineConfig& cfg) {
            const std::string in = resolve(cfg, pca_in), out = resolve(cfg, pca_out), mp = resolve(cfg, pca_model);
            const auto model = pca_from_json(read_file(mp));
            const auto set = load_features(in);
            DescriptorSet reduced;
            reduced.kind = DescriptorKind::pca_reduced;
            reduced.ids = set.ids;
            reduced.values = pca_transform(model, set.values.cast<double>()).cast<float>();
            ensure_parent(out);
            write_features(reduced, out);
            manifest(out, "pca apply", cfg, {mp, in}, {out});
        };
    });

    // cluster
    std::string cl_in, cl_out;
    auto* cl = app.add_subcommand("cluster", "Train one SOM per scan and merge undersized clusters");
    cl->add_option("--in", cl_in, "training feature file")->required();
    cl->add_option("--out", cl_out, "output clusters JSON")->required();
    cl->callback([&] {
        action = [&](const PipelineConfig& cfg) {
            const std::string in = resolve(cfg, cl_in), out = resolve(cfg, cl_out);
            const auto set = load_features(in);
            SomConfig som = cfg.som;
            som.seed = som_seed(cfg);
            const auto models = cluster_all(set, som, cfg.jobs);
            ensure_parent(out);
            write_file_atomic(out, clusters_to_json(models, som));
            manifest(out, "cluster", cfg, {in}, {out});
        };
    });

    // select
    std::string sel_in, sel_clusters, sel_out;
    auto* sel = app.add_subcommand("select", "Keep selection.fraction of each scan's patches");
    sel->add_option("--in", sel_in, "training feature file")->required();
    sel->add_option("--clusters", sel_clusters, "clusters JSON from 'cluster'")->required();
    sel->add_option("--out", sel_out, "output selection JSON")->required();
    sel->callback([&] {
        action = [&](const PipelineConfig& cfg) {
            const std::string in = resolve(cfg, sel_in), cp = resolve(cfg, sel_clusters), out = resolve(cfg, sel_out);
            const auto set = load_features(in);
            const auto models = clusters_from_json(read_file(cp));
            std::vector<SelectionSet> selections;
            if (cfg.selection.method == SelectionMethod::all) {
                for (const auto& m : models) {
                    SelectionSet s{m.scan_id, SelectionMethod::all, 1.0, 0, m.patch_ids};
                    std::sort(s.retained.begin(), s.retained.end());
                    selections.push_back(std::move(s));
                }
            } else {
                SelectionOptions options{cfg.selection.method, cfg.selection.criterion, cfg.selection.fraction,
                                         selection_seed(cfg)};
                selections = select_all(models, set, options, cfg.jobs);
            }
            ensure_parent(out);
            write_file_atomic(out, selections_to_json(selections));
            manifest(out, "select", cfg, {in, cp}, {out});
        };
    });

    // index
    std::string ix_in, ix_sel, ix_out;
    auto* ix = app.add_subcommand("index", "Build a nearest-neighbour index over retained descriptors");
    ix->add_option("--in", ix_in, "training feature file")->required();
    ix->add_option("--selection", ix_sel, "selection JSON; omit to index every descriptor");
    ix->add_option("--out", ix_out, "output index file")->required();
    ix->callback([&] {
        action = [&](const PipelineConfig& cfg) {
            const std::string in = resolve(cfg, ix_in), out = resolve(cfg, ix_out);
            const auto set = load_features(in);
            std::vector<std::string> inputs{in};
            json meta = {{"seed", cfg.seed}};
            RetrievalIndex index;
            if (ix_sel.empty()) {
                index = build_index(set, nullptr, meta);
            } else {
                const std::string sp = resolve(cfg, ix_sel);
                const auto selections = selections_from_json(read_file(sp));
                index = build_index(set, &selections, meta);
                inputs.push_back(sp);
            }
            ensure_parent(out);
            save_index(index, out);
            manifest(out, "index", cfg, inputs, {out});
        };
    });

    // search
    std::string se_index, se_queries, se_out;
    auto* se = app.add_subcommand("search", "Top retrieval.k matches for every query descriptor");
    se->add_option("--index", se_index, "index file from 'index'")->required();
    se->add_option("--queries", se_queries, "query feature file")->required();
    se->add_option("--out", se_out, "output results CSV")->required();
    se->callback([&] {
        action = [&](const PipelineConfig& cfg) {
            const std::string ip = resolve(cfg, se_index), qp = resolve(cfg, se_queries), out = resolve(cfg, se_out);
            const auto index = load_index(ip);
            const auto queries = load_features(qp);
            const auto results = index.query_batch(queries, cfg.retrieval.k, cfg.jobs);
            ensure_parent(out);
            write_file_atomic(out, matches_to_csv(queries.ids, results));
            manifest(out, "search", cfg, {ip, qp}, {out});
        };
    });

    // eval
    std::string ev_results, ev_truth, ev_out;
    auto* ev = app.add_subcommand("eval", "Score rank-1 results against query labels");
    ev->add_option("--results", ev_results, "results CSV from 'search'")->required();
    ev->add_option("--truth", ev_truth, "CSV with header query_id,scan_id")->required();
    ev->add_option("--out", ev_out, "output report JSON")->required();
    ev->callback([&] {
        action = [&](const PipelineConfig& cfg) {
            const std::string rp = resolve(cfg, ev_results), tp = resolve(cfg, ev_truth), out = resolve(cfg, ev_out);
            const auto report = evaluate(top1_from_csv(read_file(rp)), truth_from_csv(read_file(tp)));
            ensure_parent(out);
            write_file_atomic(out, report_to_json(report));
            manifest(out, "eval", cfg, {rp, tp}, {out});
        };
    });

    // sweep
    std::vector<std::string> sw_train, sw_queries, sw_names;
    std::string sw_truth, sw_out;
    auto* sw = app.add_subcommand("sweep", "cluster, then select, index, search and eval over selection.fractions x selection.methods");
    sw->add_option("--train", sw_train, "training feature file; repeat once per feature kind")->required();
    sw->add_option("--queries", sw_queries, "query feature file, paired with --train in order")->required();
    sw->add_option("--name", sw_names, "feature label for the CSV, paired with --train; defaults to the kind");
    sw->add_option("--truth", sw_truth, "CSV with header query_id,scan_id")->required();
    sw->add_option("--out", sw_out, "output directory for sweep.csv and every intermediate artifact")->required();
    sw->callback([&] {
        action = [&](const PipelineConfig& cfg) {
            if (sw_train.size() != sw_queries.size()) throw UsageError("--train and --queries must pair up");
            if (!sw_names.empty() && sw_names.size() != sw_train.size())
                throw UsageError("--name must be given once per --train or not at all");
            std::vector<FeatureSource> sources;
            std::vector<std::string> inputs;
            std::set<std::string> names;
            for (std::size_t i = 0; i < sw_train.size(); ++i) {
                const std::string tp = resolve(cfg, sw_train[i]), qp = resolve(cfg, sw_queries[i]);
                FeatureSource src{"", load_features(tp), load_features(qp)};
                src.name = sw_names.empty() ? std::string(to_string(src.train.kind)) : sw_names[i];
                if (!names.insert(src.name).second) throw UsageError("feature name '" + src.name + "' used twice");
                sources.push_back(std::move(src));
                inputs.push_back(tp);
                inputs.push_back(qp);
            }
            const std::string tp = resolve(cfg, sw_truth), out = resolve(cfg, sw_out);
            inputs.push_back(tp);
            fs::create_directories(out);
            run_sweep(sources, truth_from_csv(read_file(tp)), cfg, out);
            const std::string artifact = (fs::path(out) / "sweep.csv").string();
            manifest(artifact, "sweep", cfg, inputs, {artifact});
        };
    });

    // synth
    SyntheticConfig synth_cfg;
    std::string synth_out;
    auto* synth = app.add_subcommand("synth", "Generate a procedural scan corpus with held-out query patches");
    synth->add_option("--out", synth_out, "output directory (scans/, test/, test_truth.csv)")->required();
    synth->add_option("--scans", synth_cfg.scans, "number of scans")->capture_default_str();
    synth->add_option("--grid", synth_cfg.grid, "patches per canvas side")->capture_default_str();
    synth->add_option("--patch-size", synth_cfg.patch_size, "patch side in pixels")->capture_default_str();
    synth->add_option("--queries-per-scan", synth_cfg.queries_per_scan, "query patches cut from each scan")
        ->capture_default_str();
    synth->add_option("--jitter", synth_cfg.jitter, "relative spread of shared tissues between scans")
        ->capture_default_str();
    synth->callback([&] {
        action = [&](const PipelineConfig& cfg) {
            SyntheticConfig sc = synth_cfg;
            sc.seed = cfg.seed;
            const std::string out = resolve(cfg, synth_out);
            write_synthetic_corpus(sc, out, cfg.jobs);
            const std::string artifact = (fs::path(out) / "test_truth.csv").string();
            manifest(artifact, "synth", cfg, {}, {artifact});
        };
    });

    // replay
    std::string replay_manifest;
    auto* replay = app.add_subcommand("replay", "Re-run the command recorded in a run manifest");
    replay->add_option("manifest", replay_manifest, "a *.run.json file")->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        throw UsageError(e.what());
    }

    if (replay->parsed()) {
        json doc;
        try {
            doc = json::parse(read_file(replay_manifest));
            if (doc.at("format") != "patchsieve.run") throw InputError("'" + replay_manifest + "' is not a run manifest");
            return run(doc.at("argv").get<std::vector<std::string>>());
        } catch (const json::exception& e) {
            throw InputError("malformed run manifest: " + std::string(e.what()));
        }
    }
    const auto cfg = resolve_config(flags);
    action(cfg);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        return run(args);
    } catch (const Error& e) {
        print_error(std::string(to_string(e.category())), static_cast<int>(e.category()), e.what());
        return static_cast<int>(e.category());
    } catch (const fs::filesystem_error& e) {
        print_error("input_format", 2, e.what());
        return 2;
    } catch (const std::exception& e) {
        print_error("usage", 1, e.what());
        return 1;
    }
}
