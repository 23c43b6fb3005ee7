// tabcl: fetch datasets, run method arms, and export reports, curves and projections.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "tabcl/runner.hpp"

namespace fs = std::filesystem;
using namespace tabcl;

namespace {

struct Flags {
    std::string manifest_path;
    int did = 0;
    std::string csv, schema, name;
    std::vector<std::string> methods, subset_modes;
    std::vector<std::uint64_t> seeds;
    std::vector<std::string> overrides;  // name=kind
};

void add_manifest_flags(CLI::App* cmd, Flags& f, RunManifest& m) {
    cmd->add_option("--manifest", f.manifest_path, "JSON manifest; its fields override flags");
    cmd->add_option("--did", f.did, "OpenML dataset id");
    cmd->add_option("--csv", f.csv, "local CSV dataset");
    cmd->add_option("--schema", f.schema, "schema sidecar for --csv");
    cmd->add_option("--name", f.name, "dataset display name");
    cmd->add_option("--override", f.overrides, "feature kind override, name=categorical|numerical");
    cmd->add_option("--methods", f.methods, "no_pretrain random class_conditioned oracle");
    cmd->add_option("--subset-modes", f.subset_modes, "uniform most_correlated least_correlated");
    cmd->add_option("--seeds", f.seeds, "seed list");
    cmd->add_option("--labeled-fraction", m.labeled_fraction);
    cmd->add_option("--test-fraction", m.test_fraction);
    cmd->add_option("--out", m.output_dir, "run directory");
    cmd->add_option("--cache-dir", m.cache_dir, "OpenML cache directory");
    cmd->add_option("--pretrain-epochs", m.train.pretrain_epochs);
    cmd->add_option("--finetune-epochs", m.train.finetune_epochs);
    cmd->add_option("--update-interval", m.train.update_interval, "epochs between head refreshes");
    cmd->add_option("--refresh-epochs", m.train.refresh_epochs, "head training epochs per refresh");
    cmd->add_option("--batch-size", m.train.batch_size);
    cmd->add_option("--corruption-rate", m.train.corruption_rate);
    cmd->add_option("--temperature", m.train.temperature);
    cmd->add_option("--learning-rate", m.train.learning_rate);
    cmd->add_option("--hidden-width", m.train.hidden_width);
    cmd->add_option("--encoder-layers", m.train.encoder_layers);
    cmd->add_option("--projection-width", m.train.projection_width);
    cmd->add_flag("--warm-start-head", m.train.warm_start_head, "train the head once before pretraining");
    cmd->add_flag("--reinit-head-on-refresh", m.train.reinit_head_on_refresh);
    cmd->add_flag("--force-ground-truth", m.train.force_ground_truth_labels,
                  "class-conditioned arm uses true labels for every training row");
    cmd->add_option("--gbdt-rounds", m.train.gbdt.n_rounds);
    cmd->add_option("--gbdt-depth", m.train.gbdt.max_depth);
    cmd->add_option("--gbdt-learning-rate", m.train.gbdt.learning_rate);
    cmd->add_option("--gbdt-min-leaf", m.train.gbdt.min_samples_leaf);
}

RunManifest resolve(const Flags& f, RunManifest m) {
    if (f.did > 0) m.dataset.did = f.did;
    if (!f.csv.empty()) m.dataset.csv_path = f.csv;
    if (!f.schema.empty()) m.dataset.schema_path = f.schema;
    if (!f.name.empty()) m.dataset.name = f.name;
    try {
        if (!f.methods.empty()) {
            m.methods.clear();
            for (const auto& s : f.methods) m.methods.push_back(method_from_string(s));
        }
        if (!f.subset_modes.empty()) {
            m.subset_modes.clear();
            for (const auto& s : f.subset_modes) m.subset_modes.push_back(subset_mode_from_string(s));
        }
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (!f.seeds.empty()) m.seeds = f.seeds;
    for (const auto& o : f.overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos) throw ConfigError("override must be name=kind: " + o);
        m.schema_overrides[o.substr(0, eq)] = o.substr(eq + 1);
    }
    if (!f.manifest_path.empty()) m = read_manifest(f.manifest_path, std::move(m));
    m.validate();
    return m;
}

int cmd_fetch(int did, const std::string& cache_dir) {
    OpenmlClient client(make_http_transport(), cache_dir);
    const auto ds = client.fetch(did);
    const auto& s = ds.rows.schema;
    std::size_t missing = 0;
    for (double v : ds.rows.cells) missing += std::isnan(v) ? 1 : 0;
    std::cout << ds.name << " (" << did << "): " << ds.rows.n_rows << " rows, " << s.n_features() << " features, "
              << s.class_count() << " classes, " << missing << " missing cells, target '" << ds.target << "'"
              << (ds.from_cache ? " [cache]" : "") << '\n';
    return exit_code::ok;
}

int cmd_run(const RunManifest& m) {
    const auto summary = run_manifest(m, std::cout);
    std::cout << summary.completed << " cells run, " << summary.skipped << " already stored\n";
    return exit_code::ok;
}

std::vector<RunRecord> collect(const std::vector<std::string>& run_dirs) {
    std::vector<RunRecord> all;
    for (const auto& d : run_dirs) {
        fs::path records = fs::path(d) / "records";
        if (!fs::exists(records)) records = d;
        if (!fs::is_directory(records)) throw ConfigError("no record store at " + d);
        auto recs = ResultsStore(records).all();
        all.insert(all.end(), recs.begin(), recs.end());
    }
    return all;
}

int cmd_report(const std::vector<std::string>& run_dirs, const std::vector<std::string>& datasets,
               const std::string& out_dir) {
    const auto tables = build_report(collect(run_dirs), datasets);
    write_report(tables, out_dir);
    std::cout << "accuracy (%)\n" << tables.accuracy << "\nAUROC (%)\n" << tables.auroc << "\nwin matrix (accuracy)\n"
              << tables.win_accuracy.to_table();
    if (tables.correlation.find('\n') + 1 < tables.correlation.size()) {
        std::cout << "\ncorrelation masking\n" << tables.correlation;
    }
    std::cout << "\ntables written to " << out_dir << '\n';
    return exit_code::ok;
}

int cmd_project(const RunManifest& m, const std::string& rows_sel) {
    const auto data = load_dataset(m);
    const auto hash = m.hash();
    const fs::path root = m.output_dir;
    for (auto seed : m.seeds) {
        const auto prep = prepare(data.rows, m, seed);
        std::vector<std::size_t> rows;
        if (rows_sel == "test") {
            rows = prep.split.test;
        } else if (rows_sel == "train") {
            rows = prep.split.training_rows();
            std::erase_if(rows, [&](std::size_t r) { return !prep.table.has_label(r); });
        } else {
            throw ConfigError("--rows must be test or train");
        }
        for (auto mode : m.subset_modes) {
            for (auto method : m.methods) {
                if (method == Method::no_pretrain && mode != SubsetMode::uniform) continue;
                const auto key = ResultsStore::key(data.name, to_string(method), to_string(mode), seed, hash);
                const auto ck_path = root / "checkpoints" / (key + ".ckpt");
                if (!fs::exists(ck_path)) {
                    std::cerr << "no checkpoint for " << key << ", skipped\n";
                    continue;
                }
                const auto ck = nn::load_checkpoint(ck_path.string());
                const auto proj = project_embeddings(ck.params, prep.table, prep.encoder, rows);
                fs::create_directories(root / "projections");
                const auto out = root / "projections" / (key + "." + rows_sel + ".csv");
                write_projection_csv(proj, out, rows_sel);
                std::cout << key << "  class separation " << class_separation(proj.coords, proj.labels) << "  -> "
                          << out.string() << '\n';
            }
        }
    }
    return exit_code::ok;
}

int cmd_curve(const std::vector<std::string>& run_dirs, const std::string& key, const std::string& out_dir) {
    for (const auto& r : collect(run_dirs)) {
        const auto k = ResultsStore::key(r);
        if (!key.empty() && k != key) continue;
        if (r.loss_curve.empty()) continue;
        if (out_dir.empty()) {
            std::cout << "# " << k << "\nepoch,loss\n";
            for (std::size_t e = 0; e < r.loss_curve.size(); ++e) std::cout << e + 1 << ',' << r.loss_curve[e] << '\n';
        } else {
            fs::create_directories(out_dir);
            write_curve_csv(r.loss_curve, fs::path(out_dir) / (k + ".csv"));
        }
    }
    return exit_code::ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Contrastive pretraining for tabular classification"};
    app.require_subcommand(1);

    auto* fetch = app.add_subcommand("fetch", "download (or load from cache) an OpenML dataset");
    int fetch_did = 0;
    std::string fetch_cache = "data/openml-cache";
    fetch->add_option("did", fetch_did, "OpenML dataset id")->required();
    fetch->add_option("--cache-dir", fetch_cache);

    Flags run_flags;
    RunManifest run_base;
    auto* run = app.add_subcommand("run", "pretrain + finetune every (method, seed) cell of a manifest");
    add_manifest_flags(run, run_flags, run_base);

    auto* report = app.add_subcommand("report", "accuracy/AUROC tables and win matrix from stored records");
    std::vector<std::string> report_dirs, report_datasets;
    std::string report_out = "report";
    report->add_option("runs", report_dirs, "run directories (or record directories)")->required();
    report->add_option("--datasets", report_datasets, "restrict to these dataset names");
    report->add_option("--out", report_out, "output directory for the tables");

    Flags proj_flags;
    RunManifest proj_base;
    std::string proj_rows = "test";
    auto* project = app.add_subcommand("project", "3-D PCA export of encoder embeddings from checkpoints");
    add_manifest_flags(project, proj_flags, proj_base);
    project->add_option("--rows", proj_rows, "test or train (labeled training rows)");

    auto* curve = app.add_subcommand("curve", "export pretraining loss curves");
    std::vector<std::string> curve_dirs;
    std::string curve_key, curve_out;
    curve->add_option("runs", curve_dirs, "run directories")->required();
    curve->add_option("--key", curve_key, "single record key");
    curve->add_option("--out", curve_out, "directory for CSV files (stdout when empty)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? exit_code::ok : exit_code::config;
    }

    try {
        if (*fetch) return cmd_fetch(fetch_did, fetch_cache);
        if (*run) return cmd_run(resolve(run_flags, run_base));
        if (*report) return cmd_report(report_dirs, report_datasets, report_out);
        if (*project) return cmd_project(resolve(proj_flags, proj_base), proj_rows);
        if (*curve) return cmd_curve(curve_dirs, curve_key, curve_out);
    } catch (const StageError& e) {
        std::cerr << "error in stage " << e.what() << '\n';
        return e.exit_code();
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return exit_code::config;
    } catch (const FetchError& e) {
        std::cerr << "fetch error: " << e.what() << (e.retryable() ? " (retryable)" : "") << '\n';
        return exit_code::fetch;
    } catch (const DivergenceError& e) {
        std::cerr << "numeric divergence: " << e.what() << '\n';
        return exit_code::divergence;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code::failure;
    }
    return exit_code::failure;
}
