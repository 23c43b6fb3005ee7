#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>

#include "tabcl/runner.hpp"

namespace tabcl {

namespace fs = std::filesystem;

namespace {

std::string shortest(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

// Re-types columns named in the manifest. Numerical -> categorical takes the
// sorted distinct values as categories; the reverse parses category names.
ParsedRows apply_overrides(ParsedRows rows, const std::map<std::string, std::string>& overrides) {
    if (overrides.empty()) return rows;
    const std::size_t m = rows.schema.n_features();
    auto feats = rows.schema.features();
    for (const auto& [name, kind] : overrides) {
        std::size_t k;
        try {
            k = rows.schema.index_of(name);
        } catch (const SchemaError&) {
            throw ConfigError("schema override names unknown feature '" + name + "'");
        }
        const bool to_cat = kind == "categorical";
        if (to_cat == feats[k].categorical()) continue;
        if (to_cat) {
            std::set<double> distinct;
            for (std::size_t r = 0; r < rows.n_rows; ++r) {
                const double v = rows.cells[r * m + k];
                if (!std::isnan(v)) distinct.insert(v);
            }
            const std::vector<double> values(distinct.begin(), distinct.end());
            std::vector<std::string> cats;
            for (double v : values) cats.push_back(shortest(v));
            for (std::size_t r = 0; r < rows.n_rows; ++r) {
                double& v = rows.cells[r * m + k];
                if (!std::isnan(v)) {
                    v = static_cast<double>(std::lower_bound(values.begin(), values.end(), v) - values.begin());
                }
            }
            feats[k] = FeatureSpec::categorical(name, std::move(cats));
        } else {
            std::vector<double> value_of;
            for (const auto& c : feats[k].categories) {
                try {
                    std::size_t used = 0;
                    value_of.push_back(std::stod(c, &used));
                    if (used != c.size()) throw std::invalid_argument(c);
                } catch (const std::exception&) {
                    throw ConfigError("feature '" + name + "' has non-numeric category '" + c + "'");
                }
            }
            for (std::size_t r = 0; r < rows.n_rows; ++r) {
                double& v = rows.cells[r * m + k];
                if (!std::isnan(v)) v = value_of[static_cast<std::size_t>(v)];
            }
            feats[k] = FeatureSpec::numerical(name);
        }
    }
    rows.schema = Schema(std::move(feats), rows.schema.label_name(), rows.schema.class_names());
    return rows;
}

}  // namespace

LoadedDataset load_dataset(const RunManifest& m, std::shared_ptr<HttpTransport> transport) {
    LoadedDataset out;
    if (m.dataset.did > 0) {
        OpenmlClient client(transport ? transport : make_http_transport(), m.cache_dir);
        auto ds = client.fetch(m.dataset.did);
        out.name = ds.name + " (" + std::to_string(m.dataset.did) + ")";
        out.rows = std::move(ds.rows);
    } else {
        fs::path schema_path = m.dataset.schema_path;
        const fs::path csv = m.dataset.csv_path;
        if (schema_path.empty()) schema_path = csv.parent_path() / (csv.stem().string() + ".schema.json");
        out.rows = read_csv_dataset(csv.string(), read_schema_file(schema_path.string()));
        out.name = csv.stem().string();
    }
    if (!m.dataset.name.empty()) out.name = m.dataset.name;
    out.rows = apply_overrides(std::move(out.rows), m.schema_overrides);
    return out;
}

PreparedData prepare(const ParsedRows& rows, const RunManifest& m, std::uint64_t seed) {
    PreparedData p;
    p.split = make_split(rows.labels, rows.schema.class_count(), m.labeled_fraction, m.test_fraction, seed);
    const auto train = p.split.training_rows();
    p.table = impute(rows, train);
    p.encoder = fit_encoder(p.table, p.split);
    return p;
}

Projection3D project_embeddings(const nn::ModelParams<float>& params, const Table& table, const OneHotEncoder& enc,
                                const std::vector<std::size_t>& rows) {
    const auto h = embed(params, encode_rows(enc, table, rows));
    std::vector<int> labels;
    for (auto r : rows) labels.push_back(table.label(r));
    return pca_project(h.cast<double>(), std::move(labels));
}

void write_projection_csv(const Projection3D& p, const fs::path& path, const std::string& role) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "pc1,pc2,pc3,class,split_role\n" << std::setprecision(9);
    for (Eigen::Index r = 0; r < p.coords.rows(); ++r) {
        out << p.coords(r, 0) << ',' << p.coords(r, 1) << ',' << p.coords(r, 2) << ','
            << p.labels[static_cast<std::size_t>(r)] << ',' << role << '\n';
    }
}

void write_curve_csv(const std::vector<double>& curve, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "epoch,loss\n" << std::setprecision(17);
    for (std::size_t e = 0; e < curve.size(); ++e) out << e + 1 << ',' << curve[e] << '\n';
}

RunSummary run_manifest(const RunManifest& m, std::ostream& log, std::shared_ptr<HttpTransport> transport) {
    m.validate();
    const fs::path root = m.output_dir;
    for (const char* sub : {"records", "curves", "checkpoints", "projections"}) fs::create_directories(root / sub);
    {
        std::ofstream out(root / "manifest.json");
        out << manifest_to_json(m);
    }

    LoadedDataset data;
    try {
        data = load_dataset(m, std::move(transport));
    } catch (const FetchError& e) {
        throw StageError("fetch", e.what(), exit_code::fetch);
    } catch (const ConfigError& e) {
        throw StageError("load", e.what(), exit_code::config);
    } catch (const std::exception& e) {
        throw StageError("load", e.what(), exit_code::failure);
    }

    ResultsStore store(root / "records");
    const std::string hash = m.hash();
    RunSummary summary;
    for (auto seed : m.seeds) {
        std::optional<PreparedData> prep;
        std::optional<ImportanceProfile> profile;
        for (auto mode : m.subset_modes) {
            for (auto method : m.methods) {
                // The subset sampler only exists inside pretraining.
                if (method == Method::no_pretrain && mode != SubsetMode::uniform) continue;
                const auto key = ResultsStore::key(data.name, to_string(method), to_string(mode), seed, hash);
                summary.keys.push_back(key);
                if (store.contains(key)) {
                    ++summary.skipped;
                    continue;
                }
                if (!prep) {
                    try {
                        prep = prepare(data.rows, m, seed);
                    } catch (const std::exception& e) {
                        throw StageError("split", e.what(), exit_code::config);
                    }
                }
                TrainConfig cfg = m.train;
                cfg.method = method;
                cfg.subset_mode = mode;
                cfg.seed = seed;
                std::optional<double> corr_range;
                if (mode != SubsetMode::uniform) {
                    if (!profile) {
                        try {
                            profile = build_profiles(prep->table, prep->split, cfg.gbdt);
                        } catch (const std::exception& e) {
                            throw StageError("profile", e.what(), exit_code::failure);
                        }
                    }
                    corr_range = correlation_value_range(*profile);
                }
                const auto t0 = std::chrono::steady_clock::now();
                RunOutcome outcome;
                try {
                    outcome = run_method(prep->table, prep->split, cfg, profile);
                } catch (const DivergenceError& e) {
                    throw StageError(method == Method::no_pretrain ? "finetune" : "pretrain", e.what(),
                                     exit_code::divergence);
                } catch (const std::exception& e) {
                    throw StageError("train", e.what(), exit_code::failure);
                }
                auto& rec = outcome.record;
                rec.dataset = data.name;
                rec.manifest_hash = hash;
                rec.correlation_range = corr_range;

                try {
                    write_curve_csv(rec.loss_curve, root / "curves" / (key + ".csv"));
                    if (m.save_checkpoints) {
                        nn::Checkpoint ck{outcome.params, outcome.pretrain.encoder_opt, outcome.pretrain.pretrain_opt,
                                          outcome.pretrain.classifier_opt, "", cfg.pretrain_epochs};
                        nn::save_checkpoint(ck, (root / "checkpoints" / (key + ".ckpt")).string());
                    }
                    if (m.save_projections && prep->split.test.size() >= 4) {
                        write_projection_csv(
                            project_embeddings(outcome.params, prep->table, prep->encoder, prep->split.test),
                            root / "projections" / (key + ".csv"), "test");
                    }
                    store.put(rec);
                } catch (const std::exception& e) {
                    throw StageError("write", e.what(), exit_code::failure);
                }
                ++summary.completed;
                const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                log << key << "  acc " << std::fixed << std::setprecision(4) << rec.accuracy << "  auroc "
                    << rec.auroc;
                if (!rec.loss_curve.empty()) log << "  final loss " << rec.loss_curve.back();
                log << "  (" << std::setprecision(1) << secs << " s)" << std::defaultfloat << std::endl;
            }
        }
    }
    return summary;
}

}  // namespace tabcl
