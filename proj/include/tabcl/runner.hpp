#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tabcl/evaluation.hpp"
#include "tabcl/openml.hpp"
#include "tabcl/training.hpp"

namespace tabcl {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Failure inside one stage of a run (fetch, split, pretrain, ...). Carries the
/// underlying exit code so the CLI can report it.
class StageError : public std::runtime_error {
public:
    StageError(std::string stage, const std::string& what, int exit_code)
        : std::runtime_error(stage + ": " + what), stage_(std::move(stage)), exit_code_(exit_code) {}
    const std::string& stage() const noexcept { return stage_; }
    int exit_code() const noexcept { return exit_code_; }

private:
    std::string stage_;
    int exit_code_;
};

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int failure = 1;
inline constexpr int config = 2;
inline constexpr int fetch = 3;
inline constexpr int divergence = 4;
}  // namespace exit_code

/// Either an OpenML dataset id or a local CSV with a schema sidecar.
struct DatasetSource {
    int did = 0;
    std::string csv_path;
    std::string schema_path;  // defaults to <csv stem>.schema.json next to the CSV
    std::string name;         // display name; filled from the source when empty
};

struct RunManifest {
    DatasetSource dataset;
    /// Feature name -> "categorical" | "numerical".
    std::map<std::string, std::string> schema_overrides;
    double labeled_fraction = 0.1;
    double test_fraction = 0.2;
    TrainConfig train;  // method and seed are taken from the lists below
    std::vector<Method> methods{Method::random, Method::class_conditioned};
    std::vector<SubsetMode> subset_modes{SubsetMode::uniform};
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    std::string output_dir = "runs";
    std::string cache_dir = "data/openml-cache";
    bool save_checkpoints = true;
    bool save_projections = true;

    void validate() const;  // throws ConfigError
    /// Hash of everything that affects a single cell's result; excludes the
    /// method, subset-mode and seed lists and the output location.
    std::string hash() const;
};

std::string manifest_to_json(const RunManifest& m);
/// Fields present in `text` replace those of `base`. Throws ConfigError.
RunManifest manifest_from_json(const std::string& text, RunManifest base = {});
RunManifest read_manifest(const std::string& path, RunManifest base = {});

std::string record_to_json(const RunRecord& r);
RunRecord record_from_json(const std::string& text);

/// Append-only store of run records, one JSON file per key. Files are created
/// via write-temp-then-link so concurrent writers never clobber each other.
class ResultsStore {
public:
    explicit ResultsStore(std::filesystem::path dir);

    static std::string key(const std::string& dataset, const std::string& method, const std::string& subset_mode,
                           std::uint64_t seed, const std::string& manifest_hash);
    static std::string key(const RunRecord& r) {
        return key(r.dataset, r.method, r.subset_mode, r.seed, r.manifest_hash);
    }

    bool contains(const std::string& key) const;
    /// False when the key already exists (the stored record is left untouched).
    bool put(const RunRecord& r);
    std::optional<RunRecord> get(const std::string& key) const;
    std::vector<RunRecord> all() const;
    const std::filesystem::path& dir() const noexcept { return dir_; }

private:
    std::filesystem::path path_for(const std::string& key) const;
    std::filesystem::path dir_;
};

/// Dataset loaded for a manifest, before splitting and imputation.
struct LoadedDataset {
    std::string name;
    ParsedRows rows;
};

LoadedDataset load_dataset(const RunManifest& m, std::shared_ptr<HttpTransport> transport = nullptr);

/// Split plus imputed table for one seed.
struct PreparedData {
    SplitSpec split;
    Table table;
    OneHotEncoder encoder;
};
PreparedData prepare(const ParsedRows& rows, const RunManifest& m, std::uint64_t seed);

struct RunSummary {
    std::size_t completed = 0;
    std::size_t skipped = 0;
    std::vector<std::string> keys;
};

/// Executes every (subset mode, method, seed) cell not already in the store
/// under <output_dir>/records. Writes curves, checkpoints and projections next
/// to it. Throws StageError naming the failing stage.
RunSummary run_manifest(const RunManifest& m, std::ostream& log, std::shared_ptr<HttpTransport> transport = nullptr);

std::string arm_label(const std::string& method, const std::string& subset_mode);

struct ReportTables {
    std::string accuracy;     // dataset x arm, mean ± std (percent)
    std::string auroc;
    std::string correlation;  // dataset, value range, random/least/most features
    WinMatrix win_accuracy;
    std::vector<std::string> datasets;
};

/// Builds the report tables from records; throws ConfigError listing every
/// (dataset, arm) cell whose seed count differs from the rest.
ReportTables build_report(const std::vector<RunRecord>& records, const std::vector<std::string>& datasets = {});
void write_report(const ReportTables& r, const std::filesystem::path& dir);

/// PCA of encoder embeddings of the given rows.
Projection3D project_embeddings(const nn::ModelParams<float>& params, const Table& table, const OneHotEncoder& enc,
                                const std::vector<std::size_t>& rows);
/// Columns pc1, pc2, pc3, class, split_role.
void write_projection_csv(const Projection3D& p, const std::filesystem::path& path, const std::string& role);
void write_curve_csv(const std::vector<double>& curve, const std::filesystem::path& path);

}  // namespace tabcl
