#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tabcl {

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t row)
        : std::runtime_error(what + " (row " + std::to_string(row) + ")"), row_(row) {}
    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

class SchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SplitError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class FeatureKind { categorical, numerical };

struct FeatureSpec {
    std::string name;
    FeatureKind kind = FeatureKind::numerical;
    std::vector<std::string> categories;  // categorical only, ordered

    bool categorical() const noexcept { return kind == FeatureKind::categorical; }
    std::size_t cardinality() const noexcept { return categories.size(); }

    static FeatureSpec numerical(std::string name) { return {std::move(name), FeatureKind::numerical, {}}; }
    static FeatureSpec categorical(std::string name, std::vector<std::string> cats) {
        return {std::move(name), FeatureKind::categorical, std::move(cats)};
    }

    bool operator==(const FeatureSpec&) const = default;
};

/// Feature declarations plus the label column. Validated on construction.
class Schema {
public:
    Schema() = default;
    Schema(std::vector<FeatureSpec> features, std::string label_name = "class",
           std::vector<std::string> class_names = {});

    const std::vector<FeatureSpec>& features() const noexcept { return features_; }
    const FeatureSpec& feature(std::size_t k) const { return features_.at(k); }
    std::size_t n_features() const noexcept { return features_.size(); }
    const std::string& label_name() const noexcept { return label_name_; }
    const std::vector<std::string>& class_names() const noexcept { return class_names_; }
    std::size_t class_count() const noexcept { return class_names_.size(); }

    /// Index of a feature by name; throws SchemaError when absent.
    std::size_t index_of(const std::string& name) const;
    /// Index of a category of feature k; throws SchemaError naming the feature.
    std::size_t category_index(std::size_t k, const std::string& value) const;
    std::size_t class_index(const std::string& value) const;

    bool operator==(const Schema&) const = default;

private:
    std::vector<FeatureSpec> features_;
    std::string label_name_;
    std::vector<std::string> class_names_;
};

inline constexpr int kNoLabel = -1;
inline constexpr const char* kMissingMarker = "?";

/// Parsed rows before imputation. Missing cells hold NaN.
struct ParsedRows {
    Schema schema;
    std::vector<double> cells;  // row-major, n_rows x n_features
    std::vector<int> labels;    // kNoLabel where absent
    std::size_t n_rows = 0;
};

/// Mixed-type table. Categorical cells hold the category index, numerical cells a
/// finite real. Immutable after construction.
class Table {
public:
    Table() = default;
    Table(Schema schema, std::vector<double> cells, std::vector<int> labels);

    const Schema& schema() const noexcept { return schema_; }
    std::size_t n_rows() const noexcept { return labels_.size(); }
    std::size_t n_features() const noexcept { return schema_.n_features(); }
    std::size_t class_count() const noexcept { return schema_.class_count(); }

    double at(std::size_t row, std::size_t k) const { return cells_[row * n_features() + k]; }
    std::span<const double> row(std::size_t r) const {
        return {cells_.data() + r * n_features(), n_features()};
    }
    const std::vector<double>& cells() const noexcept { return cells_; }
    const std::vector<int>& labels() const noexcept { return labels_; }
    int label(std::size_t row) const { return labels_[row]; }
    bool has_label(std::size_t row) const { return labels_[row] != kNoLabel; }

    bool operator==(const Table&) const = default;

private:
    Schema schema_;
    std::vector<double> cells_;
    std::vector<int> labels_;
};

/// Split text records into typed cells. Each record has one field per feature in
/// schema order plus the label field at `label_column` (npos: no label field).
ParsedRows parse_records(const std::vector<std::vector<std::string>>& records, const Schema& schema,
                         std::size_t label_column = std::numeric_limits<std::size_t>::max());

/// Impute missing cells from statistics over `train_rows` (numerical: mean,
/// categorical: mode, lowest index on ties). Empty span means all rows.
Table impute(const ParsedRows& parsed, std::span<const std::size_t> train_rows = {});

/// parse_records followed by impute over all rows.
Table load_table(const std::vector<std::vector<std::string>>& records, const Schema& schema,
                 std::size_t label_column = std::numeric_limits<std::size_t>::max());

struct SplitSpec {
    std::vector<std::size_t> labeled;
    std::vector<std::size_t> unlabeled;
    std::vector<std::size_t> test;
    std::uint64_t seed = 0;

    /// Labeled rows followed by unlabeled rows: the candidate pool [N_l + N_u].
    std::vector<std::size_t> training_rows() const;

    bool operator==(const SplitSpec&) const = default;
};

/// Stratified split over rows. Rows without a label always land in the unlabeled pool.
SplitSpec make_split(std::span<const int> labels, std::size_t class_count, double labeled_fraction,
                     double test_fraction, std::uint64_t seed);
inline SplitSpec make_split(const Table& t, double labeled_fraction, double test_fraction,
                            std::uint64_t seed) {
    return make_split(t.labels(), t.class_count(), labeled_fraction, test_fraction, seed);
}

/// One-hot for categorical features, z-score for numerical ones.
class OneHotEncoder {
public:
    OneHotEncoder() = default;
    OneHotEncoder(const Schema& schema, std::vector<double> means, std::vector<double> stds);

    std::size_t width() const noexcept { return width_; }
    std::size_t offset(std::size_t k) const { return offsets_.at(k); }
    const std::vector<double>& means() const noexcept { return means_; }
    const std::vector<double>& stds() const noexcept { return stds_; }
    const Schema& schema() const noexcept { return schema_; }

    /// Writes `width()` values into `out`.
    template <typename T>
    void encode_row(std::span<const double> row, std::span<T> out) const;

    std::vector<double> encode_row(std::span<const double> row) const {
        std::vector<double> out(width_);
        encode_row<double>(row, out);
        return out;
    }

    /// Inverse mapping: categorical blocks by argmax, numerical entries un-scaled.
    std::vector<double> decode_row(std::span<const double> encoded) const;

private:
    Schema schema_;
    std::vector<std::size_t> offsets_;
    std::vector<double> means_;  // per feature; unused for categorical
    std::vector<double> stds_;
    std::size_t width_ = 0;
};

/// Fits numerical statistics over labeled and unlabeled rows (population std,
/// constant columns get std 1).
OneHotEncoder fit_encoder(const Table& table, const SplitSpec& split);

template <typename T>
void OneHotEncoder::encode_row(std::span<const double> row, std::span<T> out) const {
    const auto& feats = schema_.features();
    for (std::size_t k = 0; k < feats.size(); ++k) {
        const std::size_t off = offsets_[k];
        if (feats[k].categorical()) {
            for (std::size_t c = 0; c < feats[k].cardinality(); ++c) out[off + c] = T(0);
            out[off + static_cast<std::size_t>(row[k])] = T(1);
        } else {
            out[off] = static_cast<T>((row[k] - means_[k]) / stds_[k]);
        }
    }
}

/// Minimal CSV reader: comma separated, double quotes, no embedded newlines.
std::vector<std::vector<std::string>> read_csv(const std::string& path);
std::vector<std::string> split_csv_line(const std::string& line);

/// Schema sidecar (JSON): {"label": ..., "classes": [...], "features": [{"name", "kind", "categories"}]}.
Schema read_schema_file(const std::string& path);
void write_schema_file(const Schema& schema, const std::string& path);
std::string schema_to_json(const Schema& schema);
Schema schema_from_json(const std::string& text);

/// Reads a CSV with header plus its schema sidecar. Columns are matched by name;
/// when the schema has no class list it is inferred from the data (sorted).
ParsedRows read_csv_dataset(const std::string& csv_path, const Schema& schema);

}  // namespace tabcl
