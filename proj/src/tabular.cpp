#include "tabcl/tabular.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "tabcl/rng.hpp"

namespace tabcl {

Schema::Schema(std::vector<FeatureSpec> features, std::string label_name,
               std::vector<std::string> class_names)
    : features_(std::move(features)), label_name_(std::move(label_name)),
      class_names_(std::move(class_names)) {
    std::unordered_set<std::string> seen;
    for (const auto& f : features_) {
        if (!seen.insert(f.name).second) throw SchemaError("duplicate feature name '" + f.name + "'");
        if (f.categorical() && f.categories.empty()) {
            throw SchemaError("categorical feature '" + f.name + "' has no categories");
        }
        if (!f.categorical() && !f.categories.empty()) {
            throw SchemaError("numerical feature '" + f.name + "' declares categories");
        }
    }
}

std::size_t Schema::index_of(const std::string& name) const {
    for (std::size_t k = 0; k < features_.size(); ++k) {
        if (features_[k].name == name) return k;
    }
    throw SchemaError("unknown feature '" + name + "'");
}

std::size_t Schema::category_index(std::size_t k, const std::string& value) const {
    const auto& cats = features_.at(k).categories;
    auto it = std::find(cats.begin(), cats.end(), value);
    if (it == cats.end()) {
        throw SchemaError("unknown category '" + value + "' for feature '" + features_[k].name + "'");
    }
    return static_cast<std::size_t>(it - cats.begin());
}

std::size_t Schema::class_index(const std::string& value) const {
    auto it = std::find(class_names_.begin(), class_names_.end(), value);
    if (it == class_names_.end()) {
        throw SchemaError("unknown class '" + value + "' for label '" + label_name_ + "'");
    }
    return static_cast<std::size_t>(it - class_names_.begin());
}

Table::Table(Schema schema, std::vector<double> cells, std::vector<int> labels)
    : schema_(std::move(schema)), cells_(std::move(cells)), labels_(std::move(labels)) {
    const std::size_t m = schema_.n_features();
    if (cells_.size() != labels_.size() * m) throw SchemaError("cell count does not match rows x features");
    for (std::size_t r = 0; r < labels_.size(); ++r) {
        for (std::size_t k = 0; k < m; ++k) {
            const double v = cells_[r * m + k];
            const auto& f = schema_.feature(k);
            if (!std::isfinite(v)) throw SchemaError("non-finite cell in feature '" + f.name + "'");
            if (f.categorical() && (v < 0 || v >= static_cast<double>(f.cardinality()) || v != std::floor(v))) {
                throw SchemaError("category index out of range in feature '" + f.name + "'");
            }
        }
        if (labels_[r] != kNoLabel &&
            (labels_[r] < 0 || static_cast<std::size_t>(labels_[r]) >= schema_.class_count())) {
            throw SchemaError("label out of range at row " + std::to_string(r));
        }
    }
}

ParsedRows parse_records(const std::vector<std::vector<std::string>>& records, const Schema& schema,
                         std::size_t label_column) {
    const std::size_t m = schema.n_features();
    const bool has_label = label_column != std::numeric_limits<std::size_t>::max();
    const std::size_t expected = m + (has_label ? 1 : 0);
    ParsedRows out;
    out.schema = schema;
    out.n_rows = records.size();
    out.cells.reserve(records.size() * m);
    out.labels.reserve(records.size());
    for (std::size_t r = 0; r < records.size(); ++r) {
        const auto& rec = records[r];
        if (rec.size() != expected) {
            throw ParseError("expected " + std::to_string(expected) + " fields, got " + std::to_string(rec.size()),
                             r + 1);
        }
        std::size_t k = 0;
        for (std::size_t col = 0; col < rec.size(); ++col) {
            if (has_label && col == label_column) continue;
            const std::string& field = rec[col];
            const auto& f = schema.feature(k);
            if (field == kMissingMarker) {
                out.cells.push_back(std::numeric_limits<double>::quiet_NaN());
            } else if (f.categorical()) {
                out.cells.push_back(static_cast<double>(schema.category_index(k, field)));
            } else {
                double v = 0;
                try {
                    std::size_t used = 0;
                    v = std::stod(field, &used);
                    if (used != field.size()) throw std::invalid_argument(field);
                } catch (const std::exception&) {
                    throw ParseError("bad numeric value '" + field + "' for feature '" + f.name + "'", r + 1);
                }
                if (!std::isfinite(v)) {
                    out.cells.push_back(std::numeric_limits<double>::quiet_NaN());
                } else {
                    out.cells.push_back(v);
                }
            }
            ++k;
        }
        if (has_label && rec[label_column] != kMissingMarker) {
            out.labels.push_back(static_cast<int>(schema.class_index(rec[label_column])));
        } else {
            out.labels.push_back(kNoLabel);
        }
    }
    return out;
}

Table impute(const ParsedRows& parsed, std::span<const std::size_t> train_rows) {
    const std::size_t m = parsed.schema.n_features();
    std::vector<std::size_t> all;
    if (train_rows.empty()) {
        all.resize(parsed.n_rows);
        std::iota(all.begin(), all.end(), std::size_t{0});
        train_rows = all;
    }
    std::vector<double> fill(m, 0.0);
    for (std::size_t k = 0; k < m; ++k) {
        const auto& f = parsed.schema.feature(k);
        if (f.categorical()) {
            std::vector<std::size_t> counts(f.cardinality(), 0);
            for (auto r : train_rows) {
                const double v = parsed.cells[r * m + k];
                if (!std::isnan(v)) ++counts[static_cast<std::size_t>(v)];
            }
            fill[k] = static_cast<double>(std::max_element(counts.begin(), counts.end()) - counts.begin());
        } else {
            double sum = 0;
            std::size_t n = 0;
            for (auto r : train_rows) {
                const double v = parsed.cells[r * m + k];
                if (!std::isnan(v)) {
                    sum += v;
                    ++n;
                }
            }
            fill[k] = n ? sum / static_cast<double>(n) : 0.0;
        }
    }
    std::vector<double> cells = parsed.cells;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (std::isnan(cells[i])) cells[i] = fill[i % m];
    }
    return Table(parsed.schema, std::move(cells), parsed.labels);
}

Table load_table(const std::vector<std::vector<std::string>>& records, const Schema& schema,
                 std::size_t label_column) {
    return impute(parse_records(records, schema, label_column));
}

std::vector<std::size_t> SplitSpec::training_rows() const {
    std::vector<std::size_t> rows = labeled;
    rows.insert(rows.end(), unlabeled.begin(), unlabeled.end());
    return rows;
}

namespace {

// Largest-remainder apportionment of round(total * frac) across classes.
std::vector<std::size_t> apportion(const std::vector<std::size_t>& sizes, const std::vector<std::size_t>& caps,
                                   double frac) {
    const std::size_t total = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
    auto target = static_cast<std::size_t>(std::llround(static_cast<double>(total) * frac));
    std::vector<std::size_t> out(sizes.size());
    std::vector<std::pair<double, std::size_t>> rem;
    std::size_t given = 0;
    for (std::size_t c = 0; c < sizes.size(); ++c) {
        const double exact = static_cast<double>(sizes[c]) * frac;
        out[c] = std::min(static_cast<std::size_t>(std::floor(exact)), caps[c]);
        given += out[c];
        rem.emplace_back(exact - std::floor(exact), c);
    }
    std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t pass = 0; pass < 2 && given < target; ++pass) {
        for (const auto& [r, c] : rem) {
            if (given >= target) break;
            if (out[c] < caps[c]) {
                ++out[c];
                ++given;
            }
        }
    }
    return out;
}

}  // namespace

SplitSpec make_split(std::span<const int> labels, std::size_t class_count, double labeled_fraction,
                     double test_fraction, std::uint64_t seed) {
    if (!(labeled_fraction > 0 && labeled_fraction < 1) || !(test_fraction > 0 && test_fraction < 1) ||
        labeled_fraction + test_fraction >= 1) {
        throw SplitError("fractions must lie in (0,1) with labeled + test < 1");
    }
    std::vector<std::vector<std::size_t>> by_class(class_count);
    SplitSpec split;
    split.seed = seed;
    for (std::size_t r = 0; r < labels.size(); ++r) {
        if (labels[r] == kNoLabel) {
            split.unlabeled.push_back(r);
        } else {
            by_class.at(static_cast<std::size_t>(labels[r])).push_back(r);
        }
    }
    Rng rng(stream_seed(seed, 0x5B117));
    std::vector<std::size_t> sizes(class_count);
    for (std::size_t c = 0; c < class_count; ++c) {
        rng.shuffle(by_class[c]);
        sizes[c] = by_class[c].size();
    }
    const auto n_test = apportion(sizes, sizes, test_fraction);
    std::vector<std::size_t> caps(class_count);
    for (std::size_t c = 0; c < class_count; ++c) caps[c] = sizes[c] - n_test[c];
    const auto n_lab = apportion(sizes, caps, labeled_fraction);
    for (std::size_t c = 0; c < class_count; ++c) {
        if (sizes[c] == 0) continue;
        if (n_lab[c] == 0) {
            throw SplitError("class " + std::to_string(c) + " has no labeled representative (" +
                             std::to_string(sizes[c]) + " rows)");
        }
        const auto& rows = by_class[c];
        split.test.insert(split.test.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_test[c]));
        split.labeled.insert(split.labeled.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_test[c]),
                             rows.begin() + static_cast<std::ptrdiff_t>(n_test[c] + n_lab[c]));
        split.unlabeled.insert(split.unlabeled.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_test[c] + n_lab[c]),
                               rows.end());
    }
    std::sort(split.labeled.begin(), split.labeled.end());
    std::sort(split.unlabeled.begin(), split.unlabeled.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

OneHotEncoder::OneHotEncoder(const Schema& schema, std::vector<double> means, std::vector<double> stds)
    : schema_(schema), means_(std::move(means)), stds_(std::move(stds)) {
    offsets_.reserve(schema_.n_features());
    for (const auto& f : schema_.features()) {
        offsets_.push_back(width_);
        width_ += f.categorical() ? f.cardinality() : 1;
    }
}

std::vector<double> OneHotEncoder::decode_row(std::span<const double> encoded) const {
    const auto& feats = schema_.features();
    std::vector<double> row(feats.size());
    for (std::size_t k = 0; k < feats.size(); ++k) {
        const std::size_t off = offsets_[k];
        if (feats[k].categorical()) {
            auto block = encoded.subspan(off, feats[k].cardinality());
            row[k] = static_cast<double>(std::max_element(block.begin(), block.end()) - block.begin());
        } else {
            row[k] = encoded[off] * stds_[k] + means_[k];
        }
    }
    return row;
}

OneHotEncoder fit_encoder(const Table& table, const SplitSpec& split) {
    const std::size_t m = table.n_features();
    std::vector<double> means(m, 0.0), stds(m, 1.0);
    const auto rows = split.training_rows();
    for (std::size_t k = 0; k < m; ++k) {
        if (table.schema().feature(k).categorical() || rows.empty()) continue;
        double sum = 0;
        for (auto r : rows) sum += table.at(r, k);
        const double mean = sum / static_cast<double>(rows.size());
        double ss = 0;
        for (auto r : rows) ss += (table.at(r, k) - mean) * (table.at(r, k) - mean);
        const double sd = std::sqrt(ss / static_cast<double>(rows.size()));
        means[k] = mean;
        // Guard against constant columns and rounding noise from a constant column.
        stds[k] = sd > 1e-12 * std::max(1.0, std::abs(mean)) ? sd : 1.0;
    }
    return OneHotEncoder(table.schema(), std::move(means), std::move(stds));
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    fields.push_back(std::move(cur));
    for (auto& f : fields) {
        const auto b = f.find_first_not_of(" \t");
        const auto e = f.find_last_not_of(" \t");
        f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
    }
    return fields;
}

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        rows.push_back(split_csv_line(line));
    }
    return rows;
}

std::string schema_to_json(const Schema& schema) {
    nlohmann::ordered_json j;
    j["label"] = schema.label_name();
    j["classes"] = schema.class_names();
    auto feats = nlohmann::ordered_json::array();
    for (const auto& f : schema.features()) {
        nlohmann::ordered_json jf;
        jf["name"] = f.name;
        jf["kind"] = f.categorical() ? "categorical" : "numerical";
        if (f.categorical()) jf["categories"] = f.categories;
        feats.push_back(jf);
    }
    j["features"] = feats;
    return j.dump(2);
}

Schema schema_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("schema file is not valid JSON: ") + e.what());
    }
    std::vector<FeatureSpec> feats;
    for (const auto& jf : j.at("features")) {
        const std::string kind = jf.at("kind").get<std::string>();
        if (kind == "categorical") {
            feats.push_back(FeatureSpec::categorical(jf.at("name"), jf.at("categories").get<std::vector<std::string>>()));
        } else if (kind == "numerical") {
            feats.push_back(FeatureSpec::numerical(jf.at("name")));
        } else {
            throw SchemaError("unknown feature kind '" + kind + "'");
        }
    }
    std::vector<std::string> classes;
    if (j.contains("classes")) classes = j["classes"].get<std::vector<std::string>>();
    return Schema(std::move(feats), j.value("label", std::string("class")), std::move(classes));
}

Schema read_schema_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open schema file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return schema_from_json(ss.str());
}

void write_schema_file(const Schema& schema, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << schema_to_json(schema) << '\n';
}

ParsedRows read_csv_dataset(const std::string& csv_path, const Schema& schema) {
    auto rows = read_csv(csv_path);
    if (rows.empty()) throw ParseError("missing header", 0);
    const auto header = rows.front();
    rows.erase(rows.begin());
    std::vector<std::size_t> source(schema.n_features());
    std::size_t label_col = std::numeric_limits<std::size_t>::max();
    for (std::size_t k = 0; k < schema.n_features(); ++k) {
        auto it = std::find(header.begin(), header.end(), schema.feature(k).name);
        if (it == header.end()) throw SchemaError("column '" + schema.feature(k).name + "' not in CSV header");
        source[k] = static_cast<std::size_t>(it - header.begin());
    }
    auto lit = std::find(header.begin(), header.end(), schema.label_name());
    if (lit != header.end()) label_col = static_cast<std::size_t>(lit - header.begin());

    Schema resolved = schema;
    if (schema.class_names().empty() && label_col != std::numeric_limits<std::size_t>::max()) {
        std::set<std::string> seen;
        for (const auto& r : rows) {
            if (label_col < r.size() && r[label_col] != kMissingMarker) seen.insert(r[label_col]);
        }
        resolved = Schema(schema.features(), schema.label_name(), {seen.begin(), seen.end()});
    }
    // Reorder into schema order with the label last.
    std::vector<std::vector<std::string>> records;
    records.reserve(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != header.size()) {
            throw ParseError("expected " + std::to_string(header.size()) + " fields, got " +
                                 std::to_string(rows[r].size()),
                             r + 1);
        }
        std::vector<std::string> rec;
        rec.reserve(source.size() + 1);
        for (auto c : source) rec.push_back(rows[r][c]);
        if (label_col != std::numeric_limits<std::size_t>::max()) rec.push_back(rows[r][label_col]);
        records.push_back(std::move(rec));
    }
    const std::size_t lc =
        label_col != std::numeric_limits<std::size_t>::max() ? source.size() : std::numeric_limits<std::size_t>::max();
    return parse_records(records, resolved, lc);
}

}  // namespace tabcl
