#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "tabcl/runner.hpp"

namespace tabcl {

using nlohmann::ordered_json;

namespace {

ordered_json train_json(const TrainConfig& t) {
    ordered_json j;
    j["pretrain_epochs"] = t.pretrain_epochs;
    j["finetune_epochs"] = t.finetune_epochs;
    j["update_interval"] = t.update_interval;
    j["refresh_epochs"] = t.refresh_epochs;
    j["batch_size"] = t.batch_size;
    j["corruption_rate"] = t.corruption_rate;
    j["temperature"] = t.temperature;
    j["learning_rate"] = t.learning_rate;
    j["hidden_width"] = t.hidden_width;
    j["encoder_layers"] = t.encoder_layers;
    j["projection_width"] = t.projection_width;
    j["warm_start_head"] = t.warm_start_head;
    j["reinit_head_on_refresh"] = t.reinit_head_on_refresh;
    j["force_ground_truth_labels"] = t.force_ground_truth_labels;
    j["gbdt"] = {{"n_rounds", t.gbdt.n_rounds},
                 {"max_depth", t.gbdt.max_depth},
                 {"learning_rate", t.gbdt.learning_rate},
                 {"min_samples_leaf", t.gbdt.min_samples_leaf}};
    return j;
}

ordered_json dataset_json(const DatasetSource& d) {
    ordered_json j;
    if (d.did > 0) {
        j["openml"] = d.did;
    } else {
        j["csv"] = d.csv_path;
        if (!d.schema_path.empty()) j["schema"] = d.schema_path;
    }
    if (!d.name.empty()) j["name"] = d.name;
    return j;
}

// Reads j[key] into out when present, rejecting unknown keys.
class Reader {
public:
    Reader(const nlohmann::json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) throw ConfigError(where_ + " must be an object");
    }
    template <typename T>
    void opt(const char* key, T& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const nlohmann::json::exception&) {
            throw ConfigError(where_ + "." + key + " has the wrong type");
        }
    }
    const nlohmann::json* sub(const char* key) {
        seen_.insert(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }
    void finish() const {
        for (const auto& [k, _] : j_.items()) {
            if (!seen_.count(k)) throw ConfigError("unknown field " + where_ + "." + k);
        }
    }

private:
    const nlohmann::json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

void read_train(const nlohmann::json& j, TrainConfig& t) {
    Reader r(j, "train");
    r.opt("pretrain_epochs", t.pretrain_epochs);
    r.opt("finetune_epochs", t.finetune_epochs);
    r.opt("update_interval", t.update_interval);
    r.opt("refresh_epochs", t.refresh_epochs);
    r.opt("batch_size", t.batch_size);
    r.opt("corruption_rate", t.corruption_rate);
    r.opt("temperature", t.temperature);
    r.opt("learning_rate", t.learning_rate);
    r.opt("hidden_width", t.hidden_width);
    r.opt("encoder_layers", t.encoder_layers);
    r.opt("projection_width", t.projection_width);
    r.opt("warm_start_head", t.warm_start_head);
    r.opt("reinit_head_on_refresh", t.reinit_head_on_refresh);
    r.opt("force_ground_truth_labels", t.force_ground_truth_labels);
    if (const auto* g = r.sub("gbdt")) {
        Reader rg(*g, "train.gbdt");
        rg.opt("n_rounds", t.gbdt.n_rounds);
        rg.opt("max_depth", t.gbdt.max_depth);
        rg.opt("learning_rate", t.gbdt.learning_rate);
        rg.opt("min_samples_leaf", t.gbdt.min_samples_leaf);
        rg.finish();
    }
    r.finish();
}

}  // namespace

void RunManifest::validate() const {
    const bool has_did = dataset.did > 0;
    const bool has_csv = !dataset.csv_path.empty();
    if (has_did == has_csv) throw ConfigError("dataset needs exactly one of an OpenML id or a CSV path");
    if (has_csv && !std::filesystem::exists(dataset.csv_path)) {
        throw ConfigError("dataset file not found: " + dataset.csv_path);
    }
    if (seeds.empty()) throw ConfigError("seed list is empty");
    if (methods.empty()) throw ConfigError("method list is empty");
    if (subset_modes.empty()) throw ConfigError("subset mode list is empty");
    if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
        throw ConfigError("seed list has duplicates");
    }
    if (!(labeled_fraction > 0 && labeled_fraction < 1 && test_fraction > 0 && test_fraction < 1 &&
          labeled_fraction + test_fraction < 1)) {
        throw ConfigError("split fractions must lie in (0,1) and sum to less than 1");
    }
    for (const auto& [name, kind] : schema_overrides) {
        if (kind != "categorical" && kind != "numerical") {
            throw ConfigError("schema override for '" + name + "' must be categorical or numerical");
        }
    }
    try {
        train.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("train: ") + e.what());
    }
}

std::string RunManifest::hash() const {
    ordered_json j;
    j["dataset"] = dataset_json(dataset);
    j["schema_overrides"] = schema_overrides;
    j["labeled_fraction"] = labeled_fraction;
    j["test_fraction"] = test_fraction;
    j["train"] = train_json(train);
    return sha256_hex(j.dump()).substr(0, 16);
}

std::string manifest_to_json(const RunManifest& m) {
    ordered_json j;
    j["dataset"] = dataset_json(m.dataset);
    j["schema_overrides"] = m.schema_overrides;
    j["labeled_fraction"] = m.labeled_fraction;
    j["test_fraction"] = m.test_fraction;
    auto methods = ordered_json::array();
    for (auto x : m.methods) methods.push_back(to_string(x));
    j["methods"] = methods;
    auto modes = ordered_json::array();
    for (auto x : m.subset_modes) modes.push_back(to_string(x));
    j["subset_modes"] = modes;
    j["seeds"] = m.seeds;
    j["output_dir"] = m.output_dir;
    j["cache_dir"] = m.cache_dir;
    j["save_checkpoints"] = m.save_checkpoints;
    j["save_projections"] = m.save_projections;
    j["train"] = train_json(m.train);
    return j.dump(2) + "\n";
}

RunManifest manifest_from_json(const std::string& text, RunManifest base) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("manifest is not valid JSON: ") + e.what());
    }
    RunManifest m = std::move(base);
    Reader r(j, "manifest");
    if (const auto* d = r.sub("dataset")) {
        Reader rd(*d, "dataset");
        m.dataset = {};
        rd.opt("openml", m.dataset.did);
        rd.opt("csv", m.dataset.csv_path);
        rd.opt("schema", m.dataset.schema_path);
        rd.opt("name", m.dataset.name);
        rd.finish();
    }
    r.opt("schema_overrides", m.schema_overrides);
    r.opt("labeled_fraction", m.labeled_fraction);
    r.opt("test_fraction", m.test_fraction);
    std::vector<std::string> methods, modes;
    r.opt("methods", methods);
    r.opt("subset_modes", modes);
    try {
        if (!methods.empty()) {
            m.methods.clear();
            for (const auto& s : methods) m.methods.push_back(method_from_string(s));
        }
        if (!modes.empty()) {
            m.subset_modes.clear();
            for (const auto& s : modes) m.subset_modes.push_back(subset_mode_from_string(s));
        }
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    r.opt("seeds", m.seeds);
    r.opt("output_dir", m.output_dir);
    r.opt("cache_dir", m.cache_dir);
    r.opt("save_checkpoints", m.save_checkpoints);
    r.opt("save_projections", m.save_projections);
    if (const auto* t = r.sub("train")) read_train(*t, m.train);
    r.finish();
    return m;
}

RunManifest read_manifest(const std::string& path, RunManifest base) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read manifest " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return manifest_from_json(os.str(), std::move(base));
}

std::string record_to_json(const RunRecord& r) {
    ordered_json j;
    j["dataset"] = r.dataset;
    j["method"] = r.method;
    j["subset_mode"] = r.subset_mode;
    j["seed"] = r.seed;
    j["manifest_hash"] = r.manifest_hash;
    j["accuracy"] = r.accuracy;
    j["auroc"] = r.auroc;
    j["head_refreshes"] = r.head_refreshes;
    if (r.correlation_range) j["correlation_range"] = *r.correlation_range;
    j["loss_curve"] = r.loss_curve;
    return j.dump() + "\n";
}

RunRecord record_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    RunRecord r;
    r.dataset = j.at("dataset").get<std::string>();
    r.method = j.at("method").get<std::string>();
    r.subset_mode = j.at("subset_mode").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.manifest_hash = j.at("manifest_hash").get<std::string>();
    r.accuracy = j.at("accuracy").get<double>();
    r.auroc = j.at("auroc").is_null() ? std::nan("") : j.at("auroc").get<double>();
    r.head_refreshes = j.at("head_refreshes").get<std::size_t>();
    if (j.contains("correlation_range")) r.correlation_range = j.at("correlation_range").get<double>();
    r.loss_curve = j.at("loss_curve").get<std::vector<double>>();
    return r;
}

}  // namespace tabcl
