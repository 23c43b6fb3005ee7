#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "tabcl/runner.hpp"

namespace tabcl {

namespace {

std::size_t arm_rank(const std::string& arm) {
    static const std::vector<std::string> order = {
        "no_pretrain", "random", "class_conditioned", "oracle",
    };
    const auto base = arm.substr(0, arm.find('+'));
    const auto it = std::find(order.begin(), order.end(), base);
    const std::size_t mode = arm.find("least") != std::string::npos ? 1 : arm.find("most") != std::string::npos ? 2 : 0;
    return static_cast<std::size_t>(it - order.begin()) * 3 + mode;
}

std::string pct(const MeanStd& s) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f ± %.2f", 100 * s.mean, 100 * s.std);
    return buf;
}

using Cells = std::map<std::string, std::map<std::string, std::vector<const RunRecord*>>>;

std::string metric_table(const Cells& cells, const std::vector<std::string>& datasets,
                         const std::vector<std::string>& arms, bool use_auroc) {
    std::ostringstream os;
    os << "dataset";
    for (const auto& a : arms) os << '\t' << a;
    os << '\n';
    for (const auto& ds : datasets) {
        os << ds;
        const auto& row = cells.at(ds);
        for (const auto& a : arms) {
            os << '\t';
            auto it = row.find(a);
            if (it == row.end()) {
                os << "—";
                continue;
            }
            std::vector<double> v;
            for (const auto* r : it->second) v.push_back(use_auroc ? r->auroc : r->accuracy);
            os << pct(mean_std(v));
        }
        os << '\n';
    }
    return os.str();
}

}  // namespace

std::string arm_label(const std::string& method, const std::string& subset_mode) {
    return subset_mode == "uniform" ? method : method + "+" + subset_mode;
}

ReportTables build_report(const std::vector<RunRecord>& records, const std::vector<std::string>& datasets) {
    Cells cells;
    std::set<std::string> arm_set;
    std::map<std::string, std::set<std::uint64_t>> seen;
    std::vector<std::string> duplicates;
    for (const auto& r : records) {
        if (!datasets.empty() && std::find(datasets.begin(), datasets.end(), r.dataset) == datasets.end()) continue;
        const auto arm = arm_label(r.method, r.subset_mode);
        if (!seen[r.dataset + "\t" + arm].insert(r.seed).second) {
            duplicates.push_back(r.dataset + " / " + arm + " / seed " + std::to_string(r.seed));
        }
        cells[r.dataset][arm].push_back(&r);
        arm_set.insert(arm);
    }
    if (!duplicates.empty()) {
        std::string msg = "records from different manifests share a cell:";
        for (const auto& d : duplicates) msg += "\n  " + d;
        throw ConfigError(msg);
    }
    if (cells.empty()) throw ConfigError("no records match the dataset filter");

    // Every cell must have the same number of seeds.
    std::map<std::size_t, std::size_t> count_freq;
    for (const auto& [ds, row] : cells) {
        for (const auto& [arm, recs] : row) ++count_freq[recs.size()];
    }
    const std::size_t expected =
        std::max_element(count_freq.begin(), count_freq.end(), [](auto& a, auto& b) { return a.second < b.second; })
            ->first;
    std::vector<std::string> offenders;
    for (const auto& [ds, row] : cells) {
        for (const auto& [arm, recs] : row) {
            if (recs.size() != expected || recs.size() < 2) {
                offenders.push_back(ds + " / " + arm + ": " + std::to_string(recs.size()) + " seeds");
            }
        }
    }
    if (!offenders.empty()) {
        std::string msg = "seed counts differ (expected " + std::to_string(expected) + ", at least 2):";
        for (const auto& o : offenders) msg += "\n  " + o;
        throw ConfigError(msg);
    }

    ReportTables out;
    for (const auto& [ds, _] : cells) out.datasets.push_back(ds);
    std::vector<std::string> arms(arm_set.begin(), arm_set.end());
    std::stable_sort(arms.begin(), arms.end(),
                     [](const std::string& a, const std::string& b) { return arm_rank(a) < arm_rank(b); });
    out.accuracy = metric_table(cells, out.datasets, arms, false);
    out.auroc = metric_table(cells, out.datasets, arms, true);

    std::vector<MetricSample> samples;
    for (const auto& [ds, row] : cells) {
        for (const auto& arm : arms) {
            auto it = row.find(arm);
            if (it == row.end()) continue;
            for (const auto* r : it->second) samples.push_back({ds, arm, r->seed, r->accuracy, r->auroc});
        }
    }
    out.win_accuracy = win_matrix(samples, 0.05, Metric::accuracy);

    // Correlation masking table over the class-conditioned arms.
    std::ostringstream corr;
    const std::vector<std::pair<std::string, std::string>> cols = {
        {"random features", "class_conditioned"},
        {"least correlated", "class_conditioned+least_correlated"},
        {"most correlated", "class_conditioned+most_correlated"},
    };
    corr << "dataset\tcorrelation value range";
    for (const auto& c : cols) corr << '\t' << c.first << " (acc)";
    for (const auto& c : cols) corr << '\t' << c.first << " (auroc)";
    corr << '\n';
    for (const auto& ds : out.datasets) {
        const auto& row = cells.at(ds);
        std::vector<double> ranges;
        for (const auto& [arm, recs] : row) {
            for (const auto* r : recs) {
                if (r->correlation_range) ranges.push_back(*r->correlation_range);
            }
        }
        if (ranges.empty()) continue;
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.4f", mean_std(ranges).mean);
        corr << ds << '\t' << buf;
        for (int metric = 0; metric < 2; ++metric) {
            for (const auto& c : cols) {
                corr << '\t';
                auto it = row.find(c.second);
                if (it == row.end()) {
                    corr << "—";
                    continue;
                }
                std::vector<double> v;
                for (const auto* r : it->second) v.push_back(metric ? r->auroc : r->accuracy);
                corr << pct(mean_std(v));
            }
        }
        corr << '\n';
    }
    out.correlation = corr.str();
    return out;
}

void write_report(const ReportTables& r, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto put = [&](const char* name, const std::string& text) {
        std::ofstream out(dir / name);
        if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
        out << text;
    };
    put("accuracy.tsv", r.accuracy);
    put("auroc.tsv", r.auroc);
    put("win_matrix_accuracy.tsv", r.win_accuracy.to_table());
    put("correlation.tsv", r.correlation);
}

}  // namespace tabcl
