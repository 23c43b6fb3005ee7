#include "tabcl/correlation.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "tabcl/rng.hpp"

namespace tabcl {

void GbdtConfig::validate() const {
    if (!(learning_rate > 0 && learning_rate <= 1)) throw std::invalid_argument("gbdt learning_rate must be in (0,1]");
    if (max_depth < 1) throw std::invalid_argument("gbdt max_depth must be >= 1");
    if (n_rounds < 0) throw std::invalid_argument("gbdt n_rounds must be >= 0");
    if (min_samples_leaf < 1) throw std::invalid_argument("gbdt min_samples_leaf must be >= 1");
}

std::uint64_t GbdtConfig::hash() const {
    std::uint64_t lr_bits;
    static_assert(sizeof(lr_bits) == sizeof(learning_rate));
    std::memcpy(&lr_bits, &learning_rate, sizeof(lr_bits));
    return stream_seed(static_cast<std::uint64_t>(n_rounds), static_cast<std::uint64_t>(max_depth), lr_bits,
                       static_cast<std::uint64_t>(min_samples_leaf));
}

double RegressionTree::predict(std::span<const double> x) const {
    int n = 0;
    while (nodes[static_cast<std::size_t>(n)].feature >= 0) {
        const auto& node = nodes[static_cast<std::size_t>(n)];
        n = x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right;
    }
    return nodes[static_cast<std::size_t>(n)].value;
}

std::size_t RegressionTree::depth() const {
    std::vector<std::size_t> d(nodes.size(), 0);
    std::size_t best = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (nodes[i].feature >= 0) {
            d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
            d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
        }
        best = std::max(best, d[i]);
    }
    return best;
}

std::vector<double> GbdtModel::predict_raw(std::span<const double> x) const {
    std::vector<double> out = base_score;
    for (const auto& round : trees) {
        for (std::size_t o = 0; o < round.size(); ++o) out[o] += learning_rate * round[o].predict(x);
    }
    return out;
}

namespace {

struct SplitCandidate {
    double gain = 0.0;
    int feature = -1;
    double threshold = 0.0;
};

struct NodeStats {
    double sum = 0.0;
    double sum_sq = 0.0;
    std::size_t count = 0;
};

// Level-wise exact greedy growth on residuals with squared-error split gain.
// `leaf_value` maps the rows of a leaf to its output.
template <typename LeafFn>
RegressionTree grow_tree(const DesignMatrix& x, const std::vector<std::vector<std::size_t>>& sorted,
                         std::span<const double> residual, const GbdtConfig& cfg, std::vector<double>& gain,
                         LeafFn leaf_value) {
    const std::size_t n = x.rows;
    const auto min_leaf = static_cast<std::size_t>(cfg.min_samples_leaf);
    RegressionTree tree;
    tree.nodes.emplace_back();
    std::vector<int> node_of(n, 0);
    std::vector<NodeStats> stats(1);
    for (std::size_t r = 0; r < n; ++r) {
        stats[0].sum += residual[r];
        stats[0].sum_sq += residual[r] * residual[r];
        ++stats[0].count;
    }
    std::vector<int> frontier{0};
    for (int depth = 0; depth < cfg.max_depth && !frontier.empty(); ++depth) {
        std::vector<int> slot(tree.nodes.size(), -1);
        std::vector<int> active;
        for (int nd : frontier) {
            if (stats[static_cast<std::size_t>(nd)].count >= 2 * min_leaf) {
                slot[static_cast<std::size_t>(nd)] = static_cast<int>(active.size());
                active.push_back(nd);
            }
        }
        if (active.empty()) break;
        std::vector<SplitCandidate> best(active.size());
        std::vector<double> run_sum(active.size());
        std::vector<std::size_t> run_cnt(active.size());
        std::vector<double> last(active.size());
        for (std::size_t c = 0; c < x.cols; ++c) {
            std::fill(run_sum.begin(), run_sum.end(), 0.0);
            std::fill(run_cnt.begin(), run_cnt.end(), 0);
            for (std::size_t r : sorted[c]) {
                const int nd = node_of[r];
                if (nd < 0) continue;
                const int s = slot[static_cast<std::size_t>(nd)];
                if (s < 0) continue;
                const auto si = static_cast<std::size_t>(s);
                const double v = x.at(r, c);
                const NodeStats& total = stats[static_cast<std::size_t>(nd)];
                if (run_cnt[si] >= min_leaf && total.count - run_cnt[si] >= min_leaf && v > last[si]) {
                    const double nl = static_cast<double>(run_cnt[si]);
                    const double nr = static_cast<double>(total.count - run_cnt[si]);
                    const double sl = run_sum[si];
                    const double sr = total.sum - sl;
                    const double g = sl * sl / nl + sr * sr / nr - total.sum * total.sum / static_cast<double>(total.count);
                    if (g > best[si].gain) best[si] = {g, static_cast<int>(c), 0.5 * (last[si] + v)};
                }
                run_sum[si] += residual[r];
                ++run_cnt[si];
                last[si] = v;
            }
        }
        std::vector<int> next;
        std::vector<int> remap(tree.nodes.size(), -1);  // parent -> left child id
        for (std::size_t s = 0; s < active.size(); ++s) {
            const int nd = active[s];
            const NodeStats& total = stats[static_cast<std::size_t>(nd)];
            const double node_ss = total.sum_sq - total.sum * total.sum / static_cast<double>(total.count);
            if (best[s].feature < 0 || !(best[s].gain > 1e-9 * std::max(node_ss, 0.0)) || best[s].gain <= 0) continue;
            const int left = static_cast<int>(tree.nodes.size());
            tree.nodes.emplace_back();
            tree.nodes.emplace_back();
            stats.emplace_back();
            stats.emplace_back();
            auto& node = tree.nodes[static_cast<std::size_t>(nd)];
            node.feature = best[s].feature;
            node.threshold = best[s].threshold;
            node.left = left;
            node.right = left + 1;
            gain[static_cast<std::size_t>(best[s].feature)] += best[s].gain;
            remap[static_cast<std::size_t>(nd)] = left;
            next.push_back(left);
            next.push_back(left + 1);
        }
        for (std::size_t r = 0; r < n; ++r) {
            const int nd = node_of[r];
            if (nd < 0 || static_cast<std::size_t>(nd) >= remap.size() || remap[static_cast<std::size_t>(nd)] < 0) continue;
            const auto& node = tree.nodes[static_cast<std::size_t>(nd)];
            const int child = x.at(r, static_cast<std::size_t>(node.feature)) <= node.threshold ? node.left : node.right;
            node_of[r] = child;
            auto& st = stats[static_cast<std::size_t>(child)];
            st.sum += residual[r];
            st.sum_sq += residual[r] * residual[r];
            ++st.count;
        }
        frontier = std::move(next);
    }
    std::vector<std::vector<std::size_t>> members(tree.nodes.size());
    for (std::size_t r = 0; r < n; ++r) members[static_cast<std::size_t>(node_of[r])].push_back(r);
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
        if (tree.nodes[i].feature < 0) tree.nodes[i].value = leaf_value(members[i]);
    }
    return tree;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double log_loss(std::span<const double> y, std::span<const double> f) {
    double s = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        // log(1 + e^-z) for y=1, log(1 + e^z) for y=0, computed stably
        const double z = y[i] > 0.5 ? f[i] : -f[i];
        s += z > 0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z));
    }
    return s / static_cast<double>(y.size());
}

}  // namespace

GbdtFit fit_gbdt(const DesignMatrix& x, std::span<const double> target, GbdtTask task, std::size_t n_classes,
                 const GbdtConfig& cfg) {
    cfg.validate();
    const std::size_t n = x.rows;
    if (target.size() != n) throw std::invalid_argument("target length does not match design rows");
    if (n == 0) throw std::invalid_argument("cannot fit on zero rows");

    std::vector<std::vector<std::size_t>> sorted(x.cols);
    for (std::size_t c = 0; c < x.cols; ++c) {
        sorted[c].resize(n);
        std::iota(sorted[c].begin(), sorted[c].end(), std::size_t{0});
        std::stable_sort(sorted[c].begin(), sorted[c].end(),
                         [&](std::size_t a, std::size_t b) { return x.at(a, c) < x.at(b, c); });
    }

    GbdtFit fit;
    fit.gain.assign(x.cols, 0.0);
    fit.model.task = task;
    fit.model.learning_rate = cfg.learning_rate;
    const double lr = cfg.learning_rate;

    if (task == GbdtTask::regression) {
        fit.model.n_outputs = 1;
        const double mean = std::accumulate(target.begin(), target.end(), 0.0) / static_cast<double>(n);
        fit.model.base_score = {mean};
        std::vector<double> f(n, mean), r(n);
        auto sse = [&] {
            double s = 0;
            for (std::size_t i = 0; i < n; ++i) s += (target[i] - f[i]) * (target[i] - f[i]);
            return s / static_cast<double>(n);
        };
        fit.train_loss.push_back(sse());
        for (int round = 0; round < cfg.n_rounds; ++round) {
            for (std::size_t i = 0; i < n; ++i) r[i] = target[i] - f[i];
            auto tree = grow_tree(x, sorted, r, cfg, fit.gain, [&](const std::vector<std::size_t>& rows) {
                double s = 0;
                for (auto i : rows) s += r[i];
                return rows.empty() ? 0.0 : s / static_cast<double>(rows.size());
            });
            for (std::size_t i = 0; i < n; ++i) f[i] += lr * tree.predict(x.row(i));
            fit.model.trees.push_back({std::move(tree)});
            fit.train_loss.push_back(sse());
        }
    } else {
        if (n_classes < 2) throw std::invalid_argument("classification needs at least two classes");
        const std::size_t outputs = n_classes == 2 ? 1 : n_classes;
        fit.model.n_outputs = outputs;
        std::vector<std::vector<double>> y(outputs, std::vector<double>(n));
        for (std::size_t o = 0; o < outputs; ++o) {
            const double cls = outputs == 1 ? 1.0 : static_cast<double>(o);
            for (std::size_t i = 0; i < n; ++i) y[o][i] = target[i] == cls ? 1.0 : 0.0;
        }
        std::vector<std::vector<double>> f(outputs);
        for (std::size_t o = 0; o < outputs; ++o) {
            double prior = std::accumulate(y[o].begin(), y[o].end(), 0.0) / static_cast<double>(n);
            prior = std::clamp(prior, 1e-6, 1 - 1e-6);
            fit.model.base_score.push_back(std::log(prior / (1 - prior)));
            f[o].assign(n, fit.model.base_score.back());
        }
        auto loss = [&] {
            double s = 0;
            for (std::size_t o = 0; o < outputs; ++o) s += log_loss(y[o], f[o]);
            return s;
        };
        fit.train_loss.push_back(loss());
        std::vector<double> r(n), h(n);
        for (int round = 0; round < cfg.n_rounds; ++round) {
            std::vector<RegressionTree> per_output;
            for (std::size_t o = 0; o < outputs; ++o) {
                for (std::size_t i = 0; i < n; ++i) {
                    const double p = sigmoid(f[o][i]);
                    r[i] = y[o][i] - p;
                    h[i] = p * (1 - p);
                }
                auto tree = grow_tree(x, sorted, r, cfg, fit.gain, [&](const std::vector<std::size_t>& rows) {
                    double num = 0, den = 0;
                    for (auto i : rows) {
                        num += r[i];
                        den += h[i];
                    }
                    return std::clamp(num / std::max(den, 1e-6), -20.0, 20.0);
                });
                for (std::size_t i = 0; i < n; ++i) f[o][i] += lr * tree.predict(x.row(i));
                per_output.push_back(std::move(tree));
            }
            fit.model.trees.push_back(std::move(per_output));
            fit.train_loss.push_back(loss());
        }
    }

    const double total = std::accumulate(fit.gain.begin(), fit.gain.end(), 0.0);
    fit.importance.assign(x.cols, x.cols ? 1.0 / static_cast<double>(x.cols) : 0.0);
    if (total > 0) {
        for (std::size_t c = 0; c < x.cols; ++c) fit.importance[c] = fit.gain[c] / total;
    }
    return fit;
}

ImportanceProfile::ImportanceProfile(std::size_t m, std::vector<double> q) : m_(m), q_(std::move(q)) {
    if (q_.size() != m_ * m_) throw std::invalid_argument("profile matrix must be M x M");
}

std::vector<double> ImportanceProfile::q_vector(std::size_t k) const {
    std::vector<double> out;
    out.reserve(m_ ? m_ - 1 : 0);
    for (std::size_t j = 0; j < m_; ++j) {
        if (j != k) out.push_back(q(k, j));
    }
    return out;
}

bool ImportanceProfile::valid(double tol) const {
    if (m_ < 2) return m_ == 1 ? q_.size() == 1 && q_[0] == 0.0 : true;
    for (std::size_t k = 0; k < m_; ++k) {
        if (q(k, k) != 0.0) return false;
        double s = 0;
        for (std::size_t j = 0; j < m_; ++j) {
            if (j == k) continue;
            if (!(q(k, j) >= 0.0)) return false;
            s += q(k, j);
        }
        if (std::abs(s - 1.0) > tol) return false;
    }
    return true;
}

std::string ImportanceProfile::to_json(const std::string& dataset_id, std::uint64_t cfg_hash) const {
    nlohmann::ordered_json j;
    j["dataset"] = dataset_id;
    j["gbdt_config_hash"] = cfg_hash;
    j["n_features"] = m_;
    auto rows = nlohmann::ordered_json::array();
    for (std::size_t k = 0; k < m_; ++k) {
        rows.push_back(std::vector<double>(q_.begin() + static_cast<std::ptrdiff_t>(k * m_),
                                           q_.begin() + static_cast<std::ptrdiff_t>((k + 1) * m_)));
    }
    j["q"] = rows;
    return j.dump(1);
}

ImportanceProfile ImportanceProfile::from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    const auto m = j.at("n_features").get<std::size_t>();
    std::vector<double> q;
    q.reserve(m * m);
    for (const auto& row : j.at("q")) {
        for (const auto& v : row) q.push_back(v.get<double>());
    }
    return ImportanceProfile(m, std::move(q));
}

ImportanceProfile build_profiles(const Table& table, const SplitSpec& split, const GbdtConfig& cfg) {
    cfg.validate();
    const std::size_t m = table.n_features();
    const auto rows = split.training_rows();
    const auto& schema = table.schema();
    ImportanceProfile profile(m);
    if (m < 2) return profile;

    for (std::size_t k = 0; k < m; ++k) {
        // Design matrix over the other features; categorical ones one-hot encoded.
        std::vector<std::size_t> owner;
        for (std::size_t j = 0; j < m; ++j) {
            if (j == k) continue;
            const auto& f = schema.feature(j);
            const std::size_t w = f.categorical() ? f.cardinality() : 1;
            for (std::size_t c = 0; c < w; ++c) owner.push_back(j);
        }
        DesignMatrix x;
        x.rows = rows.size();
        x.cols = owner.size();
        x.values.reserve(x.rows * x.cols);
        std::vector<double> target;
        target.reserve(rows.size());
        for (auto r : rows) {
            for (std::size_t j = 0; j < m; ++j) {
                if (j == k) continue;
                const auto& f = schema.feature(j);
                if (f.categorical()) {
                    for (std::size_t c = 0; c < f.cardinality(); ++c) {
                        x.values.push_back(static_cast<std::size_t>(table.at(r, j)) == c ? 1.0 : 0.0);
                    }
                } else {
                    x.values.push_back(table.at(r, j));
                }
            }
            target.push_back(table.at(r, k));
        }

        const auto& fk = schema.feature(k);
        const bool constant = std::all_of(target.begin(), target.end(), [&](double v) { return v == target.front(); });
        std::vector<double> per_feature(m, 0.0);
        if (!constant) {
            const auto fit = fk.categorical()
                                 ? fit_gbdt(x, target, GbdtTask::classification, fk.cardinality(), cfg)
                                 : fit_gbdt(x, target, GbdtTask::regression, 0, cfg);
            for (std::size_t c = 0; c < owner.size(); ++c) per_feature[owner[c]] += fit.gain[c];
        }
        double total = 0;
        for (std::size_t j = 0; j < m; ++j) total += per_feature[j];
        for (std::size_t j = 0; j < m; ++j) {
            if (j == k) continue;
            profile.q(k, j) = total > 0 ? per_feature[j] / total : 1.0 / static_cast<double>(m - 1);
        }
    }
    return profile;
}

double correlation_value_range(const ImportanceProfile& profile) {
    const std::size_t m = profile.n_features();
    if (m < 2) throw std::invalid_argument("correlation value range needs at least two features");
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            if (i == j) continue;
            lo = std::min(lo, profile.q(i, j));
            hi = std::max(hi, profile.q(i, j));
        }
    }
    return hi - lo;
}

std::vector<double> corr_matrix(const ImportanceProfile& profile, CorrMode mode) {
    const std::size_t m = profile.n_features();
    std::vector<double> c(m * m, 0.0);
    const double sign = mode == CorrMode::most ? 1.0 : -1.0;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            if (i != j) c[i * m + j] = sign * profile.q(i, j);
        }
    }
    return c;
}

}  // namespace tabcl
