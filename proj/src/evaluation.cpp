#include "tabcl/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>

namespace tabcl {

double accuracy(std::span<const int> predictions, std::span<const int> truth) {
    if (predictions.size() != truth.size()) throw std::invalid_argument("accuracy: length mismatch");
    if (truth.empty()) throw std::invalid_argument("accuracy: empty input");
    std::size_t hit = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) hit += predictions[i] == truth[i] ? 1 : 0;
    return static_cast<double>(hit) / static_cast<double>(truth.size());
}

double binary_auroc(std::span<const double> score, std::span<const bool> positive) {
    const std::size_t n = score.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return score[a] < score[b]; });
    double rank_sum = 0;
    std::size_t n_pos = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && score[order[j]] == score[order[i]]) ++j;
        const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1 .. j
        for (std::size_t k = i; k < j; ++k) {
            if (positive[order[k]]) {
                rank_sum += midrank;
                ++n_pos;
            }
        }
        i = j;
    }
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) throw std::invalid_argument("auroc needs both positives and negatives");
    const double np = static_cast<double>(n_pos);
    return (rank_sum - np * (np + 1) / 2) / (np * static_cast<double>(n_neg));
}

double auroc(std::span<const double> scores, std::size_t n_classes, std::span<const int> truth) {
    if (scores.size() != truth.size() * n_classes) throw std::invalid_argument("auroc: score shape mismatch");
    std::vector<std::size_t> counts(n_classes, 0);
    for (int t : truth) ++counts.at(static_cast<std::size_t>(t));
    const auto present = std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; });
    if (present < 2) throw std::invalid_argument("auroc needs at least two classes present in truth");
    double total = 0;
    std::size_t used = 0;
    std::vector<double> col(truth.size());
    auto pos = std::make_unique<bool[]>(truth.size());
    for (std::size_t c = 0; c < n_classes; ++c) {
        if (counts[c] == 0) continue;
        for (std::size_t i = 0; i < truth.size(); ++i) {
            col[i] = scores[i * n_classes + c];
            pos[i] = truth[i] == static_cast<int>(c);
        }
        total += binary_auroc(col, std::span<const bool>(pos.get(), truth.size()));
        ++used;
    }
    return total / static_cast<double>(used);
}

double student_t_two_sided(double t, double df) {
    if (std::isnan(t)) return std::numeric_limits<double>::quiet_NaN();
    if (std::isinf(t)) return 0.0;
    boost::math::students_t dist(df);
    return std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))), 0.0, 1.0);
}

MeanStd mean_std(std::span<const double> values) {
    MeanStd out;
    out.n = values.size();
    if (values.empty()) return out;
    out.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0;
        for (double v : values) ss += (v - out.mean) * (v - out.mean);
        out.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return out;
}

WelchResult welch_t_test(std::span<const double> a, std::span<const double> b) {
    if (a.size() < 2 || b.size() < 2) throw std::invalid_argument("welch t-test needs at least two values per sample");
    const auto sa = mean_std(a);
    const auto sb = mean_std(b);
    const double va = sa.std * sa.std / static_cast<double>(a.size());
    const double vb = sb.std * sb.std / static_cast<double>(b.size());
    WelchResult r;
    const double se2 = va + vb;
    if (se2 == 0) {
        if (sa.mean == sb.mean) return {0.0, static_cast<double>(a.size() + b.size() - 2), 1.0};
        return {sa.mean > sb.mean ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity(),
                static_cast<double>(a.size() + b.size() - 2), 0.0};
    }
    r.t = (sa.mean - sb.mean) / std::sqrt(se2);
    r.df = se2 * se2 /
           (va * va / static_cast<double>(a.size() - 1) + vb * vb / static_cast<double>(b.size() - 1));
    r.p = student_t_two_sided(r.t, r.df);
    return r;
}

WinMatrix win_matrix(std::span<const MetricSample> samples, double alpha, Metric metric) {
    std::map<std::string, std::map<std::string, std::vector<std::pair<std::uint64_t, double>>>> cells;
    std::vector<std::string> methods;
    for (const auto& s : samples) {
        cells[s.dataset][s.method].emplace_back(s.seed, metric == Metric::accuracy ? s.accuracy : s.auroc);
        if (std::find(methods.begin(), methods.end(), s.method) == methods.end()) methods.push_back(s.method);
    }
    std::size_t seeds = 0;
    for (auto& [ds, by_method] : cells) {
        for (auto& [m, vals] : by_method) {
            if (seeds == 0) seeds = vals.size();
            if (vals.size() != seeds || vals.size() < 2) {
                throw std::invalid_argument("win matrix: cell (" + ds + ", " + m + ") has " +
                                            std::to_string(vals.size()) + " seeds, expected " + std::to_string(seeds) +
                                            " (>= 2)");
            }
            std::sort(vals.begin(), vals.end());
        }
    }
    const std::size_t k = methods.size();
    WinMatrix w;
    w.methods = methods;
    w.ratio.assign(k, std::vector<std::optional<double>>(k));
    w.wins.assign(k, std::vector<std::size_t>(k, 0));
    w.significant.assign(k, std::vector<std::size_t>(k, 0));
    for (const auto& [ds, by_method] : cells) {
        for (std::size_t i = 0; i < k; ++i) {
            for (std::size_t j = i + 1; j < k; ++j) {
                auto ai = by_method.find(methods[i]);
                auto aj = by_method.find(methods[j]);
                if (ai == by_method.end() || aj == by_method.end()) continue;
                std::vector<double> a, b;
                for (const auto& [_, v] : ai->second) a.push_back(v);
                for (const auto& [_, v] : aj->second) b.push_back(v);
                const auto test = welch_t_test(a, b);
                if (!(test.p < alpha)) continue;
                ++w.significant[i][j];
                ++w.significant[j][i];
                if (test.t > 0) {
                    ++w.wins[i][j];
                } else {
                    ++w.wins[j][i];
                }
            }
        }
    }
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            if (i != j && w.significant[i][j] > 0) {
                w.ratio[i][j] = static_cast<double>(w.wins[i][j]) / static_cast<double>(w.significant[i][j]);
            }
        }
    }
    return w;
}

std::string WinMatrix::to_table(char delim) const {
    std::ostringstream os;
    os << "method";
    for (const auto& m : methods) os << delim << m;
    os << '\n';
    for (std::size_t i = 0; i < methods.size(); ++i) {
        os << methods[i];
        for (std::size_t j = 0; j < methods.size(); ++j) {
            os << delim;
            if (ratio[i][j]) {
                char buf[32];
                std::snprintf(buf, sizeof(buf), "%.4f", *ratio[i][j]);
                os << buf;
            } else {
                os << "—";
            }
        }
        os << '\n';
    }
    return os.str();
}

Projection3D pca_project(const Eigen::MatrixXd& embeddings, std::vector<int> labels) {
    const Eigen::Index n = embeddings.rows();
    const Eigen::Index d = embeddings.cols();
    if (n < 4 || d < 3) throw std::invalid_argument("pca_project needs N >= 4 and d >= 3");
    Projection3D out;
    out.mean = embeddings.colwise().mean().transpose();
    const Eigen::MatrixXd centered = embeddings.rowwise() - out.mean.transpose();
    Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
    const Eigen::VectorXd& s = svd.singularValues();
    const double tol = std::max(1.0, s.size() ? s(0) : 0.0) * 1e-10 * static_cast<double>(std::max(n, d));
    out.components.resize(d, 3);
    std::vector<Eigen::VectorXd> basis;
    for (Eigen::Index c = 0; c < 3; ++c) {
        if (c < s.size() && s(c) > tol) {
            Eigen::VectorXd v = svd.matrixV().col(c);
            Eigen::Index arg;
            v.cwiseAbs().maxCoeff(&arg);
            if (v(arg) < 0) v = -v;
            basis.push_back(v);
            out.explained_variance(c) = s(c) * s(c) / static_cast<double>(n - 1);
        } else {
            // Orthonormal completion by Gram-Schmidt over the coordinate axes.
            for (Eigen::Index axis = 0; axis < d; ++axis) {
                Eigen::VectorXd v = Eigen::VectorXd::Unit(d, axis);
                for (const auto& b : basis) v -= b.dot(v) * b;
                if (v.norm() > 1e-6) {
                    basis.push_back(v.normalized());
                    break;
                }
            }
            out.explained_variance(c) = 0.0;
        }
        out.components.col(c) = basis.back();
    }
    out.coords = centered * out.components;
    out.labels = std::move(labels);
    return out;
}

double class_separation(const Eigen::MatrixXd& coords, std::span<const int> labels) {
    if (static_cast<std::size_t>(coords.rows()) != labels.size()) throw std::invalid_argument("label count mismatch");
    std::map<int, std::pair<Eigen::VectorXd, std::size_t>> acc;
    for (Eigen::Index r = 0; r < coords.rows(); ++r) {
        auto [it, fresh] = acc.try_emplace(labels[static_cast<std::size_t>(r)], Eigen::VectorXd::Zero(coords.cols()), 0);
        it->second.first += coords.row(r).transpose();
        ++it->second.second;
    }
    if (acc.size() < 2) throw std::invalid_argument("class separation needs two classes");
    std::map<int, Eigen::VectorXd> centroid;
    for (auto& [c, v] : acc) centroid[c] = v.first / static_cast<double>(v.second);
    double between = 0;
    std::size_t pairs = 0;
    for (auto i = centroid.begin(); i != centroid.end(); ++i) {
        for (auto j = std::next(i); j != centroid.end(); ++j) {
            between += (i->second - j->second).norm();
            ++pairs;
        }
    }
    between /= static_cast<double>(pairs);
    double within = 0;
    for (Eigen::Index r = 0; r < coords.rows(); ++r) {
        within += (coords.row(r).transpose() - centroid[labels[static_cast<std::size_t>(r)]]).norm();
    }
    within /= static_cast<double>(coords.rows());
    return within > 0 ? between / within : std::numeric_limits<double>::infinity();
}

}  // namespace tabcl
