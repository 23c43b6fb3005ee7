#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tabcl/tabular.hpp"

namespace tabcl {

struct GbdtConfig {
    int n_rounds = 50;
    int max_depth = 3;
    double learning_rate = 0.1;
    int min_samples_leaf = 5;

    void validate() const;
    std::uint64_t hash() const;
};

enum class GbdtTask { regression, classification };

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
};

class RegressionTree {
public:
    std::vector<TreeNode> nodes;

    double predict(std::span<const double> x) const;
    std::size_t depth() const;
};

/// Dense row-major design matrix for tree fitting.
struct DesignMatrix {
    std::vector<double> values;
    std::size_t rows = 0;
    std::size_t cols = 0;

    double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
    std::span<const double> row(std::size_t r) const { return {values.data() + r * cols, cols}; }
};

/// Boosted ensemble. Regression: one output, squared error. Classification with
/// two classes: one logistic output; with more: one logistic output per class
/// (one-vs-rest), boosted round-robin.
class GbdtModel {
public:
    GbdtTask task = GbdtTask::regression;
    std::size_t n_outputs = 1;
    std::vector<double> base_score;                // per output
    std::vector<std::vector<RegressionTree>> trees;  // [round][output]
    double learning_rate = 0.1;

    /// Raw additive scores, one per output.
    std::vector<double> predict_raw(std::span<const double> x) const;
    /// Regression prediction (output 0).
    double predict(std::span<const double> x) const { return predict_raw(x).front(); }
};

struct GbdtFit {
    GbdtModel model;
    std::vector<double> gain;        // total split gain per input column
    std::vector<double> importance;  // gain L1-normalized; uniform when all gains are zero
    std::vector<double> train_loss;  // loss before round 1 followed by loss after each round
};

/// Fits a boosted ensemble on `x` predicting `target`. For classification the
/// target holds class indices in [0, n_classes).
GbdtFit fit_gbdt(const DesignMatrix& x, std::span<const double> target, GbdtTask task, std::size_t n_classes,
                 const GbdtConfig& cfg);

/// q(k, j): normalized importance of feature j for predicting feature k. Stored
/// as a full M x M matrix with a zero diagonal.
class ImportanceProfile {
public:
    ImportanceProfile() = default;
    explicit ImportanceProfile(std::size_t m) : m_(m), q_(m * m, 0.0) {}
    ImportanceProfile(std::size_t m, std::vector<double> q);

    std::size_t n_features() const noexcept { return m_; }
    double q(std::size_t k, std::size_t j) const { return q_[k * m_ + j]; }
    double& q(std::size_t k, std::size_t j) { return q_[k * m_ + j]; }
    /// The M-1 entries for target k, other features in index order.
    std::vector<double> q_vector(std::size_t k) const;
    const std::vector<double>& raw() const noexcept { return q_; }

    /// Each row nonnegative and summing to one within `tol`, zero diagonal.
    bool valid(double tol = 1e-9) const;

    std::string to_json(const std::string& dataset_id, std::uint64_t cfg_hash) const;
    static ImportanceProfile from_json(const std::string& text);

private:
    std::size_t m_ = 0;
    std::vector<double> q_;
};

/// Fits one ensemble per feature over the labeled and unlabeled rows:
/// classification for categorical targets, regression for numerical ones.
ImportanceProfile build_profiles(const Table& table, const SplitSpec& split, const GbdtConfig& cfg);

/// max - min over all off-diagonal profile entries.
double correlation_value_range(const ImportanceProfile& profile);

enum class CorrMode { most, least };

/// C[i][j] = +q(i,j) (most) or -q(i,j) (least), zero diagonal.
std::vector<double> corr_matrix(const ImportanceProfile& profile, CorrMode mode);

}  // namespace tabcl
