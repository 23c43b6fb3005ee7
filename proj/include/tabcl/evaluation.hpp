#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace tabcl {

double accuracy(std::span<const int> predictions, std::span<const int> truth);

/// Macro one-vs-rest AUROC from the rank statistic with midranks for ties.
/// `scores` is row-major, n_rows x n_classes. Classes absent from `truth` are
/// skipped; at least two classes must be present.
double auroc(std::span<const double> scores, std::size_t n_classes, std::span<const int> truth);

/// Area under the ROC curve of `score` for positives vs negatives (midranks).
double binary_auroc(std::span<const double> score, std::span<const bool> positive);

struct WelchResult {
    double t = 0;
    double df = 0;
    double p = 1;
};

/// Two-sided Welch t-test with Welch-Satterthwaite degrees of freedom.
WelchResult welch_t_test(std::span<const double> a, std::span<const double> b);

/// Two-sided tail probability 2 * P(T > |t|) for Student's t with (fractional) df.
double student_t_two_sided(double t, double df);

struct MetricSample {
    std::string dataset;
    std::string method;
    std::uint64_t seed = 0;
    double accuracy = 0;
    double auroc = 0;
};

enum class Metric { accuracy, auroc };

struct WinMatrix {
    std::vector<std::string> methods;
    /// ratio[i][j]: empty when the pair had no significant dataset, and on the diagonal.
    std::vector<std::vector<std::optional<double>>> ratio;
    std::vector<std::vector<std::size_t>> wins;         // significant wins of i over j
    std::vector<std::vector<std::size_t>> significant;  // datasets with a significant i-vs-j result

    std::string to_table(char delim = '\t') const;
};

/// Pairwise win ratios over datasets, counting only datasets where the Welch
/// test rejects at `alpha`. Every (dataset, method) cell must hold the same
/// number (>= 2) of seeds.
WinMatrix win_matrix(std::span<const MetricSample> samples, double alpha = 0.05, Metric metric = Metric::accuracy);

struct Projection3D {
    Eigen::Matrix<double, Eigen::Dynamic, 3> components;  // d x 3, orthonormal columns
    Eigen::Matrix<double, Eigen::Dynamic, 3> coords;      // N x 3
    Eigen::Vector3d explained_variance;                   // sample variance along each component
    Eigen::VectorXd mean;
    std::vector<int> labels;
};

/// Top three principal directions of the centered embeddings (via SVD).
Projection3D pca_project(const Eigen::MatrixXd& embeddings, std::vector<int> labels);

/// Mean distance between class centroids divided by the mean distance of rows
/// to their own class centroid.
double class_separation(const Eigen::MatrixXd& coords, std::span<const int> labels);

struct MeanStd {
    double mean = 0;
    double std = 0;  // sample standard deviation (n - 1)
    std::size_t n = 0;
};
MeanStd mean_std(std::span<const double> values);

}  // namespace tabcl
