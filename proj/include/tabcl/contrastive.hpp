#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>

#include "tabcl/neural.hpp"

namespace tabcl {

/// Norm floor for cosine similarity; rectified encoders can emit zero vectors.
inline constexpr double kNormFloor = 1e-12;

/// 1-indexed partner of embedding i in a batch of N anchors followed by N views.
constexpr std::size_t pair_index(std::size_t i, std::size_t n) { return i <= n ? i + n : i - n; }

/// 0-indexed form: ((i + N) mod 2N).
constexpr std::size_t pair_index0(std::size_t i, std::size_t n) { return (i + n) % (2 * n); }

template <typename Vec>
double cosine_sim(const Vec& a, const Vec& b) {
    const double na = std::max(static_cast<double>(a.norm()), kNormFloor);
    const double nb = std::max(static_cast<double>(b.norm()), kNormFloor);
    return static_cast<double>(a.dot(b)) / (na * nb);
}

template <typename T>
struct ContrastiveLoss {
    T loss = 0;
    nn::Matrix<T> grad;  // d loss / d z_hat, same shape as the batch
};

/// NT-Xent over z_hat (2N x d): rows [0, N) anchors, [N, 2N) their views.
///   L = 1/(2N) sum_i -log( exp(s_{i,i'}/tau) / sum_{j != i} exp(s_{i,j}/tau) )
template <typename T>
ContrastiveLoss<T> ntxent_loss(const nn::Matrix<T>& z_hat, double tau) {
    if (z_hat.rows() % 2 != 0 || z_hat.rows() == 0) throw std::invalid_argument("embedding batch must have 2N rows");
    if (!(tau > 0)) throw std::invalid_argument("temperature must be positive");
    const Eigen::Index two_n = z_hat.rows();
    const auto n = static_cast<std::size_t>(two_n / 2);
    const T inv_tau = static_cast<T>(1.0 / tau);

    nn::RowVector<T> norms(two_n);
    nn::Matrix<T> u(two_n, z_hat.cols());
    for (Eigen::Index i = 0; i < two_n; ++i) {
        norms(i) = std::max(z_hat.row(i).norm(), static_cast<T>(kNormFloor));
        u.row(i) = z_hat.row(i) / norms(i);
    }
    nn::Matrix<T> logits(two_n, two_n);
    logits.noalias() = u * u.transpose();
    logits *= inv_tau;

    // Softmax over j != i, row by row, with max subtraction.
    nn::Matrix<T> prob = nn::Matrix<T>::Zero(two_n, two_n);
    T total = 0;
    for (Eigen::Index i = 0; i < two_n; ++i) {
        T mx = -std::numeric_limits<T>::infinity();
        for (Eigen::Index j = 0; j < two_n; ++j) {
            if (j != i) mx = std::max(mx, logits(i, j));
        }
        T sum = 0;
        for (Eigen::Index j = 0; j < two_n; ++j) {
            if (j == i) continue;
            prob(i, j) = std::exp(logits(i, j) - mx);
            sum += prob(i, j);
        }
        prob.row(i) /= sum;
        const auto p = static_cast<Eigen::Index>(pair_index0(static_cast<std::size_t>(i), n));
        total += (mx + std::log(sum)) - logits(i, p);
    }
    ContrastiveLoss<T> out;
    out.loss = total / static_cast<T>(two_n);

    // dL/dlogit_ij = (prob_ij - [j == i']) / 2N; logits are symmetric in u.
    nn::Matrix<T> dl = prob;
    for (Eigen::Index i = 0; i < two_n; ++i) {
        dl(i, static_cast<Eigen::Index>(pair_index0(static_cast<std::size_t>(i), n))) -= T(1);
    }
    dl /= static_cast<T>(two_n);
    const nn::Matrix<T> g = (dl + dl.transpose()) * inv_tau;
    nn::Matrix<T> du(two_n, z_hat.cols());
    du.noalias() = g * u;
    out.grad.resize(two_n, z_hat.cols());
    for (Eigen::Index i = 0; i < two_n; ++i) {
        if (z_hat.row(i).norm() > static_cast<T>(kNormFloor)) {
            const T radial = du.row(i).dot(u.row(i));
            out.grad.row(i) = (du.row(i) - radial * u.row(i)) / norms(i);
        } else {
            out.grad.row(i) = du.row(i) / norms(i);
        }
    }
    return out;
}

}  // namespace tabcl
