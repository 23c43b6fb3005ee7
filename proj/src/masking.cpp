#include "tabcl/masking.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace tabcl {

CorrelatedSubsetSampler::CorrelatedSubsetSampler(const ImportanceProfile& profile, CorrMode mode)
    : m_(profile.n_features()), mode_(mode), c_(corr_matrix(profile, mode)) {}

std::vector<double> CorrelatedSubsetSampler::step_distribution(std::span<const std::size_t> selected) const {
    std::vector<double> p(m_, 0.0);
    if (selected.empty()) {
        std::fill(p.begin(), p.end(), 1.0 / static_cast<double>(m_));
        return p;
    }
    std::vector<bool> taken(m_, false);
    for (auto s : selected) taken.at(s) = true;
    for (std::size_t j = 0; j < m_; ++j) {
        double lo = std::numeric_limits<double>::infinity();
        for (auto s : selected) lo = std::min(lo, c_[s * m_ + j]);
        p[j] = taken[j] ? 0.0 : lo;
    }
    double min_free = std::numeric_limits<double>::infinity();
    std::size_t n_free = 0;
    for (std::size_t j = 0; j < m_; ++j) {
        if (!taken[j]) {
            min_free = std::min(min_free, p[j]);
            ++n_free;
        }
    }
    if (n_free == 0) return p;
    if (min_free < 0) {
        for (std::size_t j = 0; j < m_; ++j) {
            if (!taken[j]) p[j] = p[j] - min_free + kScoreFloor;
        }
    }
    double total = 0;
    for (double v : p) total += v;
    if (!(total > 0) || !std::isfinite(total)) {
        for (std::size_t j = 0; j < m_; ++j) p[j] = taken[j] ? 0.0 : 1.0 / static_cast<double>(n_free);
        return p;
    }
    for (auto& v : p) v /= total;
    return p;
}

std::vector<std::size_t> CorrelatedSubsetSampler::sample(std::size_t n_corrupt, Rng& rng) const {
    if (n_corrupt > m_) throw std::invalid_argument("n_corrupt exceeds feature count");
    std::vector<std::size_t> selected;
    selected.reserve(n_corrupt);
    if (n_corrupt == 0) return selected;
    selected.push_back(rng.uniform_index(m_));
    while (selected.size() < n_corrupt) {
        const auto p = step_distribution(selected);
        selected.push_back(sample_categorical(p, rng));
    }
    return selected;
}

std::size_t sample_categorical(std::span<const double> probs, Rng& rng) {
    const double u = rng.uniform01();
    double acc = 0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (probs[i] <= 0) continue;
        acc += probs[i];
        last_positive = i;
        if (u < acc) return i;
    }
    return last_positive;
}

}  // namespace tabcl
