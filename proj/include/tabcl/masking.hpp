#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tabcl/correlation.hpp"
#include "tabcl/rng.hpp"

namespace tabcl {

/// Sequential correlation-guided feature subset sampler.
///
/// The first feature is uniform over [M]. Each later feature is drawn from the
/// column-wise minimum of the correlation-matrix rows indexed by the features
/// already chosen, with chosen features given zero mass. When any remaining
/// score is negative (least-correlated mode) the remaining scores are shifted by
/// their minimum and offset by `kScoreFloor` before normalization so that the
/// least-correlated features keep the highest probability. All-zero scores fall
/// back to uniform over the remaining features.
class CorrelatedSubsetSampler {
public:
    static constexpr double kScoreFloor = 1e-9;

    CorrelatedSubsetSampler(const ImportanceProfile& profile, CorrMode mode);

    std::size_t n_features() const noexcept { return m_; }
    CorrMode mode() const noexcept { return mode_; }
    const std::vector<double>& matrix() const noexcept { return c_; }

    /// Normalized next-step distribution given the ordered selection so far.
    /// Empty selection gives the uniform first-step distribution.
    std::vector<double> step_distribution(std::span<const std::size_t> selected) const;

    /// Ordered subset of `n_corrupt` distinct features.
    std::vector<std::size_t> sample(std::size_t n_corrupt, Rng& rng) const;

private:
    std::size_t m_;
    CorrMode mode_;
    std::vector<double> c_;
};

/// Draws an index from a normalized distribution by inverse CDF.
std::size_t sample_categorical(std::span<const double> probs, Rng& rng);

inline std::vector<std::size_t> sample_correlated_subset(const ImportanceProfile& profile, CorrMode mode,
                                                         std::size_t n_corrupt, Rng& rng) {
    return CorrelatedSubsetSampler(profile, mode).sample(n_corrupt, rng);
}

}  // namespace tabcl
