#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "tabcl/correlation.hpp"
#include "tabcl/masking.hpp"
#include "tabcl/rng.hpp"
#include "tabcl/tabular.hpp"

namespace tabcl {

enum class SubsetMode { uniform, most_correlated, least_correlated };
enum class ValueMode { table_uniform, class_conditioned };

/// Where and how to corrupt. `n_corrupt` is ceil(M * p).
struct CorruptionPlan {
    double p = 0.6;
    std::size_t n_corrupt = 0;
    SubsetMode subset_mode = SubsetMode::uniform;
    ValueMode value_mode = ValueMode::table_uniform;

    static CorruptionPlan make(std::size_t n_features, double p, SubsetMode subset = SubsetMode::uniform,
                               ValueMode value = ValueMode::table_uniform);
};

/// ceil(M * p) with a guard against representation error (0.3 * 10 = 3.0000000000000004).
std::size_t corrupt_count(std::size_t n_features, double p);

/// Replacement pools for corruption: the candidate rows [N_l + N_u] of a table and,
/// for class-conditioned sampling, their partition by (pseudo-)class.
class CorruptionContext {
public:
    CorruptionContext(const Table& table, std::vector<std::size_t> pool);

    const Table& table() const noexcept { return *table_; }
    const std::vector<std::size_t>& pool() const noexcept { return pool_; }

    /// Assigns a class to every pool row (same order as pool()) and rebuilds the
    /// per-class index sets.
    void set_classes(std::span<const int> class_of_pool_row);
    const std::vector<int>& classes() const noexcept { return classes_; }
    const std::vector<std::size_t>& class_rows(int c) const { return class_rows_.at(static_cast<std::size_t>(c)); }

    void set_sampler(std::optional<CorrelatedSubsetSampler> sampler) { sampler_ = std::move(sampler); }
    const std::optional<CorrelatedSubsetSampler>& sampler() const noexcept { return sampler_; }

private:
    const Table* table_;
    std::vector<std::size_t> pool_;
    std::vector<int> classes_;
    std::vector<std::vector<std::size_t>> class_rows_;  // table row indices
    std::optional<CorrelatedSubsetSampler> sampler_;
};

struct ViewRow {
    std::vector<double> values;
    std::vector<std::size_t> corrupted;
};

/// Uniform sample of n_corrupt distinct indices out of [M].
std::vector<std::size_t> select_features_uniform(std::size_t n_features, std::size_t n_corrupt, Rng& rng);

double sample_value_table_uniform(std::size_t feature, const CorruptionContext& ctx, Rng& rng);
double sample_value_class_conditioned(std::size_t feature, int anchor_class, const CorruptionContext& ctx,
                                      Rng& rng);

/// Builds a view of `anchor`. Class-conditioned plans need `anchor_class`.
ViewRow corrupt(std::span<const double> anchor, int anchor_class, const CorruptionPlan& plan,
                const CorruptionContext& ctx, Rng& rng);

}  // namespace tabcl
