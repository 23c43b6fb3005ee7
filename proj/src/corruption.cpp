#include "tabcl/corruption.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace tabcl {

std::size_t corrupt_count(std::size_t n_features, double p) {
    if (!(p >= 0 && p <= 1)) throw std::invalid_argument("corruption fraction must lie in [0,1]");
    const double raw = static_cast<double>(n_features) * p;
    const auto n = static_cast<std::size_t>(std::max(0.0, std::ceil(raw - 1e-9)));
    return std::min(n, n_features);
}

CorruptionPlan CorruptionPlan::make(std::size_t n_features, double p, SubsetMode subset, ValueMode value) {
    return {p, corrupt_count(n_features, p), subset, value};
}

CorruptionContext::CorruptionContext(const Table& table, std::vector<std::size_t> pool)
    : table_(&table), pool_(std::move(pool)) {
    if (pool_.empty()) throw std::invalid_argument("corruption pool is empty");
}

void CorruptionContext::set_classes(std::span<const int> class_of_pool_row) {
    if (class_of_pool_row.size() != pool_.size()) throw std::invalid_argument("class assignment size mismatch");
    classes_.assign(class_of_pool_row.begin(), class_of_pool_row.end());
    const std::size_t k = std::max<std::size_t>(table_->class_count(), 1);
    class_rows_.assign(k, {});
    for (std::size_t i = 0; i < pool_.size(); ++i) {
        const int c = classes_[i];
        if (c < 0 || static_cast<std::size_t>(c) >= k) throw std::invalid_argument("class index out of range");
        class_rows_[static_cast<std::size_t>(c)].push_back(pool_[i]);
    }
}

std::vector<std::size_t> select_features_uniform(std::size_t n_features, std::size_t n_corrupt, Rng& rng) {
    if (n_corrupt > n_features) throw std::invalid_argument("n_corrupt exceeds feature count");
    std::vector<std::size_t> idx(n_features);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    // Partial Fisher-Yates: the first n_corrupt slots are a uniform subset.
    for (std::size_t i = 0; i < n_corrupt; ++i) {
        std::swap(idx[i], idx[i + rng.uniform_index(n_features - i)]);
    }
    idx.resize(n_corrupt);
    return idx;
}

double sample_value_table_uniform(std::size_t feature, const CorruptionContext& ctx, Rng& rng) {
    const auto& pool = ctx.pool();
    return ctx.table().at(pool[rng.uniform_index(pool.size())], feature);
}

double sample_value_class_conditioned(std::size_t feature, int anchor_class, const CorruptionContext& ctx,
                                      Rng& rng) {
    const auto& rows = ctx.class_rows(anchor_class);
    if (rows.empty()) throw std::logic_error("empty class pool for class " + std::to_string(anchor_class));
    return ctx.table().at(rows[rng.uniform_index(rows.size())], feature);
}

ViewRow corrupt(std::span<const double> anchor, int anchor_class, const CorruptionPlan& plan,
                const CorruptionContext& ctx, Rng& rng) {
    const std::size_t m = anchor.size();
    ViewRow view{{anchor.begin(), anchor.end()}, {}};
    switch (plan.subset_mode) {
        case SubsetMode::uniform:
            view.corrupted = select_features_uniform(m, plan.n_corrupt, rng);
            break;
        case SubsetMode::most_correlated:
        case SubsetMode::least_correlated:
            if (!ctx.sampler()) throw std::logic_error("correlated subset mode without an importance profile");
            view.corrupted = ctx.sampler()->sample(plan.n_corrupt, rng);
            break;
    }
    // Replacement values are drawn in feature-index order.
    std::vector<std::size_t> order = view.corrupted;
    std::sort(order.begin(), order.end());
    for (auto k : order) {
        view.values[k] = plan.value_mode == ValueMode::class_conditioned
                             ? sample_value_class_conditioned(k, anchor_class, ctx, rng)
                             : sample_value_table_uniform(k, ctx, rng);
    }
    return view;
}

}  // namespace tabcl
