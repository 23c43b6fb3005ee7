#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tabcl/correlation.hpp"
#include "tabcl/rng.hpp"

using namespace tabcl;

namespace {

DesignMatrix design(std::size_t rows, std::size_t cols, const std::vector<double>& v) { return {v, rows, cols}; }

// B = A + N(0, 0.01^2) plus four independent distractors; columns A, B, D1..D4.
Table synthetic_pair_table(std::uint64_t seed, std::size_t n = 300) {
    Rng rng(seed);
    std::vector<FeatureSpec> feats = {FeatureSpec::numerical("A"), FeatureSpec::numerical("B")};
    for (int d = 1; d <= 4; ++d) feats.push_back(FeatureSpec::numerical("D" + std::to_string(d)));
    std::vector<double> cells;
    for (std::size_t r = 0; r < n; ++r) {
        const double a = rng.normal();
        cells.push_back(a);
        cells.push_back(a + 0.01 * rng.normal());
        for (int d = 0; d < 4; ++d) cells.push_back(rng.normal());
    }
    return Table(Schema(feats), cells, std::vector<int>(n, kNoLabel));
}

SplitSpec all_rows(std::size_t n) {
    SplitSpec s;
    s.unlabeled.resize(n);
    std::iota(s.unlabeled.begin(), s.unlabeled.end(), std::size_t{0});
    return s;
}

}  // namespace

TEST_CASE("depth-1 single-round stump matches the brute-force best split") {
    Rng rng(5);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 12 + rng.uniform_index(20);
        std::vector<double> x(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = std::round(rng.uniform(0, 50));
            y[i] = (x[i] > 25 ? 4.0 : -1.0) + rng.normal();
        }
        GbdtConfig cfg{1, 1, 1.0, 2};
        const auto fit = fit_gbdt(design(n, 1, x), y, GbdtTask::regression, 0, cfg);

        // Oracle: every midpoint between distinct sorted values, leaf means, SSE.
        const double mean = std::accumulate(y.begin(), y.end(), 0.0) / n;
        std::vector<double> xs = x;
        std::sort(xs.begin(), xs.end());
        xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
        double best_sse = 0, best_t = 0;
        for (std::size_t i = 0; i < n; ++i) best_sse += (y[i] - mean) * (y[i] - mean);
        const double root_sse = best_sse;
        bool found = false;
        for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
            const double t = 0.5 * (xs[i] + xs[i + 1]);
            double sl = 0, sr = 0;
            std::size_t nl = 0, nr = 0;
            for (std::size_t r = 0; r < n; ++r) (x[r] <= t ? (sl += y[r], ++nl) : (sr += y[r], ++nr));
            if (nl < 2 || nr < 2) continue;
            double sse = 0;
            for (std::size_t r = 0; r < n; ++r) {
                const double p = x[r] <= t ? sl / nl : sr / nr;
                sse += (y[r] - p) * (y[r] - p);
            }
            if (sse < best_sse - 1e-12) {
                best_sse = sse;
                best_t = t;
                found = true;
            }
        }
        REQUIRE(found);
        const auto& tree = fit.model.trees.at(0).at(0);
        REQUIRE(tree.nodes.size() == 3);
        CHECK(tree.nodes[0].threshold == doctest::Approx(best_t));
        double sse = 0;
        for (std::size_t r = 0; r < n; ++r) {
            const double p = fit.model.predict(std::span<const double>(&x[r], 1));
            sse += (y[r] - p) * (y[r] - p);
        }
        CHECK(sse == doctest::Approx(best_sse).epsilon(1e-10));
        CHECK(fit.gain[0] == doctest::Approx(root_sse - best_sse).epsilon(1e-10));
    }
}

TEST_CASE("hand-computed stump on separable data") {
    const std::vector<double> x = {1, 2, 3, 4, 5, 6};
    const std::vector<double> y = {0, 0, 0, 10, 10, 10};
    const auto fit = fit_gbdt(design(6, 1, x), y, GbdtTask::regression, 0, GbdtConfig{1, 1, 1.0, 1});
    const auto& root = fit.model.trees[0][0].nodes[0];
    CHECK(root.feature == 0);
    CHECK(root.threshold == 3.5);
    for (std::size_t i = 0; i < 6; ++i) CHECK(fit.model.predict(std::span<const double>(&x[i], 1)) == y[i]);
    CHECK(fit.gain[0] == 150.0);
}

TEST_CASE("training loss never increases across rounds") {
    Rng rng(9);
    for (auto task : {GbdtTask::regression, GbdtTask::classification}) {
        for (std::size_t classes : {2u, 3u}) {
            const std::size_t n = 200, c = 4;
            std::vector<double> v, y;
            for (std::size_t r = 0; r < n; ++r) {
                double s = 0;
                for (std::size_t j = 0; j < c; ++j) {
                    v.push_back(rng.normal());
                    s += v.back() * (j + 1);
                }
                y.push_back(task == GbdtTask::regression ? s + rng.normal()
                                                         : double(std::min<std::size_t>(classes - 1, s > 0 ? 1 + (s > 3) : 0)));
            }
            const auto fit = fit_gbdt(design(n, c, v), y, task, classes, GbdtConfig{});
            REQUIRE(fit.train_loss.size() == 51);
            for (std::size_t i = 1; i < fit.train_loss.size(); ++i) {
                CHECK(fit.train_loss[i] <= fit.train_loss[i - 1] + 1e-12);
            }
            if (task == GbdtTask::regression) break;
        }
    }
}

TEST_CASE("constant target falls back to uniform importance") {
    const std::vector<double> x = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
    const std::vector<double> y(6, 2.5);
    const auto fit = fit_gbdt(design(6, 2, x), y, GbdtTask::regression, 0, GbdtConfig{});
    CHECK(fit.importance == std::vector<double>{0.5, 0.5});

    const Schema s({FeatureSpec::numerical("a"), FeatureSpec::numerical("b"), FeatureSpec::numerical("k")});
    std::vector<double> cells;
    for (int r = 0; r < 20; ++r) {
        cells.push_back(r);
        cells.push_back(r * r);
        cells.push_back(7);
    }
    const auto prof = build_profiles(Table(s, cells, std::vector<int>(20, kNoLabel)), all_rows(20), GbdtConfig{});
    CHECK(prof.q(2, 0) == 0.5);
    CHECK(prof.q(2, 1) == 0.5);
}

TEST_CASE("A is the top predictor of its noisy copy B") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto t = synthetic_pair_table(seed);
        const auto prof = build_profiles(t, all_rows(t.n_rows()), GbdtConfig{});
        REQUIRE(prof.valid(1e-9));
        const auto qb = prof.q_vector(1);  // A, D1..D4
        CHECK(std::max_element(qb.begin(), qb.end()) - qb.begin() == 0);
    }
}

TEST_CASE("two-feature table gives each q_k = [1]") {
    const Schema s({FeatureSpec::numerical("a"), FeatureSpec::categorical("b", {"x", "y"})});
    Rng rng(1);
    std::vector<double> cells;
    for (int r = 0; r < 40; ++r) {
        cells.push_back(rng.normal());
        cells.push_back(double(rng.uniform_index(2)));
    }
    const auto prof = build_profiles(Table(s, cells, std::vector<int>(40, kNoLabel)), all_rows(40), GbdtConfig{});
    CHECK(prof.q_vector(0) == std::vector<double>{1.0});
    CHECK(prof.q_vector(1) == std::vector<double>{1.0});
}

TEST_CASE("independent features share importance roughly evenly") {
    const std::size_t m = 4, n = 300;
    std::vector<double> mean(m * m, 0.0);
    const int tables = 20;
    for (int t = 0; t < tables; ++t) {
        Rng rng(1000 + t);
        std::vector<FeatureSpec> feats;
        for (std::size_t k = 0; k < m; ++k) feats.push_back(FeatureSpec::numerical("u" + std::to_string(k)));
        std::vector<double> cells;
        for (std::size_t i = 0; i < n * m; ++i) cells.push_back(rng.uniform01());
        const auto prof =
            build_profiles(Table(Schema(feats), cells, std::vector<int>(n, kNoLabel)), all_rows(n), GbdtConfig{});
        REQUIRE(prof.valid(1e-9));
        for (std::size_t i = 0; i < m * m; ++i) mean[i] += prof.raw()[i] / tables;
    }
    for (std::size_t k = 0; k < m; ++k) {
        for (std::size_t j = 0; j < m; ++j) {
            if (k != j) CHECK(std::abs(mean[k * m + j] - 1.0 / 3) < 0.15);
        }
    }
}

TEST_CASE("mixed categorical profile is valid and deterministic; blocks sum back to raw features") {
    Rng rng(3);
    const Schema s({FeatureSpec::categorical("c", {"a", "b", "c"}), FeatureSpec::numerical("x"),
                    FeatureSpec::categorical("d", {"p", "q"}), FeatureSpec::numerical("y")});
    std::vector<double> cells;
    for (int r = 0; r < 200; ++r) {
        const double c = double(rng.uniform_index(3));
        cells.push_back(c);
        cells.push_back(c * 2 + 0.1 * rng.normal());
        cells.push_back(double(rng.uniform_index(2)));
        cells.push_back(rng.normal());
    }
    const Table t(s, cells, std::vector<int>(200, kNoLabel));
    const auto a = build_profiles(t, all_rows(200), GbdtConfig{});
    const auto b = build_profiles(t, all_rows(200), GbdtConfig{});
    CHECK(a.raw() == b.raw());
    CHECK(a.valid(1e-9));
    CHECK(a.q_vector(0).size() == 3);
    const auto q0 = a.q_vector(0);
    CHECK(std::max_element(q0.begin(), q0.end()) - q0.begin() == 0);  // x predicts c
    const auto from = ImportanceProfile::from_json(a.to_json("mixed", GbdtConfig{}.hash()));
    CHECK(from.raw() == a.raw());
}

TEST_CASE("correlation value range") {
    ImportanceProfile flat(3);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            if (i != j) flat.q(i, j) = 0.5;
    CHECK(correlation_value_range(flat) == 0.0);
    ImportanceProfile p(3, {0, 0.9, 0.1, 0.5, 0, 0.5, 0.2, 0.8, 0});
    CHECK(correlation_value_range(p) == doctest::Approx(0.8));
    CHECK_THROWS(correlation_value_range(ImportanceProfile(1)));
}

TEST_CASE("correlation matrix signs and diagonal") {
    ImportanceProfile p(3, {0, 0.9, 0.1, 0.5, 0, 0.5, 0.2, 0.8, 0});
    const auto most = corr_matrix(p, CorrMode::most);
    const auto least = corr_matrix(p, CorrMode::least);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(most[i * 3 + i] == 0.0);
        CHECK(least[i * 3 + i] == 0.0);
        for (std::size_t j = 0; j < 3; ++j) {
            if (i == j) continue;
            CHECK(most[i * 3 + j] == p.q(i, j));
            CHECK(least[i * 3 + j] == -p.q(i, j));
        }
    }
}

TEST_CASE("config validation") {
    CHECK_THROWS(GbdtConfig{50, 0, 0.1, 5}.validate());
    CHECK_THROWS(GbdtConfig{50, 3, 0.0, 5}.validate());
    CHECK_THROWS(GbdtConfig{50, 3, 1.5, 5}.validate());
    CHECK_NOTHROW(GbdtConfig{50, 3, 1.0, 5}.validate());
}
