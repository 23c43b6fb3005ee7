#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numeric>

#include "tabcl/training.hpp"

using namespace tabcl;

namespace {

// Two Gaussian blobs in d dimensions plus one categorical column, `k` classes.
Table blobs(std::size_t n, std::size_t k, double sep, std::uint64_t seed, std::size_t d = 4) {
    Rng rng(seed);
    std::vector<FeatureSpec> feats;
    for (std::size_t j = 0; j < d; ++j) feats.push_back(FeatureSpec::numerical("x" + std::to_string(j)));
    feats.push_back(FeatureSpec::categorical("c", {"u", "v"}));
    std::vector<std::string> names;
    for (std::size_t c = 0; c < k; ++c) names.push_back("k" + std::to_string(c));
    std::vector<double> cells;
    std::vector<int> labels;
    for (std::size_t r = 0; r < n; ++r) {
        const int cls = static_cast<int>(r % k);
        for (std::size_t j = 0; j < d; ++j) cells.push_back(rng.normal() + (j == static_cast<std::size_t>(cls) % d ? sep : 0));
        cells.push_back(double(rng.uniform_index(2)));
        labels.push_back(cls);
    }
    return Table(Schema(feats, "class", names), cells, labels);
}

TrainConfig small(Method m, int epochs = 20) {
    TrainConfig c;
    c.method = m;
    c.pretrain_epochs = epochs;
    c.finetune_epochs = 30;
    c.update_interval = 5;
    c.refresh_epochs = 10;
    c.batch_size = 32;
    c.hidden_width = 24;
    c.encoder_layers = 2;
    c.projection_width = 16;
    c.seed = 7;
    return c;
}

}  // namespace

TEST_CASE("method and subset mode names round trip") {
    for (auto m : {Method::no_pretrain, Method::random, Method::class_conditioned, Method::oracle})
        CHECK(method_from_string(to_string(m)) == m);
    for (auto m : {SubsetMode::uniform, SubsetMode::most_correlated, SubsetMode::least_correlated})
        CHECK(subset_mode_from_string(to_string(m)) == m);
    CHECK_THROWS(method_from_string("nope"));
}

TEST_CASE("config validation") {
    auto c = small(Method::class_conditioned);
    CHECK_NOTHROW(c.validate());
    c.update_interval = 3;
    CHECK_THROWS(c.validate());
    c = small(Method::random);
    c.corruption_rate = 1.2;
    CHECK_THROWS(c.validate());
    c = small(Method::random);
    c.temperature = 0;
    CHECK_THROWS(c.validate());
    CHECK(TrainConfig{}.pretrain_epochs / TrainConfig{}.update_interval == 50);
}

TEST_CASE("default schedule refreshes the head 50 times") {
    const auto t = blobs(60, 2, 2.0, 1);
    const auto split = make_split(t, 0.2, 0.2, 1);
    auto cfg = small(Method::class_conditioned, 500);
    cfg.update_interval = 10;
    cfg.refresh_epochs = 1;
    cfg.hidden_width = 8;
    cfg.projection_width = 8;
    cfg.encoder_layers = 1;
    cfg.batch_size = 128;
    const auto r = pretrain(t, split, fit_encoder(t, split), cfg);
    CHECK(r.head_refreshes == 50);
    CHECK(r.loss_curve.size() == 500);
}

TEST_CASE("pretraining is deterministic per seed") {
    const auto t = blobs(80, 3, 2.0, 2);
    const auto split = make_split(t, 0.2, 0.2, 2);
    const auto enc = fit_encoder(t, split);
    for (auto m : {Method::random, Method::class_conditioned, Method::oracle}) {
        const auto a = pretrain(t, split, enc, small(m));
        const auto b = pretrain(t, split, enc, small(m));
        CHECK(a.loss_curve == b.loss_curve);
        CHECK(a.view_digest == b.view_digest);
        CHECK(a.params == b.params);
        auto other = small(m);
        other.seed = 8;
        CHECK(pretrain(t, split, enc, other).loss_curve != a.loss_curve);
        for (double l : a.loss_curve) CHECK(l >= 0);
    }
}

TEST_CASE("oracle on a single-class pool equals random") {
    const auto t = blobs(60, 1, 0.0, 3);
    const auto split = make_split(t, 0.2, 0.2, 3);
    const auto enc = fit_encoder(t, split);
    const auto a = pretrain(t, split, enc, small(Method::random));
    const auto b = pretrain(t, split, enc, small(Method::oracle));
    CHECK(a.view_digest == b.view_digest);
    CHECK(a.loss_curve == b.loss_curve);
}

TEST_CASE("forced ground truth makes class_conditioned identical to oracle") {
    const auto t = blobs(90, 3, 1.5, 4);
    const auto split = make_split(t, 0.1, 0.2, 4);
    const auto enc = fit_encoder(t, split);
    auto forced = small(Method::class_conditioned);
    forced.force_ground_truth_labels = true;
    const auto a = pretrain(t, split, enc, forced);
    const auto b = pretrain(t, split, enc, small(Method::oracle));
    CHECK(a.view_digest == b.view_digest);
    CHECK(a.loss_curve == b.loss_curve);
    CHECK(a.params == b.params);
    // Without forcing, pseudo-labels change the views.
    CHECK(pretrain(t, split, enc, small(Method::class_conditioned)).view_digest != b.view_digest);
}

TEST_CASE("pseudo-labels: tie rule and ground-truth precedence") {
    const auto t = blobs(60, 3, 2.0, 5);
    const auto split = make_split(t, 0.2, 0.2, 5);
    const auto enc = fit_encoder(t, split);
    auto params = nn::init_params<float>(small(Method::class_conditioned).mlp_spec(enc.width(), 3), 5);
    for (auto& l : params.classifier_head.layers) {
        l.weight.setZero();
        l.bias.setZero();
    }
    const auto st = update_pseudo_labels(t, split, enc, params);
    const auto rows = split.training_rows();
    REQUIRE(st.label.size() == rows.size());
    bool saw_class2 = false;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (i < split.labeled.size()) {
            CHECK(st.source[i] == LabelSource::ground_truth);
            CHECK(st.label[i] == t.label(rows[i]));
            saw_class2 |= st.label[i] == 2;
        } else {
            CHECK(st.source[i] == LabelSource::pseudo);
            CHECK(st.label[i] == 0);
        }
    }
    CHECK(saw_class2);
}

TEST_CASE("trained head pseudo-labels a separable table accurately") {
    const auto t = blobs(400, 2, 4.0, 6);
    const auto split = make_split(t, 0.1, 0.2, 6);
    const auto enc = fit_encoder(t, split);
    const auto cfg = small(Method::class_conditioned);
    auto params = nn::init_params<float>(cfg.mlp_spec(enc.width(), 2), 6);
    auto opt = nn::AdamState<float>::for_stack(params.classifier_head);
    std::vector<int> targets;
    for (auto r : split.labeled) targets.push_back(t.label(r));
    const auto feats = embed(params, encode_rows(enc, t, split.labeled));
    Rng rng(6);
    train_head(params.classifier_head, opt, feats, targets, 300, 32, rng);
    const auto fit = nn::argmax_rows(nn::Matrix<float>(nn::forward(params.classifier_head, feats)));
    CHECK(fit == targets);

    const auto st = update_pseudo_labels(t, split, enc, params);
    const auto rows = split.training_rows();
    std::size_t right = 0, total = 0;
    for (std::size_t i = split.labeled.size(); i < rows.size(); ++i, ++total) right += st.label[i] == t.label(rows[i]);
    CHECK(double(right) / total >= 0.9);
}

TEST_CASE("fine-tuning freezes the encoder") {
    const auto t = blobs(100, 2, 2.0, 7);
    const auto split = make_split(t, 0.2, 0.2, 7);
    const auto cfg = small(Method::no_pretrain);
    const auto out = run_method(t, split, cfg);
    const auto enc = fit_encoder(t, split);
    const auto init = nn::init_params<float>(cfg.mlp_spec(enc.width(), 2), cfg.seed);
    CHECK(out.params.encoder == init.encoder);
    CHECK(out.params.pretrain_head == init.pretrain_head);
    CHECK(out.record.loss_curve.empty());

    auto pre = pretrain(t, split, enc, small(Method::random));
    auto params = pre.params;
    finetune(t, split, enc, params, small(Method::random));
    CHECK(params.encoder == pre.params.encoder);
    CHECK(params.pretrain_head == pre.params.pretrain_head);
}

TEST_CASE("single-class labeled set predicts that class everywhere") {
    const auto t = blobs(100, 2, 1.0, 8);
    SplitSpec split;
    for (std::size_t r = 0; r < 100; ++r) {
        if (r < 10 && t.label(r) == 1) split.labeled.push_back(r);
        else if (r >= 80) split.test.push_back(r);
        else if (r >= 10) split.unlabeled.push_back(r);
    }
    const auto out = run_method(t, split, small(Method::no_pretrain));
    for (int p : out.finetune.test_predictions) CHECK(p == 1);
    std::size_t ones = 0;
    for (auto r : split.test) ones += t.label(r) == 1;
    CHECK(out.finetune.accuracy == doctest::Approx(double(ones) / split.test.size()));
}

TEST_CASE("run records carry method, seed and metrics") {
    const auto t = blobs(120, 2, 3.0, 9);
    const auto split = make_split(t, 0.2, 0.2, 9);
    const auto out = run_method(t, split, small(Method::class_conditioned));
    CHECK(out.record.method == "class_conditioned");
    CHECK(out.record.subset_mode == "uniform");
    CHECK(out.record.seed == 7);
    CHECK(out.record.loss_curve.size() == 20);
    CHECK(out.record.head_refreshes == 4);
    CHECK(out.record.accuracy >= 0.8);
    CHECK(out.record.auroc >= 0.8);
    const auto& p = out.finetune.test_probabilities;
    for (std::size_t r = 0; r < split.test.size(); ++r) CHECK(p[2 * r] + p[2 * r + 1] == doctest::Approx(1.0));
}

TEST_CASE("correlated subset modes run end to end") {
    const auto t = blobs(80, 2, 2.0, 10);
    const auto split = make_split(t, 0.2, 0.2, 10);
    for (auto mode : {SubsetMode::most_correlated, SubsetMode::least_correlated}) {
        auto cfg = small(Method::class_conditioned, 5);
        cfg.subset_mode = mode;
        const auto out = run_method(t, split, cfg);
        CHECK(out.record.loss_curve.size() == 5);
        CHECK(out.record.subset_mode == to_string(mode));
    }
}
