#include "tabcl/training.hpp"

#include <algorithm>
#include <cstring>
#include <numeric>

#include "tabcl/evaluation.hpp"

namespace tabcl {

namespace {

// Stream tags for stream_seed(); each consumer of randomness owns one.
constexpr std::uint64_t kShuffleStream = 0x51;
constexpr std::uint64_t kCorruptStream = 0xC0;
constexpr std::uint64_t kRefreshStream = 0xEF;
constexpr std::uint64_t kFinetuneStream = 0xF1;
constexpr std::uint64_t kFinetuneInitStream = 0xF2;
constexpr std::uint64_t kWarmStartStream = 0xA1;

std::uint64_t fold(std::uint64_t h, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    return mix64(h ^ bits);
}

}  // namespace

std::string to_string(Method m) {
    switch (m) {
        case Method::no_pretrain: return "no_pretrain";
        case Method::random: return "random";
        case Method::class_conditioned: return "class_conditioned";
        case Method::oracle: return "oracle";
    }
    return "?";
}

std::string to_string(SubsetMode m) {
    switch (m) {
        case SubsetMode::uniform: return "uniform";
        case SubsetMode::most_correlated: return "most_correlated";
        case SubsetMode::least_correlated: return "least_correlated";
    }
    return "?";
}

Method method_from_string(const std::string& s) {
    for (auto m : {Method::no_pretrain, Method::random, Method::class_conditioned, Method::oracle}) {
        if (to_string(m) == s) return m;
    }
    throw std::invalid_argument("unknown method '" + s + "'");
}

SubsetMode subset_mode_from_string(const std::string& s) {
    for (auto m : {SubsetMode::uniform, SubsetMode::most_correlated, SubsetMode::least_correlated}) {
        if (to_string(m) == s) return m;
    }
    throw std::invalid_argument("unknown subset mode '" + s + "'");
}

void TrainConfig::validate() const {
    if (pretrain_epochs < 0 || finetune_epochs < 0 || refresh_epochs < 0) {
        throw std::invalid_argument("epoch counts must be non-negative");
    }
    if (update_interval < 1) throw std::invalid_argument("update_interval must be >= 1");
    if (pretrain_epochs % update_interval != 0) {
        throw std::invalid_argument("update_interval must divide pretrain_epochs");
    }
    if (batch_size < 2) throw std::invalid_argument("batch_size must be >= 2");
    if (!(corruption_rate >= 0 && corruption_rate <= 1)) throw std::invalid_argument("corruption rate must be in [0,1]");
    if (!(temperature > 0)) throw std::invalid_argument("temperature must be positive");
    if (!(learning_rate > 0)) throw std::invalid_argument("learning rate must be positive");
    gbdt.validate();
}

nn::MlpSpec TrainConfig::mlp_spec(std::size_t input_width, std::size_t class_count) const {
    nn::MlpSpec spec;
    spec.input_width = input_width;
    spec.hidden_width = hidden_width;
    spec.encoder_layers = encoder_layers;
    spec.projection_width = projection_width;
    spec.class_count = class_count;
    return spec;
}

nn::Matrix<float> encode_rows(const OneHotEncoder& enc, const Table& table, const std::vector<std::size_t>& rows) {
    nn::Matrix<float> x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(enc.width()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        enc.encode_row<float>(table.row(rows[i]), std::span<float>(x.row(static_cast<Eigen::Index>(i)).data(), enc.width()));
    }
    return x;
}

nn::Matrix<float> embed(const nn::ModelParams<float>& params, const nn::Matrix<float>& x) {
    return nn::forward<float>(params.encoder, x, nullptr, "encoder");
}

PseudoLabelState update_pseudo_labels(const Table& table, const SplitSpec& split, const OneHotEncoder& enc,
                                      const nn::ModelParams<float>& params) {
    PseudoLabelState st;
    for (auto r : split.labeled) {
        st.label.push_back(table.label(r));
        st.source.push_back(LabelSource::ground_truth);
    }
    if (!split.unlabeled.empty()) {
        const auto x = encode_rows(enc, table, split.unlabeled);
        const auto logits = nn::forward<float>(params.classifier_head, embed(params, x), nullptr, "classifier head");
        for (int c : nn::argmax_rows(logits)) {
            st.label.push_back(c);
            st.source.push_back(LabelSource::pseudo);
        }
    }
    return st;
}

void train_head(nn::Stack<float>& head, nn::AdamState<float>& opt, const nn::Matrix<float>& features,
                const std::vector<int>& targets, int epochs, std::size_t batch_size, Rng& rng) {
    const auto n = static_cast<std::size_t>(features.rows());
    if (n == 0) return;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    nn::StackTape<float> tape;
    nn::StackGrads<float> grads;
    nn::Matrix<float> dlogits;
    for (int e = 0; e < epochs; ++e) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < n; start += batch_size) {
            const std::size_t end = std::min(n, start + batch_size);
            nn::Matrix<float> xb(static_cast<Eigen::Index>(end - start), features.cols());
            std::vector<int> yb;
            for (std::size_t i = start; i < end; ++i) {
                xb.row(static_cast<Eigen::Index>(i - start)) = features.row(static_cast<Eigen::Index>(order[i]));
                yb.push_back(targets[order[i]]);
            }
            const auto logits = nn::forward(head, xb, &tape, "classifier head");
            nn::cross_entropy(logits, yb, &dlogits);
            nn::backward(head, tape, dlogits, grads);
            nn::adam_step(head, grads, opt);
        }
    }
}

PretrainResult pretrain(const Table& table, const SplitSpec& split, const OneHotEncoder& enc, const TrainConfig& cfg,
                        const std::optional<ImportanceProfile>& profile) {
    cfg.validate();
    if (cfg.method == Method::no_pretrain) throw std::invalid_argument("pretrain called for the no_pretrain arm");
    const auto pool = split.training_rows();
    const std::size_t n_train = pool.size();
    const std::size_t class_count = std::max<std::size_t>(table.class_count(), 1);
    const auto spec = cfg.mlp_spec(enc.width(), class_count);
    const nn::AdamConfig adam{cfg.learning_rate};

    PretrainResult res;
    res.params = nn::init_params<float>(spec, cfg.seed);
    res.encoder_opt = nn::AdamState<float>::for_stack(res.params.encoder, adam);
    res.pretrain_opt = nn::AdamState<float>::for_stack(res.params.pretrain_head, adam);
    res.classifier_opt = nn::AdamState<float>::for_stack(res.params.classifier_head, adam);

    const bool class_conditioned = cfg.method == Method::class_conditioned || cfg.method == Method::oracle;
    const auto plan = CorruptionPlan::make(table.n_features(), cfg.corruption_rate, cfg.subset_mode,
                                           class_conditioned ? ValueMode::class_conditioned : ValueMode::table_uniform);
    CorruptionContext ctx(table, pool);
    if (cfg.subset_mode != SubsetMode::uniform) {
        const auto prof = profile ? *profile : build_profiles(table, split, cfg.gbdt);
        ctx.set_sampler(CorrelatedSubsetSampler(
            prof, cfg.subset_mode == SubsetMode::most_correlated ? CorrMode::most : CorrMode::least));
    }

    const auto anchors = encode_rows(enc, table, pool);
    std::vector<int> labeled_targets;
    for (auto r : split.labeled) labeled_targets.push_back(table.label(r));
    const auto labeled_x = encode_rows(enc, table, split.labeled);
    std::vector<int> truth;
    for (auto r : pool) truth.push_back(table.label(r));

    const bool uses_head = cfg.method == Method::class_conditioned && !cfg.force_ground_truth_labels;
    auto refresh_head = [&](std::uint64_t tag) {
        if (cfg.reinit_head_on_refresh) {
            Rng init(stream_seed(cfg.seed, kRefreshStream, tag, 1));
            res.params.classifier_head = nn::init_classifier_head<float>(spec, init);
            res.classifier_opt = nn::AdamState<float>::for_stack(res.params.classifier_head, adam);
        }
        const auto features = embed(res.params, labeled_x);
        Rng rng(stream_seed(cfg.seed, kRefreshStream, tag));
        train_head(res.params.classifier_head, res.classifier_opt, features, labeled_targets, cfg.refresh_epochs,
                   cfg.batch_size, rng);
        ++res.head_refreshes;
    };
    if (uses_head && cfg.warm_start_head) refresh_head(kWarmStartStream);

    std::vector<std::size_t> order(n_train);
    nn::StackTape<float> enc_tape, head_tape;
    nn::StackGrads<float> enc_grads, head_grads;
    const std::size_t width = enc.width();
    std::vector<int> classes(n_train, 0);

    for (int epoch = 1; epoch <= cfg.pretrain_epochs; ++epoch) {
        if (class_conditioned) {
            if (cfg.method == Method::oracle || cfg.force_ground_truth_labels) {
                classes = truth;
            } else {
                auto st = update_pseudo_labels(table, split, enc, res.params);
                classes = st.label;
                res.final_labels = std::move(st);
            }
            ctx.set_classes(classes);
        }

        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng shuffle(stream_seed(cfg.seed, kShuffleStream, static_cast<std::uint64_t>(epoch)));
        shuffle.shuffle(order);

        double epoch_loss = 0;
        std::uint64_t digest = static_cast<std::uint64_t>(epoch);
        for (std::size_t start = 0; start < n_train; start += cfg.batch_size) {
            const std::size_t end = std::min(n_train, start + cfg.batch_size);
            const auto b = static_cast<Eigen::Index>(end - start);
            nn::Matrix<float> x(2 * b, static_cast<Eigen::Index>(width));
            for (std::size_t i = start; i < end; ++i) {
                const std::size_t pos = order[i];
                const auto row = static_cast<Eigen::Index>(i - start);
                x.row(row) = anchors.row(static_cast<Eigen::Index>(pos));
                Rng rng(stream_seed(cfg.seed, kCorruptStream, static_cast<std::uint64_t>(epoch), pool[pos]));
                const auto view = corrupt(table.row(pool[pos]), classes[pos], plan, ctx, rng);
                for (double v : view.values) digest = fold(digest, v);
                enc.encode_row<float>(view.values, std::span<float>(x.row(b + row).data(), width));
            }
            try {
                const auto h = nn::forward(res.params.encoder, x, &enc_tape, "encoder");
                const auto z = nn::forward(res.params.pretrain_head, h, &head_tape, "pre-train head");
                const auto loss = ntxent_loss(z, cfg.temperature);
                if (!std::isfinite(loss.loss)) throw DivergenceError("non-finite contrastive loss", epoch);
                epoch_loss += static_cast<double>(loss.loss) * static_cast<double>(b);
                const auto dh = nn::backward(res.params.pretrain_head, head_tape, loss.grad, head_grads);
                nn::backward(res.params.encoder, enc_tape, dh, enc_grads);
                nn::adam_step(res.params.pretrain_head, head_grads, res.pretrain_opt);
                nn::adam_step(res.params.encoder, enc_grads, res.encoder_opt);
            } catch (const nn::NumericError& e) {
                throw DivergenceError(e.what(), epoch);
            }
        }
        res.loss_curve.push_back(epoch_loss / static_cast<double>(n_train));
        res.view_digest.push_back(digest);

        if (uses_head && epoch % cfg.update_interval == 0) refresh_head(static_cast<std::uint64_t>(epoch));
    }
    return res;
}

FinetuneResult evaluate_head(const Table& table, const SplitSpec& split, const OneHotEncoder& enc,
                             const nn::ModelParams<float>& params) {
    FinetuneResult out;
    out.head = params.classifier_head;
    if (split.test.empty()) return out;
    const auto x = encode_rows(enc, table, split.test);
    const auto logits = nn::forward<float>(params.classifier_head, embed(params, x), nullptr, "classifier head");
    const auto probs = nn::softmax_rows(logits);
    out.test_predictions = nn::argmax_rows(logits);
    out.test_probabilities.assign(probs.data(), probs.data() + probs.size());
    std::vector<int> truth;
    for (auto r : split.test) truth.push_back(table.label(r));
    out.accuracy = accuracy(out.test_predictions, truth);
    const std::size_t k = static_cast<std::size_t>(logits.cols());
    std::vector<std::size_t> present(k, 0);
    for (int t : truth) ++present[static_cast<std::size_t>(t)];
    if (std::count_if(present.begin(), present.end(), [](std::size_t c) { return c > 0; }) >= 2) {
        out.auroc = auroc(out.test_probabilities, k, truth);
    } else {
        out.auroc = std::numeric_limits<double>::quiet_NaN();
    }
    return out;
}

FinetuneResult finetune(const Table& table, const SplitSpec& split, const OneHotEncoder& enc,
                        nn::ModelParams<float>& params, const TrainConfig& cfg) {
    Rng init(stream_seed(cfg.seed, kFinetuneInitStream));
    params.classifier_head = nn::init_classifier_head<float>(params.spec, init);
    auto opt = nn::AdamState<float>::for_stack(params.classifier_head, nn::AdamConfig{cfg.learning_rate});
    std::vector<int> targets;
    for (auto r : split.labeled) targets.push_back(table.label(r));
    const auto features = embed(params, encode_rows(enc, table, split.labeled));
    Rng rng(stream_seed(cfg.seed, kFinetuneStream));
    train_head(params.classifier_head, opt, features, targets, cfg.finetune_epochs, cfg.batch_size, rng);
    return evaluate_head(table, split, enc, params);
}

RunOutcome run_method(const Table& table, const SplitSpec& split, const TrainConfig& cfg,
                      const std::optional<ImportanceProfile>& profile) {
    cfg.validate();
    const auto enc = fit_encoder(table, split);
    RunOutcome out;
    if (cfg.method == Method::no_pretrain) {
        out.params = nn::init_params<float>(cfg.mlp_spec(enc.width(), std::max<std::size_t>(table.class_count(), 1)),
                                            cfg.seed);
    } else {
        out.pretrain = pretrain(table, split, enc, cfg, profile);
        out.params = out.pretrain.params;
    }
    out.finetune = finetune(table, split, enc, out.params, cfg);
    out.record.method = to_string(cfg.method);
    out.record.subset_mode = to_string(cfg.subset_mode);
    out.record.seed = cfg.seed;
    out.record.loss_curve = out.pretrain.loss_curve;
    out.record.accuracy = out.finetune.accuracy;
    out.record.auroc = out.finetune.auroc;
    out.record.head_refreshes = out.pretrain.head_refreshes;
    return out;
}

}  // namespace tabcl
