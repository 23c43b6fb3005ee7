#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tabcl/contrastive.hpp"
#include "tabcl/correlation.hpp"
#include "tabcl/corruption.hpp"
#include "tabcl/neural.hpp"
#include "tabcl/tabular.hpp"

namespace tabcl {

enum class Method { no_pretrain, random, class_conditioned, oracle };

std::string to_string(Method m);
std::string to_string(SubsetMode m);
Method method_from_string(const std::string& s);
SubsetMode subset_mode_from_string(const std::string& s);

class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& what, long epoch)
        : std::runtime_error(what + " at epoch " + std::to_string(epoch)), epoch_(epoch) {}
    long epoch() const noexcept { return epoch_; }

private:
    long epoch_;
};

struct TrainConfig {
    Method method = Method::class_conditioned;
    SubsetMode subset_mode = SubsetMode::uniform;
    int pretrain_epochs = 500;
    int finetune_epochs = 100;
    int update_interval = 10;   // pseudo-label head refresh every N epochs
    int refresh_epochs = 100;   // supervised epochs per head refresh
    std::size_t batch_size = 128;
    double corruption_rate = 0.6;
    double temperature = 1.0;
    double learning_rate = 1e-3;
    std::size_t hidden_width = 256;
    std::size_t encoder_layers = 4;
    std::size_t projection_width = 256;
    bool warm_start_head = false;
    bool reinit_head_on_refresh = false;
    /// Replace pseudo-labels with ground truth in the class-conditioned arm.
    bool force_ground_truth_labels = false;
    GbdtConfig gbdt;
    std::uint64_t seed = 0;

    void validate() const;
    nn::MlpSpec mlp_spec(std::size_t input_width, std::size_t class_count) const;
};

enum class LabelSource : std::uint8_t { ground_truth, pseudo };

/// Class per training row, aligned with SplitSpec::training_rows().
struct PseudoLabelState {
    std::vector<int> label;
    std::vector<LabelSource> source;
};

/// Encoded rows (float) in the given order.
nn::Matrix<float> encode_rows(const OneHotEncoder& enc, const Table& table, const std::vector<std::size_t>& rows);

/// Encoder outputs for encoded rows.
nn::Matrix<float> embed(const nn::ModelParams<float>& params, const nn::Matrix<float>& x);

/// Labeled rows keep ground truth; unlabeled rows take the argmax of the
/// classification head (ties to the lowest class).
PseudoLabelState update_pseudo_labels(const Table& table, const SplitSpec& split, const OneHotEncoder& enc,
                                      const nn::ModelParams<float>& params);

/// Supervised training of a head on fixed encoder features.
void train_head(nn::Stack<float>& head, nn::AdamState<float>& opt, const nn::Matrix<float>& features,
                const std::vector<int>& targets, int epochs, std::size_t batch_size, Rng& rng);

struct PretrainResult {
    nn::ModelParams<float> params;
    nn::AdamState<float> encoder_opt;
    nn::AdamState<float> pretrain_opt;
    nn::AdamState<float> classifier_opt;
    std::vector<double> loss_curve;        // one entry per epoch
    std::vector<std::uint64_t> view_digest;  // hash of every generated view, per epoch
    std::size_t head_refreshes = 0;
    std::optional<PseudoLabelState> final_labels;
};

/// Contrastive pretraining of the encoder and pre-train head. Class-conditioned
/// runs recompute pseudo-labels at the start of every epoch and refresh the
/// classification head every `update_interval` epochs with the encoder frozen.
/// Correlated subset modes use `profile` (built from the training rows when absent).
PretrainResult pretrain(const Table& table, const SplitSpec& split, const OneHotEncoder& enc, const TrainConfig& cfg,
                        const std::optional<ImportanceProfile>& profile = std::nullopt);

struct FinetuneResult {
    nn::Stack<float> head;
    double accuracy = 0;
    double auroc = 0;
    std::vector<int> test_predictions;
    std::vector<double> test_probabilities;  // row-major, n_test x class_count
};

/// Trains a fresh classification head on the labeled rows with the encoder
/// frozen, then scores the test rows. Writes the trained head into `params`.
FinetuneResult finetune(const Table& table, const SplitSpec& split, const OneHotEncoder& enc,
                        nn::ModelParams<float>& params, const TrainConfig& cfg);

/// Test-set predictions and probabilities for a fully trained model.
FinetuneResult evaluate_head(const Table& table, const SplitSpec& split, const OneHotEncoder& enc,
                             const nn::ModelParams<float>& params);

struct RunRecord {
    std::string dataset;
    std::string method;
    std::string subset_mode;
    std::uint64_t seed = 0;
    std::string manifest_hash;
    std::vector<double> loss_curve;
    double accuracy = 0;
    double auroc = 0;
    std::size_t head_refreshes = 0;
    std::optional<double> correlation_range;  // correlated subset modes only
};

struct RunOutcome {
    RunRecord record;
    nn::ModelParams<float> params;
    PretrainResult pretrain;  // empty loss curve for no_pretrain
    FinetuneResult finetune;
};

/// Pretraining (unless no_pretrain) followed by fine-tuning.
RunOutcome run_method(const Table& table, const SplitSpec& split, const TrainConfig& cfg,
                      const std::optional<ImportanceProfile>& profile = std::nullopt);

}  // namespace tabcl
