#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "dex/dexchar.hpp"
#include "dex/nn.hpp"
#include "dex/target.hpp"
#include "dex/tokenizer.hpp"

namespace dex {

struct ParallelPair {
    std::string source;
    std::string target;
};

enum class SampleLabel { Mismatch = 0, Match = 1 };

/// Training/validation example for D. `source` is always stored retokenized.
struct DiscriminatorSample {
    std::string source;
    std::string annotation;
    SampleLabel label = SampleLabel::Match;
};

struct DiscriminatorShape {
    std::size_t dim = 32;
    std::size_t hidden = 64;
    double init_scale = 0.3;
};

/// Semantic matcher between a (possibly perturbed) source and an annotation.
/// Mean-pooled token embeddings per side, features [u; v; |u-v|; u*v], a tanh hidden
/// layer and a sigmoid head. The head starts at zero, so an untrained D scores 0.5.
class Discriminator {
public:
    /// Index maps are built from the training pairs: source BPE pieces and annotation words.
    static Discriminator create(std::span<const ParallelPair> data, const Tokenizer& tok,
                                const DiscriminatorShape& shape, std::uint64_t seed);

    /// Positive (matched) probability in [0, 1]. The source is segmented with `tok`.
    double score(const Tokenizer& tok, std::string_view source, std::string_view annotation) const;

    struct Encoded {
        std::vector<std::size_t> source_ids;
        std::vector<std::size_t> annotation_ids;
        double label = 1.0;
    };
    Encoded encode(const Tokenizer& tok, std::string_view source, std::string_view annotation,
                   SampleLabel label = SampleLabel::Match) const;

    double probability(const Encoded& e) const;

    /// Mean binary cross-entropy over `batch`; adds d(loss)/d(params) into `grad`
    /// (resized to the parameter count if empty).
    double loss_and_gradient(std::span<const Encoded> batch, std::vector<double>& grad) const;

    /// One plain SGD step on a minibatch; returns the batch loss.
    double sgd_step(std::span<const Encoded> batch, double learning_rate, std::vector<double>& scratch);

    nn::Parameters& params() { return params_; }
    const nn::Parameters& params() const { return params_; }
    const DiscriminatorShape& shape() const { return shape_; }

    nlohmann::json to_json() const;
    static Discriminator from_json(const nlohmann::json& j);

private:
    Discriminator() = default;
    void allocate();

    struct Forward {
        std::vector<double> u, v, f, h;
        double z = 0.0;
        double p = 0.5;
    };
    void forward(const Encoded& e, Forward& fw) const;

    DiscriminatorShape shape_;
    std::unordered_map<std::string, std::size_t> source_index_;
    std::unordered_map<std::string, std::size_t> annotation_index_;
    nn::Parameters params_;
    std::size_t src_emb_ = 0, ann_emb_ = 0, w1_ = 0, b1_ = 0, w2_ = 0, b2_ = 0;
};

struct EnvConfig {
    /// Validation accuracy threshold; refresh stops as soon as rho reaches it.
    double rho_bar = 0.75;
    /// Maximum discriminator epochs per refresh.
    int n_e = 5;
    double learning_rate = 1.0;
    std::size_t batch_size = 16;
    double validation_fraction = 0.1;
    /// Fraction of words perturbed in an augmented positive (at least one word).
    double augment_word_rate = 0.15;
    std::uint64_t seed = 1;
    DiscriminatorShape shape;
};

/// Positive-sample augmentation probability: max(0, rho - rho_bar).
double augmentation_probability(double rho, double rho_bar);

struct EpochLog {
    int epoch = 0;
    double loss = 0.0;
    double rho = 0.0;
    double xi = 0.0;
    std::size_t positives = 0;
    std::size_t augmented = 0;
};

struct DiscriminatorTrainResult {
    double rho = 0.0;
    int epochs_run = 0;
    bool reached_threshold = false;
    std::size_t positives_seen = 0;
    std::size_t positives_augmented = 0;
    std::vector<EpochLog> log;
};

class DivergenceError : public std::runtime_error {
public:
    DivergenceError(int epoch) : std::runtime_error("discriminator diverged at epoch " + std::to_string(epoch)) {}
};

/// Random semantics-light character edit of some words of a sentence (Swap/Ins/Sub).
std::string perturb_sentence_chars(std::string_view sentence, const CharDicts& dicts, double word_rate, Rng& rng);

/// One epoch of D's training samples: every positive is augmented with probability `xi`
/// (counted in `augmented`), then one negative per positive pairing the same source with
/// another example's annotation, so perturbation alone never signals the label.
std::vector<DiscriminatorSample> build_epoch_samples(std::span<const ParallelPair> train, double xi,
                                                     const Tokenizer& tok, const CharDicts& dicts,
                                                     double word_rate, Rng& rng, std::size_t& augmented);

/// Fixed train/validation split and the validation samples derived from it.
struct DiscriminatorData {
    std::vector<ParallelPair> train;
    std::vector<ParallelPair> validation;
};

DiscriminatorData split_discriminator_data(std::span<const ParallelPair> data, double validation_fraction,
                                           std::uint64_t seed);

/// Accuracy of D at threshold 0.5 on matched validation pairs and shuffled mismatches.
double validation_accuracy(const Discriminator& d, const Tokenizer& tok, std::span<const ParallelPair> validation);

/// Runs up to cfg.n_e epochs. Before each epoch xi = max(0, rho_prev - rho_bar), where
/// rho_prev is the previous validation accuracy (`rho_prev` for the first epoch); each
/// positive is character-perturbed with probability xi. Negatives pair each source with
/// another example's annotation. Stops at the first epoch with rho >= rho_bar.
/// Throws DivergenceError on a non-finite loss or parameter.
DiscriminatorTrainResult train_discriminator(Discriminator& d, const DiscriminatorData& data, const EnvConfig& cfg,
                                             const Tokenizer& tok, const CharDicts& dicts, double rho_prev, Rng& rng);

struct StepResult {
    double reward = 0.0;
    bool proceed = true;
};

/// Step reward for a proposed perturbation. nullopt (nothing changed) gives 0 without
/// consulting D; a D score below 0.5 gives -1 and stops, otherwise the score is the reward.
StepResult step_episode(const Discriminator& d, const Tokenizer& tok, const std::optional<std::string>& perturbed,
                        std::string_view annotation);

/// BLEU(translate(original), ref) - BLEU(translate(retokenized perturbed), ref), clipped at 0.
double episodic_reward(const Translator& target, const Tokenizer& tok, std::string_view original,
                       std::string_view perturbed, std::string_view reference);

/// The RL environment: D plus its data split and refresh bookkeeping.
class Environment {
public:
    Environment(std::span<const ParallelPair> data, std::shared_ptr<const Tokenizer> tok, CharDicts dicts,
                EnvConfig cfg);

    /// Retrains D for up to n_e epochs, continuing from the last validation accuracy.
    DiscriminatorTrainResult refresh();

    const Discriminator& discriminator() const { return d_; }
    Discriminator& discriminator() { return d_; }
    const Tokenizer& tokenizer() const { return *tok_; }
    const CharDicts& dicts() const { return dicts_; }
    const EnvConfig& config() const { return cfg_; }
    double last_rho() const { return last_rho_; }
    const DiscriminatorData& data() const { return data_; }
    const std::vector<EpochLog>& history() const { return history_; }

    void save(const std::filesystem::path& path) const;
    void load(const std::filesystem::path& path);

private:
    std::shared_ptr<const Tokenizer> tok_;
    CharDicts dicts_;
    EnvConfig cfg_;
    DiscriminatorData data_;
    Discriminator d_;
    double last_rho_ = 0.0;
    int epochs_total_ = 0;
    Rng rng_;
    std::vector<EpochLog> history_;
};

/// Discriminator stored in an environment checkpoint, without the config hash check.
Discriminator load_discriminator(const std::filesystem::path& path);

/// Stable hash of the configuration, embedded in checkpoints.
std::string config_hash(const EnvConfig& cfg);

} // namespace dex
