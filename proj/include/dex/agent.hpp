#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "dex/candidates.hpp"
#include "dex/dexchar.hpp"
#include "dex/environment.hpp"
#include "dex/nn.hpp"
#include "dex/target.hpp"

namespace dex {

struct Action {
    enum class Kind { Keep, Substitute, DexCharUnk };
    Kind kind = Kind::Keep;
    /// Replacement word for Substitute.
    std::string candidate;

    friend bool operator==(const Action&, const Action&) = default;
};

/// Agent view of a sentence: current words (perturbed prefix, original suffix) and the focus.
struct PolicyState {
    std::vector<std::string> words;
    std::size_t t = 0;
};

/// Perturbation actions legal at the focus: the focus word's table candidates, then the
/// UNK action when the table enables it. Keep is always legal and not listed.
std::vector<Action> legal_perturbations(const PolicyState& state, const SubstitutionTable& table);

enum class SelectMode { Sample, Greedy };

struct ActionChoice {
    Action action;
    /// 0 for Keep, otherwise 1 + index into the legal perturbation list.
    std::size_t index = 0;
    double log_prob = 0.0;
    double value = 0.0;
};

struct PolicyShape {
    std::size_t dim = 64;
    std::size_t hidden = 64;
    double init_scale = 0.1;
};

struct TrajectoryStep {
    PolicyState state;
    std::vector<Action> legal;
    std::size_t choice = 0;
    double log_prob = 0.0;
    double value = 0.0;
    double reward = 0.0;
};

struct Trajectory {
    std::string original;
    std::string annotation;
    /// Sentence with every surviving perturbation applied (a rejected one is not).
    std::string perturbed;
    std::vector<TrajectoryStep> steps;
    double episodic_reward = 0.0;
    bool survived = true;
    bool terminated_early = false;
    bool translator_queried = false;
    /// Returns per step: suffix sum of step rewards plus the episodic reward.
    std::vector<double> returns;
    std::size_t edits = 0;
    /// UNK actions whose generation failed and acted as Keep.
    std::size_t degraded = 0;
    std::vector<WordAlignment> changes;
};

/// Fills `returns` from the step and episodic rewards (undiscounted).
void compute_returns(Trajectory& traj);

struct UpdateConfig {
    double learning_rate = 3e-3;
    double value_coef = 0.5;
    double entropy_weight = 0.01;
    /// Multiplies returns before they enter the losses; episodic rewards are BLEU points.
    double return_scale = 0.05;
    double max_grad_norm = 5.0;
    bool adam = true;
    /// Standardize advantages over the batch before the actor term.
    bool normalize_advantages = true;
};

struct LossParts {
    double actor = 0.0;
    double critic = 0.0;
    double entropy = 0.0;
    double total = 0.0;
};

/// Two-stage policy (perturb gate, then candidate softmax) and a critic on a shared extractor.
/// Extractor input: [mean sentence embedding; focus; left neighbour; right neighbour].
/// Candidates are scored by the dot product of a focus query with the candidate's word
/// embedding (a learned vector for the UNK action). Heads start at zero.
class ActorCritic {
public:
    static ActorCritic create(std::span<const std::string> vocabulary, const PolicyShape& shape, std::uint64_t seed);

    struct Distribution {
        double gate = 0.5;
        std::vector<double> candidate_probs;
        double value = 0.0;
    };
    Distribution distribution(const PolicyState& state, std::span<const Action> legal) const;

    ActionChoice select(const PolicyState& state, const SubstitutionTable& table, SelectMode mode, Rng& rng) const;
    ActionChoice select(const PolicyState& state, std::span<const Action> legal, SelectMode mode, Rng& rng) const;

    /// Log-probability of choice index `choice` under the current parameters.
    double log_prob(const PolicyState& state, std::span<const Action> legal, std::size_t choice) const;

    /// Mean over trajectories of: sum_t [-A_t log pi(a_t) + value_coef (R_t - V_t)^2 - entropy_weight H_t],
    /// with R scaled by return_scale and A_t = R_t minus the value recorded at rollout time.
    /// Adds the gradient into `grad` (resized if empty).
    LossParts loss_and_gradient(std::span<const Trajectory> batch, const UpdateConfig& cfg,
                                std::vector<double>& grad) const;

    std::size_t word_id(const std::string& word) const;
    nn::Parameters& params() { return params_; }
    const nn::Parameters& params() const { return params_; }
    const PolicyShape& shape() const { return shape_; }

    nlohmann::json to_json() const;
    static ActorCritic from_json(const nlohmann::json& j);
    void save(const std::filesystem::path& path, const std::string& config_hash) const;
    static ActorCritic load(const std::filesystem::path& path);

private:
    ActorCritic() = default;
    void allocate();

    struct Forward {
        std::vector<std::size_t> ids;
        std::size_t focus = 0, left = 0, right = 0;
        bool has_left = false, has_right = false;
        std::vector<double> x, h1, h2, q;
        double gate_logit = 0.0, gate = 0.5, value = 0.0;
        std::vector<double> logits, probs;
        std::vector<const double*> cand_vecs;
        std::vector<std::size_t> cand_ids;
    };
    void forward(const PolicyState& state, std::span<const Action> legal, Forward& fw) const;

    PolicyShape shape_;
    std::vector<std::string> vocab_;
    std::unordered_map<std::string, std::size_t> index_;
    nn::Parameters params_;
    std::size_t emb_ = 0, unk_vec_ = 0, w1_ = 0, b1_ = 0, w2_ = 0, b2_ = 0;
    std::size_t gate_w_ = 0, gate_b_ = 0, query_w_ = 0, value_w_ = 0, value_b_ = 0;
};

struct UpdateStats {
    LossParts loss;
    double grad_norm = 0.0;
    std::size_t steps = 0;
};

class NonFiniteGradientError : public std::runtime_error {
public:
    explicit NonFiniteGradientError(std::size_t batch)
        : std::runtime_error("non-finite policy gradient in batch " + std::to_string(batch)) {}
};

/// Optimizer state that persists across updates (Adam moments or plain SGD).
class PolicyOptimizer {
public:
    explicit PolicyOptimizer(UpdateConfig cfg = {}) : cfg_(cfg) {}
    /// One policy-gradient step on `batch`. Throws NonFiniteGradientError with `batch_index`.
    UpdateStats update(ActorCritic& policy, std::span<const Trajectory> batch, std::size_t batch_index = 0);
    const UpdateConfig& config() const { return cfg_; }

private:
    UpdateConfig cfg_;
    std::vector<double> m_, v_;
    std::size_t t_ = 0;
};

/// Everything a rollout touches besides the policy.
struct RolloutContext {
    /// When null, every perturbation proceeds with zero step reward.
    const Discriminator* discriminator = nullptr;
    const Tokenizer* tokenizer = nullptr;
    const SubstitutionTable* table = nullptr;
    const CharDicts* dicts = nullptr;
    /// When null, the episodic reward is not computed (inference-only attacks).
    const Translator* target = nullptr;
};

/// Left-to-right episode: choose, apply, ask D after each real perturbation; a rejection
/// ends the episode with -1. Survivors are retokenized and scored by the target.
Trajectory rollout(const ActorCritic& policy, const ParallelPair& example, const RolloutContext& ctx,
                   SelectMode mode, Rng& rng);

struct TrainConfig {
    std::size_t alternations = 4;
    /// Policy update rounds per environment refresh.
    std::size_t n_a = 25;
    std::size_t batch_size = 32;
    std::uint64_t seed = 1;
    PolicyShape policy;
    UpdateConfig update;
    EnvConfig env;
};

struct RoundReport {
    std::size_t alternation = 0;
    std::size_t round = 0;
    double rho = 0.0;
    double mean_episodic_reward = 0.0;
    double survival_rate = 0.0;
    double mean_edits = 0.0;
    double mean_return = 0.0;
    LossParts loss;

    nlohmann::json to_json() const;
};

struct TrainOutcome {
    ActorCritic policy;
    std::unique_ptr<Environment> environment;
    std::vector<RoundReport> rounds;
    std::vector<DiscriminatorTrainResult> refreshes;
    /// Survival rate over all rollouts of the final alternation.
    double final_survival_rate = 0.0;
};

struct AdversaryResources {
    std::vector<ParallelPair> data;
    std::shared_ptr<const Tokenizer> tokenizer;
    SubstitutionTable table;
    CharDicts dicts;
    TranslatorHandle target;
};

/// Alternates environment refreshes with n_a rounds of rollout + policy update.
/// With n_a == 0 only the initial refresh runs. `on_round` observes every report.
TrainOutcome train_adversary(const TrainConfig& cfg, const AdversaryResources& res,
                             const std::function<void(const RoundReport&)>& on_round = {});

/// Words of the training sources plus every candidate in the table, sorted.
std::vector<std::string> policy_vocabulary(std::span<const ParallelPair> data, const SubstitutionTable& table);

nlohmann::json to_json(const TrainConfig& cfg);
std::string config_hash(const TrainConfig& cfg);

} // namespace dex
