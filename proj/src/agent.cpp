#include "dex/agent.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <utility>

#include "dex/text.hpp"

namespace dex {

using nlohmann::json;

std::vector<Action> legal_perturbations(const PolicyState& state, const SubstitutionTable& table) {
    std::vector<Action> out;
    if (state.t >= state.words.size()) return out;
    const auto& word = state.words[state.t];
    for (const auto& c : table.candidates(word)) {
        if (c.token != word) out.push_back({Action::Kind::Substitute, c.token});
    }
    if (table.unk_enabled()) out.push_back({Action::Kind::DexCharUnk, {}});
    return out;
}

void compute_returns(Trajectory& traj) {
    traj.returns.assign(traj.steps.size(), 0.0);
    double acc = traj.episodic_reward;
    for (std::size_t i = traj.steps.size(); i-- > 0;) {
        acc += traj.steps[i].reward;
        traj.returns[i] = acc;
    }
}

ActorCritic ActorCritic::create(std::span<const std::string> vocabulary, const PolicyShape& shape,
                                std::uint64_t seed) {
    ActorCritic ac;
    ac.shape_ = shape;
    ac.vocab_.assign(vocabulary.begin(), vocabulary.end());
    std::sort(ac.vocab_.begin(), ac.vocab_.end());
    ac.vocab_.erase(std::unique(ac.vocab_.begin(), ac.vocab_.end()), ac.vocab_.end());
    ac.allocate();
    Rng rng(seed, "policy-init");
    const std::size_t d = shape.dim, h = shape.hidden;
    nn::fill_normal(ac.params_.view(ac.emb_), rng, shape.init_scale);
    std::fill_n(ac.params_.ptr(ac.emb_), d, 0.0);
    nn::fill_normal(ac.params_.view(ac.unk_vec_), rng, shape.init_scale);
    nn::fill_normal(ac.params_.view(ac.w1_), rng, 1.0 / std::sqrt(4.0 * d));
    nn::fill_normal(ac.params_.view(ac.w2_), rng, 1.0 / std::sqrt(static_cast<double>(h)));
    return ac;
}

void ActorCritic::allocate() {
    index_.clear();
    for (std::size_t i = 0; i < vocab_.size(); ++i) index_[vocab_[i]] = i + 1;
    const std::size_t d = shape_.dim, h = shape_.hidden;
    params_ = nn::Parameters{};
    emb_ = params_.add("embedding", vocab_.size() + 1, d);
    unk_vec_ = params_.add("unk_action", 1, d);
    w1_ = params_.add("w1", h, 4 * d);
    b1_ = params_.add("b1", h, 1);
    w2_ = params_.add("w2", h, h);
    b2_ = params_.add("b2", h, 1);
    gate_w_ = params_.add("gate_w", 1, h);
    gate_b_ = params_.add("gate_b", 1, 1);
    query_w_ = params_.add("query_w", d, h);
    value_w_ = params_.add("value_w", 1, h);
    value_b_ = params_.add("value_b", 1, 1);
}

std::size_t ActorCritic::word_id(const std::string& word) const {
    auto it = index_.find(word);
    return it == index_.end() ? 0 : it->second;
}

void ActorCritic::forward(const PolicyState& state, std::span<const Action> legal, Forward& fw) const {
    const std::size_t d = shape_.dim, h = shape_.hidden;
    const double* emb = params_.ptr(emb_);
    fw.ids.clear();
    for (const auto& w : state.words) fw.ids.push_back(word_id(w));
    fw.x.assign(4 * d, 0.0);
    if (!fw.ids.empty()) {
        const double inv = 1.0 / static_cast<double>(fw.ids.size());
        for (std::size_t id : fw.ids) {
            for (std::size_t k = 0; k < d; ++k) fw.x[k] += emb[id * d + k] * inv;
        }
    }
    fw.focus = state.t < fw.ids.size() ? fw.ids[state.t] : 0;
    fw.has_left = state.t > 0 && state.t - 1 < fw.ids.size();
    fw.has_right = state.t + 1 < fw.ids.size();
    fw.left = fw.has_left ? fw.ids[state.t - 1] : 0;
    fw.right = fw.has_right ? fw.ids[state.t + 1] : 0;
    std::copy_n(emb + fw.focus * d, d, fw.x.begin() + d);
    if (fw.has_left) std::copy_n(emb + fw.left * d, d, fw.x.begin() + 2 * d);
    if (fw.has_right) std::copy_n(emb + fw.right * d, d, fw.x.begin() + 3 * d);

    fw.h1.resize(h);
    nn::matvec(params_.ptr(w1_), h, 4 * d, fw.x.data(), params_.ptr(b1_), fw.h1.data());
    for (double& v : fw.h1) v = std::tanh(v);
    fw.h2.resize(h);
    nn::matvec(params_.ptr(w2_), h, h, fw.h1.data(), params_.ptr(b2_), fw.h2.data());
    for (double& v : fw.h2) v = std::tanh(v);

    nn::matvec(params_.ptr(gate_w_), 1, h, fw.h2.data(), params_.ptr(gate_b_), &fw.gate_logit);
    fw.gate = nn::sigmoid(fw.gate_logit);
    nn::matvec(params_.ptr(value_w_), 1, h, fw.h2.data(), params_.ptr(value_b_), &fw.value);
    fw.q.resize(d);
    nn::matvec(params_.ptr(query_w_), d, h, fw.h2.data(), nullptr, fw.q.data());

    fw.logits.clear();
    fw.cand_vecs.clear();
    fw.cand_ids.clear();
    for (const auto& a : legal) {
        const double* vec;
        std::size_t id = 0;
        if (a.kind == Action::Kind::DexCharUnk) {
            vec = params_.ptr(unk_vec_);
            id = SIZE_MAX;
        } else {
            id = word_id(a.candidate);
            vec = emb + id * d;
        }
        double z = 0.0;
        for (std::size_t k = 0; k < d; ++k) z += fw.q[k] * vec[k];
        fw.logits.push_back(z);
        fw.cand_vecs.push_back(vec);
        fw.cand_ids.push_back(id);
    }
    fw.probs.resize(fw.logits.size());
    if (!fw.logits.empty()) {
        const double mx = *std::max_element(fw.logits.begin(), fw.logits.end());
        double sum = 0.0;
        for (std::size_t i = 0; i < fw.logits.size(); ++i) sum += fw.probs[i] = std::exp(fw.logits[i] - mx);
        for (double& p : fw.probs) p /= sum;
    }
}

ActorCritic::Distribution ActorCritic::distribution(const PolicyState& state, std::span<const Action> legal) const {
    Forward fw;
    forward(state, legal, fw);
    return {fw.gate, fw.probs, fw.value};
}

namespace {

/// log pi_i from logits, stable.
std::vector<double> log_softmax(const std::vector<double>& logits) {
    std::vector<double> out(logits.size());
    if (logits.empty()) return out;
    const double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double z : logits) sum += std::exp(z - mx);
    const double lse = mx + std::log(sum);
    for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
    return out;
}

double choice_log_prob(double gate_logit, const std::vector<double>& logp, std::size_t choice) {
    if (logp.empty()) return 0.0;
    if (choice == 0) return nn::log_sigmoid(-gate_logit);
    return nn::log_sigmoid(gate_logit) + logp[choice - 1];
}

} // namespace

double ActorCritic::log_prob(const PolicyState& state, std::span<const Action> legal, std::size_t choice) const {
    Forward fw;
    forward(state, legal, fw);
    return choice_log_prob(fw.gate_logit, log_softmax(fw.logits), choice);
}

ActionChoice ActorCritic::select(const PolicyState& state, const SubstitutionTable& table, SelectMode mode,
                                 Rng& rng) const {
    return select(state, legal_perturbations(state, table), mode, rng);
}

ActionChoice ActorCritic::select(const PolicyState& state, std::span<const Action> legal, SelectMode mode,
                                 Rng& rng) const {
    Forward fw;
    forward(state, legal, fw);
    ActionChoice out;
    out.value = fw.value;
    if (legal.empty()) return out;
    bool perturb;
    std::size_t pick = 0;
    if (mode == SelectMode::Greedy) {
        perturb = fw.gate > 0.5;
        pick = static_cast<std::size_t>(std::max_element(fw.probs.begin(), fw.probs.end()) - fw.probs.begin());
    } else {
        perturb = rng.bernoulli(fw.gate);
        if (perturb) {
            double u = rng.uniform(), acc = 0.0;
            pick = fw.probs.size() - 1;
            for (std::size_t i = 0; i < fw.probs.size(); ++i) {
                acc += fw.probs[i];
                if (u < acc) {
                    pick = i;
                    break;
                }
            }
        }
    }
    out.index = perturb ? pick + 1 : 0;
    if (perturb) out.action = legal[pick];
    out.log_prob = choice_log_prob(fw.gate_logit, log_softmax(fw.logits), out.index);
    return out;
}

LossParts ActorCritic::loss_and_gradient(std::span<const Trajectory> batch, const UpdateConfig& cfg,
                                         std::vector<double>& grad) const {
    if (grad.empty()) grad.assign(params_.size(), 0.0);
    LossParts parts;
    if (batch.empty()) return parts;
    const std::size_t d = shape_.dim, h = shape_.hidden;
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    const auto off = [&](std::size_t s) { return params_.slice(s).offset; };
    double* g_emb = grad.data() + off(emb_);
    const double* w2 = params_.ptr(w2_);
    const double* w1 = params_.ptr(w1_);

    Forward fw;
    std::vector<double> dq(d), dh2(h), da2(h), dh1(h), da1(h), dx(4 * d);
    double adv_mean = 0.0, adv_scale = 1.0;
    if (cfg.normalize_advantages) {
        double sum = 0.0, sq = 0.0, n = 0.0;
        for (const auto& traj : batch) {
            if (traj.returns.size() != traj.steps.size()) throw std::invalid_argument("trajectory returns not computed");
            for (std::size_t s = 0; s < traj.steps.size(); ++s) {
                const double a = cfg.return_scale * traj.returns[s] - traj.steps[s].value;
                sum += a;
                sq += a * a;
                n += 1.0;
            }
        }
        if (n > 1.0) {
            adv_mean = sum / n;
            adv_scale = 1.0 / (std::sqrt(std::max(0.0, sq / n - adv_mean * adv_mean)) + 1e-8);
        }
    }
    for (const auto& traj : batch) {
        if (traj.returns.size() != traj.steps.size()) throw std::invalid_argument("trajectory returns not computed");
        for (std::size_t s = 0; s < traj.steps.size(); ++s) {
            const auto& step = traj.steps[s];
            forward(step.state, step.legal, fw);
            const double ret = cfg.return_scale * traj.returns[s];
            const double adv = (ret - step.value - adv_mean) * adv_scale;
            const auto logp = log_softmax(fw.logits);
            const double lp = choice_log_prob(fw.gate_logit, logp, step.choice);

            parts.actor += -adv * lp * inv_b;
            parts.critic += cfg.value_coef * (ret - fw.value) * (ret - fw.value) * inv_b;

            double dz = 0.0;
            std::vector<double> dl(fw.logits.size(), 0.0);
            if (!step.legal.empty()) {
                const double g = fw.gate;
                if (step.choice == 0) {
                    dz += adv * g;
                } else {
                    dz += -adv * (1.0 - g);
                    for (std::size_t j = 0; j < dl.size(); ++j) {
                        dl[j] += -adv * ((j + 1 == step.choice ? 1.0 : 0.0) - fw.probs[j]);
                    }
                }
                double h_pi = 0.0;
                for (std::size_t j = 0; j < logp.size(); ++j) h_pi -= fw.probs[j] * logp[j];
                const double log_keep = nn::log_sigmoid(-fw.gate_logit), log_g = nn::log_sigmoid(fw.gate_logit);
                const double h_b = -(1.0 - g) * log_keep - g * log_g;
                const double ent = h_b + g * h_pi;
                parts.entropy += ent * inv_b;
                dz -= cfg.entropy_weight * g * (1.0 - g) * (log_keep - log_g + h_pi);
                for (std::size_t j = 0; j < dl.size(); ++j) {
                    dl[j] -= cfg.entropy_weight * (-g * fw.probs[j] * (logp[j] + h_pi));
                }
            }
            dz *= inv_b;
            for (double& v : dl) v *= inv_b;
            const double dv = -2.0 * cfg.value_coef * (ret - fw.value) * inv_b;

            std::fill(dh2.begin(), dh2.end(), 0.0);
            std::fill(dq.begin(), dq.end(), 0.0);
            // gate and value heads
            const double* gw = params_.ptr(gate_w_);
            const double* vw = params_.ptr(value_w_);
            for (std::size_t k = 0; k < h; ++k) {
                grad[off(gate_w_) + k] += dz * fw.h2[k];
                grad[off(value_w_) + k] += dv * fw.h2[k];
                dh2[k] += dz * gw[k] + dv * vw[k];
            }
            grad[off(gate_b_)] += dz;
            grad[off(value_b_)] += dv;
            // candidate scores
            for (std::size_t j = 0; j < dl.size(); ++j) {
                if (dl[j] == 0.0) continue;
                const double* vec = fw.cand_vecs[j];
                double* gvec = fw.cand_ids[j] == SIZE_MAX ? grad.data() + off(unk_vec_) : g_emb + fw.cand_ids[j] * d;
                for (std::size_t k = 0; k < d; ++k) {
                    dq[k] += dl[j] * vec[k];
                    gvec[k] += dl[j] * fw.q[k];
                }
            }
            nn::outer_acc(grad.data() + off(query_w_), d, h, dq.data(), fw.h2.data());
            nn::matvec_t_acc(params_.ptr(query_w_), d, h, dq.data(), dh2.data());
            // extractor
            for (std::size_t k = 0; k < h; ++k) da2[k] = dh2[k] * (1.0 - fw.h2[k] * fw.h2[k]);
            nn::outer_acc(grad.data() + off(w2_), h, h, da2.data(), fw.h1.data());
            for (std::size_t k = 0; k < h; ++k) grad[off(b2_) + k] += da2[k];
            std::fill(dh1.begin(), dh1.end(), 0.0);
            nn::matvec_t_acc(w2, h, h, da2.data(), dh1.data());
            for (std::size_t k = 0; k < h; ++k) da1[k] = dh1[k] * (1.0 - fw.h1[k] * fw.h1[k]);
            nn::outer_acc(grad.data() + off(w1_), h, 4 * d, da1.data(), fw.x.data());
            for (std::size_t k = 0; k < h; ++k) grad[off(b1_) + k] += da1[k];
            std::fill(dx.begin(), dx.end(), 0.0);
            nn::matvec_t_acc(w1, h, 4 * d, da1.data(), dx.data());
            if (!fw.ids.empty()) {
                const double inv = 1.0 / static_cast<double>(fw.ids.size());
                for (std::size_t id : fw.ids) {
                    for (std::size_t k = 0; k < d; ++k) g_emb[id * d + k] += dx[k] * inv;
                }
            }
            for (std::size_t k = 0; k < d; ++k) g_emb[fw.focus * d + k] += dx[d + k];
            if (fw.has_left) {
                for (std::size_t k = 0; k < d; ++k) g_emb[fw.left * d + k] += dx[2 * d + k];
            }
            if (fw.has_right) {
                for (std::size_t k = 0; k < d; ++k) g_emb[fw.right * d + k] += dx[3 * d + k];
            }
        }
    }
    parts.total = parts.actor + parts.critic - cfg.entropy_weight * parts.entropy;
    return parts;
}

json ActorCritic::to_json() const {
    return {{"dim", shape_.dim},
            {"hidden", shape_.hidden},
            {"init_scale", shape_.init_scale},
            {"vocabulary", vocab_},
            {"params", params_.to_json()}};
}

ActorCritic ActorCritic::from_json(const json& j) {
    ActorCritic ac;
    ac.shape_.dim = j.at("dim").get<std::size_t>();
    ac.shape_.hidden = j.at("hidden").get<std::size_t>();
    ac.shape_.init_scale = j.at("init_scale").get<double>();
    ac.vocab_ = j.at("vocabulary").get<std::vector<std::string>>();
    ac.allocate();
    ac.params_.load_json(j.at("params"));
    return ac;
}

void ActorCritic::save(const std::filesystem::path& path, const std::string& config_hash) const {
    const json j{{"format", "dex-policy"}, {"version", 1}, {"config_hash", config_hash}, {"model", to_json()}};
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump() << '\n';
}

ActorCritic ActorCritic::load(const std::filesystem::path& path) {
    const auto j = json::parse(read_file(path));
    if (j.value("format", "") != "dex-policy" || j.value("version", 0) != 1) {
        throw std::runtime_error(path.string() + ": not a version 1 policy checkpoint");
    }
    return from_json(j.at("model"));
}

UpdateStats PolicyOptimizer::update(ActorCritic& policy, std::span<const Trajectory> batch, std::size_t batch_index) {
    UpdateStats stats;
    std::vector<double> grad;
    stats.loss = policy.loss_and_gradient(batch, cfg_, grad);
    for (const auto& t : batch) stats.steps += t.steps.size();
    for (double g : grad) {
        if (!std::isfinite(g)) throw NonFiniteGradientError(batch_index);
    }
    stats.grad_norm = nn::clip_norm(grad, cfg_.max_grad_norm);
    auto& w = policy.params().values;
    if (!cfg_.adam) {
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= cfg_.learning_rate * grad[i];
        return stats;
    }
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    if (m_.size() != w.size()) {
        m_.assign(w.size(), 0.0);
        v_.assign(w.size(), 0.0);
        t_ = 0;
    }
    ++t_;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (grad[i] == 0.0 && m_[i] == 0.0) continue;
        m_[i] = b1 * m_[i] + (1.0 - b1) * grad[i];
        v_[i] = b2 * v_[i] + (1.0 - b2) * grad[i] * grad[i];
        w[i] -= cfg_.learning_rate * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps);
    }
    return stats;
}

Trajectory rollout(const ActorCritic& policy, const ParallelPair& example, const RolloutContext& ctx,
                   SelectMode mode, Rng& rng) {
    if (!ctx.tokenizer || !ctx.table || !ctx.dicts) {
        throw std::invalid_argument("rollout context incomplete");
    }
    Trajectory traj;
    traj.original = example.source;
    traj.annotation = example.target;
    PolicyState state{split_ws(example.source), 0};
    const auto original = state.words;
    for (std::size_t t = 0; t < state.words.size(); ++t) {
        state.t = t;
        TrajectoryStep step;
        step.legal = legal_perturbations(state, *ctx.table);
        auto choice = policy.select(state, step.legal, mode, rng);
        step.state = state;
        step.choice = choice.index;
        step.log_prob = choice.log_prob;
        step.value = choice.value;

        std::optional<std::string> replacement;
        if (choice.action.kind == Action::Kind::Substitute) {
            replacement = choice.action.candidate;
        } else if (choice.action.kind == Action::Kind::DexCharUnk) {
            try {
                replacement = generate_unk(state.words[t], *ctx.dicts, *ctx.tokenizer);
            } catch (const UnkGenerationError&) {
                ++traj.degraded;
            }
        }
        if (!replacement) {
            traj.steps.push_back(std::move(step));
            continue;
        }
        std::string previous = std::exchange(state.words[t], *replacement);
        const auto sr = ctx.discriminator
                            ? step_episode(*ctx.discriminator, *ctx.tokenizer, join(state.words), example.target)
                            : StepResult{};
        step.reward = sr.reward;
        traj.steps.push_back(std::move(step));
        if (!sr.proceed) {
            state.words[t] = std::move(previous);
            traj.survived = false;
            traj.terminated_early = true;
            break;
        }
        ++traj.edits;
        traj.changes.push_back({t, *replacement, original[t]});
    }
    traj.perturbed = join(state.words);
    if (traj.survived && ctx.target) {
        traj.episodic_reward =
            episodic_reward(*ctx.target, *ctx.tokenizer, example.source, traj.perturbed, example.target);
        traj.translator_queried = true;
    }
    compute_returns(traj);
    return traj;
}

std::vector<std::string> policy_vocabulary(std::span<const ParallelPair> data, const SubstitutionTable& table) {
    std::set<std::string> words;
    for (const auto& p : data) {
        for (auto& w : split_ws(p.source)) words.insert(std::move(w));
    }
    for (const auto& [tok, cands] : table.entries()) {
        words.insert(tok);
        for (const auto& c : cands) words.insert(c.token);
    }
    return {words.begin(), words.end()};
}

json RoundReport::to_json() const {
    return {{"alternation", alternation},
            {"round", round},
            {"rho", rho},
            {"mean_episodic_reward", mean_episodic_reward},
            {"survival_rate", survival_rate},
            {"mean_edits", mean_edits},
            {"mean_return", mean_return},
            {"actor_loss", loss.actor},
            {"critic_loss", loss.critic},
            {"entropy", loss.entropy}};
}

json to_json(const TrainConfig& cfg) {
    return {{"alternations", cfg.alternations},
            {"n_a", cfg.n_a},
            {"batch_size", cfg.batch_size},
            {"seed", cfg.seed},
            {"policy_dim", cfg.policy.dim},
            {"policy_hidden", cfg.policy.hidden},
            {"learning_rate", cfg.update.learning_rate},
            {"value_coef", cfg.update.value_coef},
            {"entropy_weight", cfg.update.entropy_weight},
            {"return_scale", cfg.update.return_scale},
            {"max_grad_norm", cfg.update.max_grad_norm},
            {"adam", cfg.update.adam},
            {"normalize_advantages", cfg.update.normalize_advantages},
            {"env_hash", config_hash(cfg.env)}};
}

std::string config_hash(const TrainConfig& cfg) { return hex64(fnv1a(to_json(cfg).dump())); }

TrainOutcome train_adversary(const TrainConfig& cfg, const AdversaryResources& res,
                             const std::function<void(const RoundReport&)>& on_round) {
    if (res.data.empty()) throw std::invalid_argument("no training pairs");
    if (!res.tokenizer) throw std::invalid_argument("no tokenizer");
    if (!res.target) throw std::invalid_argument("no target translator");
    const auto vocab = policy_vocabulary(res.data, res.table);
    TrainOutcome out{ActorCritic::create(vocab, cfg.policy, sub_seed(cfg.seed, "policy")),
                     std::make_unique<Environment>(res.data, res.tokenizer, res.dicts, cfg.env),
                     {},
                     {},
                     0.0};
    PolicyOptimizer opt(cfg.update);
    Rng rng(cfg.seed, "rollouts");
    std::size_t batch_index = 0;
    const std::size_t alternations = cfg.n_a == 0 ? 1 : cfg.alternations;
    for (std::size_t a = 0; a < alternations; ++a) {
        out.refreshes.push_back(out.environment->refresh());
        const RolloutContext ctx{&out.environment->discriminator(), res.tokenizer.get(), &res.table, &res.dicts,
                                 res.target.get()};
        std::size_t survived = 0, total = 0;
        for (std::size_t r = 0; r < cfg.n_a; ++r) {
            std::vector<Trajectory> batch;
            batch.reserve(cfg.batch_size);
            RoundReport rep;
            rep.alternation = a;
            rep.round = r;
            rep.rho = out.environment->last_rho();
            for (std::size_t b = 0; b < cfg.batch_size; ++b) {
                const auto& ex = res.data[rng.below(res.data.size())];
                batch.push_back(rollout(out.policy, ex, ctx, SelectMode::Sample, rng));
                const auto& tr = batch.back();
                rep.mean_episodic_reward += tr.episodic_reward;
                rep.survival_rate += tr.survived ? 1.0 : 0.0;
                rep.mean_edits += static_cast<double>(tr.edits);
                rep.mean_return += tr.returns.empty() ? tr.episodic_reward : tr.returns.front();
            }
            const double n = static_cast<double>(batch.size());
            rep.mean_episodic_reward /= n;
            rep.survival_rate /= n;
            rep.mean_edits /= n;
            rep.mean_return /= n;
            survived += static_cast<std::size_t>(std::lround(rep.survival_rate * n));
            total += batch.size();
            rep.loss = opt.update(out.policy, batch, batch_index++).loss;
            out.rounds.push_back(rep);
            if (on_round) on_round(rep);
        }
        out.final_survival_rate = total ? static_cast<double>(survived) / static_cast<double>(total) : 0.0;
    }
    return out;
}

} // namespace dex
