// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Usage: dex_acceptance [output-dir]
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dex/attack.hpp"
#include "dex/baselines.hpp"
#include "dex/desk.hpp"
#include "dex/dexchar.hpp"
#include "dex/metrics.hpp"
#include "dex/text.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

/// Shared desk state, built lazily and reused across criteria.
struct Desk {
    dex::DeskResources res = dex::build_desk_resources(dex::DeskConfig{});
    dex::TranslatorHandle target = std::make_shared<dex::LexiconTransducer>(res.world.lexicon, res.tokenizer, 1);
    dex::CharDicts dicts = dex::CharDicts::builtin();

    std::optional<dex::TrainOutcome> trained;
    double train_seconds = 0;

    const dex::TrainOutcome& train() {
        if (!trained) {
            const auto t0 = Clock::now();
            const dex::AdversaryResources ar{res.world.train, res.tokenizer, res.table.with_unk(true), dicts, target};
            trained = dex::train_adversary(dex::desk_train_config(), ar);
            train_seconds = seconds_since(t0);
        }
        return *trained;
    }

    dex::AttackSetup setup(dex::AttackerId id, std::shared_ptr<const dex::ActorCritic> policy = nullptr) {
        dex::AttackSetup s;
        s.attacker = id;
        s.tokenizer = res.tokenizer;
        s.table = res.table;
        s.dicts = dicts;
        s.target = target;
        s.policy = std::move(policy);
        s.seed = 11;
        return s;
    }
};

Desk& desk() {
    static Desk d;
    return d;
}

// 1 -------------------------------------------------------------------------
Outcome unk_contract() {
    auto& d = desk();
    std::vector<std::string> words;
    std::set<std::string> seen;
    for (const auto& line : d.res.world.corpus) {
        for (const auto& w : dex::split_ws(line)) {
            if (seen.insert(w).second) words.push_back(w);
        }
    }
    dex::Rng rng(2024);
    rng.shuffle(words.begin(), words.end());
    words.resize(std::min<std::size_t>(1000, words.size()));
    std::size_t ok = 0, cap_failures = 0, not_unk = 0;
    const auto t0 = Clock::now();
    for (const auto& w : words) {
        try {
            const auto out = dex::generate_unk(w, d.dicts, *d.res.tokenizer);
            ++ok;
            if (!d.res.tokenizer->is_unk(out)) ++not_unk;
        } catch (const dex::UnkGenerationError&) {
            ++cap_failures;
        }
    }
    const double ms = 1000.0 * seconds_since(t0) / double(words.size());
    const double rate = double(ok) / double(words.size());
    return {words.size() == 1000 && d.res.world.corpus.size() >= 10000 && rate >= 0.95 && not_unk == 0 && ms < 1.0,
            fmt("corpus=%zu sentences, vocab limit 30000, sample=%zu, success=%.3f, cap failures=%zu, "
                "non-UNK successes=%zu, mean %.4f ms/word",
                d.res.world.corpus.size(), words.size(), rate, cap_failures, not_unk, ms)};
}

// 2 -------------------------------------------------------------------------
Outcome micro_examples() {
    const auto dicts = dex::CharDicts::builtin();
    const auto swap = dex::act_perturb("noise", 1, dex::ActKind::Swap, dicts);
    const auto ins = dex::act_perturb("noise", 2, dex::ActKind::Ins, dicts);
    std::optional<std::string> sub;
    const auto cands = dicts.char_candidates(U'e', dex::SubSource::Knn);
    for (std::size_t v = 0; v < cands.size(); ++v) {
        if (cands[v] == U"ε") sub = dex::act_perturb("noise", 4, dex::ActKind::Sub, dicts, v);
    }
    const bool acts = swap == "niose" && ins == "noiise" && sub == "noisε";

    dex::MergeTable merges;
    merges.merges = {{"p", "i"}, {"n", "e"}, {"e", "n"}, {"a", "p"}, {"ap", "p"}, {"l", "e"}, {"app", "le"}, {"pi", "ne"}};
    const dex::Vocabulary vocab({{"pine@@", 1}, {"apple", 1}}, 2);
    const dex::Tokenizer tok(merges, vocab);
    const auto before = tok.pieces("pineapple"), after = tok.pieces("pienapple");
    const bool phenomenon = after.size() > before.size() && !tok.is_unk("pineapple") && tok.is_unk("pienapple");
    return {acts && phenomenon,
            fmt("swap=%s ins=%s sub=%s; pineapple=%s (%zu pieces, unk=%d) pienapple=%s (%zu pieces, unk=%d)",
                swap.value_or("-").c_str(), ins.value_or("-").c_str(), sub.value_or("-").c_str(),
                dex::join(before).c_str(), before.size(), int(tok.is_unk("pineapple")), dex::join(after).c_str(),
                after.size(), int(tok.is_unk("pienapple")))};
}

// 3 -------------------------------------------------------------------------
Outcome metrics_oracles() {
    dex::Rng rng(77);
    std::size_t bleu_bad = 0, ed_bad = 0;
    double worst = 0;
    for (int i = 0; i < 100; ++i) {
        const auto h = oracles::random_sentence(rng, 1 + rng.below(15), 3 + rng.below(8));
        const auto r = oracles::random_sentence(rng, 1 + rng.below(15), 3 + rng.below(8));
        const double got = dex::sentence_bleu(h, r), want = oracles::bleu(oracles::ngram_stats(h, r), true);
        const double err = std::abs(got - want);
        worst = std::max(worst, err);
        if (err > 1e-9) ++bleu_bad;
        if (dex::edit_distance(h, r) != oracles::levenshtein(oracles::words(h), oracles::words(r))) ++ed_bad;
    }
    // Corpus BLEU over the same kind of fixtures.
    std::vector<std::string> hs, rs;
    oracles::Stats pooled;
    for (int i = 0; i < 100; ++i) {
        hs.push_back(oracles::random_sentence(rng, 2 + rng.below(12), 6));
        rs.push_back(oracles::random_sentence(rng, 2 + rng.below(12), 6));
        pooled += oracles::ngram_stats(hs.back(), rs.back());
    }
    const double corpus_err = std::abs(dex::bleu(hs, rs, dex::BleuMode::Corpus) - oracles::bleu(pooled, false));

    // MD/DPE identities on a real target.
    auto& d = desk();
    std::vector<dex::DegradationRecord> recs;
    for (std::size_t i = 0; i < 50; ++i) {
        auto r = dex::rni(d.res.world.test[i].source, d.dicts, 0.3, rng);
        recs.push_back({d.res.world.test[i].source, r.sentence, d.res.world.test[i].target});
    }
    const auto deg = dex::degradation_report(*d.target, recs, dex::BleuScorer{});
    std::size_t edits = 0;
    for (const auto& r : recs) edits += oracles::levenshtein(oracles::words(r.perturbed), oracles::words(r.original));
    const bool identities = deg.md == deg.clean_score - deg.perturbed_score && deg.total_edits == edits &&
                            deg.dpe == deg.md / double(edits);
    return {bleu_bad == 0 && ed_bad == 0 && corpus_err <= 1e-9 && identities,
            fmt("sentence BLEU mismatches=%zu (max err %.2e), corpus BLEU err %.2e, edit distance mismatches=%zu, "
                "md/dpe identities %s",
                bleu_bad, worst, corpus_err, ed_bad, identities ? "hold" : "violated")};
}

// 4 -------------------------------------------------------------------------
Outcome rni_statistics() {
    auto& d = desk();
    dex::Rng rng(4);
    std::size_t tokens = 0, perturbed = 0;
    for (const auto& line : d.res.world.corpus) {
        const auto r = dex::rni(line, d.dicts, 0.2, rng);
        tokens += r.tokens;
        perturbed += r.perturbed_tokens;
        if (tokens >= 20000) break;
    }
    const double frac = double(perturbed) / double(tokens);
    bool zero_ok = true, one_ok = true;
    for (std::size_t i = 0; i < 200; ++i) {
        const auto& s = d.res.world.test[i].source;
        const auto z = dex::rni(s, d.dicts, 0.0, rng);
        zero_ok &= z.sentence == s && z.perturbed_tokens == 0;
        const auto o = dex::rni(s, d.dicts, 1.0, rng);
        const auto a = dex::split_ws(o.sentence), b = dex::split_ws(s);
        one_ok &= o.perturbed_tokens == o.tokens && a.size() == b.size();
        for (std::size_t k = 0; k < a.size() && k < b.size(); ++k) one_ok &= a[k] != b[k];
    }
    return {tokens >= 20000 && frac >= 0.17 && frac <= 0.23 && zero_ok && one_ok,
            fmt("p=0.2 over %zu tokens: perturbed fraction %.4f; p=0 exact: %s; p=1 exact: %s", tokens, frac,
                zero_ok ? "yes" : "no", one_ok ? "yes" : "no")};
}

// 5 -------------------------------------------------------------------------
class LookupTranslator final : public dex::Translator {
public:
    explicit LookupTranslator(std::map<std::string, std::string> m) : m_(std::move(m)) {}
    std::string translate(std::string_view s) const override {
        auto it = m_.find(std::string(s));
        return it == m_.end() ? "" : it->second;
    }
    std::string describe() const override { return "lookup"; }

private:
    std::map<std::string, std::string> m_;
};

Outcome gs_contract() {
    auto& d = desk();
    std::size_t violations = 0, accepted = 0;
    for (const auto& p : d.res.world.test) {
        const auto r = dex::greedy_search(p.source, p.target, d.res.table, *d.target);
        for (std::size_t i = 1; i < r.objective_trace.size(); ++i) {
            ++accepted;
            if (!(r.objective_trace[i] > r.objective_trace[i - 1])) ++violations;
        }
    }
    // Two candidates at one position: exhaustive objective check.
    const dex::SubstitutionTable table({{"cat", {{"kitten", 0.9}, {"feline", 0.8}}}}, 0.5, 2, false);
    const LookupTranslator t({{"the cat sleeps", "le chat dort"},
                              {"the kitten sleeps", "le chaton dort"},
                              {"the feline sleeps", "un felin"}});
    const std::string ref = "le chat dort";
    const double base = dex::sentence_bleu(t.translate("the cat sleeps"), ref);
    std::string best;
    double best_v = 0;
    for (const auto* c : {"kitten", "feline"}) {
        const std::string s = std::string("the ") + c + " sleeps";
        const double v = base - dex::sentence_bleu(t.translate(s), ref);
        if (v > best_v) {
            best_v = v;
            best = s;
        }
    }
    const auto r = dex::greedy_search("the cat sleeps", ref, table, t);
    return {violations == 0 && r.sentence == best,
            fmt("%zu accepted steps over %zu desk inputs, %zu non-increasing; 2-candidate instance: GS=\"%s\" "
                "exhaustive optimum=\"%s\"",
                accepted, d.res.world.test.size(), violations, r.sentence.c_str(), best.c_str())};
}

// 6 -------------------------------------------------------------------------
Outcome xi_rule() {
    auto& d = desk();
    dex::EnvConfig cfg;
    cfg.rho_bar = 0.55;
    cfg.n_e = 5;
    dex::Environment env(d.res.world.train, d.res.tokenizer, d.dicts, cfg);
    std::size_t positives = 0, augmented = 0, zero_epochs = 0, zero_violations = 0, stop_violations = 0;
    double expected = 0, max_xi = 0;
    double rho_prev = env.last_rho();
    for (int refresh = 0; refresh < 60 && positives < 5000; ++refresh) {
        const auto r = env.refresh();
        for (std::size_t e = 0; e < r.log.size(); ++e) {
            const auto& log = r.log[e];
            const double xi_rule = std::max(0.0, rho_prev - cfg.rho_bar);
            if (std::abs(log.xi - xi_rule) > 1e-12) ++stop_violations;
            if (rho_prev <= cfg.rho_bar) {
                ++zero_epochs;
                if (log.augmented != 0) ++zero_violations;
            } else {
                // Pool only epochs where the rule asks for augmentation.
                positives += log.positives;
                augmented += log.augmented;
                expected += log.xi * double(log.positives);
                max_xi = std::max(max_xi, log.xi);
            }
            // Early stop: only the last epoch of a refresh may reach the threshold.
            const bool reached = log.rho >= cfg.rho_bar;
            if (reached != (e + 1 == r.log.size() && r.reached_threshold)) ++stop_violations;
            rho_prev = log.rho;
        }
    }
    const double frac = positives ? double(augmented) / double(positives) : 0.0;
    const double want = positives ? expected / double(positives) : 0.0;
    return {positives >= 5000 && std::abs(frac - want) <= 0.03 && zero_epochs > 0 && zero_violations == 0 &&
                stop_violations == 0 && want > 0,
            fmt("%zu positives in xi > 0 epochs (max xi %.3f): augmented fraction %.4f vs weighted xi %.4f; %zu "
                "epochs at rho <= rho_bar with %zu augmented; early-stop/xi violations=%zu",
                positives, max_xi, frac, want, zero_epochs, zero_violations, stop_violations)};
}

// 7 -------------------------------------------------------------------------
template <typename Loss>
double fd_error(std::vector<double>& w, const std::vector<double>& grad, Loss loss) {
    double worst = 0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double h = 1e-5, orig = w[i];
        w[i] = orig + h;
        const double lp = loss();
        w[i] = orig - h;
        const double lm = loss();
        w[i] = orig;
        const double fd = (lp - lm) / (2 * h);
        const double diff = std::abs(fd - grad[i]);
        if (diff < 1e-9) continue;
        worst = std::max(worst, diff / std::max(std::abs(fd), std::abs(grad[i])));
    }
    return worst;
}

std::vector<dex::Trajectory> fixture_batch(const dex::SubstitutionTable& table, bool zero_advantage) {
    std::vector<dex::Trajectory> batch;
    for (int k = 0; k < 3; ++k) {
        dex::Trajectory t;
        dex::PolicyState st{{"a", "b", "d"}, 0};
        for (std::size_t i = 0; i < 3; ++i) {
            st.t = i;
            dex::TrajectoryStep s;
            s.state = st;
            s.legal = dex::legal_perturbations(st, table);
            s.choice = (k + i) % (s.legal.size() + 1);
            s.reward = 0.3 * k - 0.2 * double(i);
            s.value = 0.1 * k;
            t.steps.push_back(s);
        }
        t.episodic_reward = 1.5 * k;
        dex::compute_returns(t);
        batch.push_back(t);
    }
    if (zero_advantage) {
        // Stored values equal to scaled returns leave only the critic term.
        for (auto& t : batch) {
            for (std::size_t i = 0; i < t.steps.size(); ++i) t.steps[i].value = 0.5 * t.returns[i];
        }
    }
    return batch;
}

Outcome gradient_checks() {
    const std::vector<std::string> vocab = {"a", "b", "c", "d", "e"};
    auto ac = dex::ActorCritic::create(vocab, {4, 5, 0.5}, 3);
    dex::Rng rng(9);
    for (auto& v : ac.params().values) v += 0.3 * rng.normal();
    const dex::SubstitutionTable table({{"a", {{"b", .9}, {"c", .8}}}, {"b", {{"a", .9}}}}, 0.5, 2, true);

    dex::UpdateConfig actor_cfg;
    actor_cfg.value_coef = 0.0;
    actor_cfg.entropy_weight = 0.1;
    actor_cfg.return_scale = 0.5;
    const auto actor_batch = fixture_batch(table, false);
    std::vector<double> g;
    ac.loss_and_gradient(actor_batch, actor_cfg, g);
    const double actor_norm = std::sqrt(std::inner_product(g.begin(), g.end(), g.begin(), 0.0));
    const double actor = fd_error(ac.params().values, g, [&] {
        std::vector<double> tmp;
        return ac.loss_and_gradient(actor_batch, actor_cfg, tmp).total;
    });

    dex::UpdateConfig critic_cfg;
    critic_cfg.entropy_weight = 0.0;
    critic_cfg.return_scale = 0.5;
    critic_cfg.normalize_advantages = false;
    const auto critic_batch = fixture_batch(table, true);
    g.clear();
    const auto parts = ac.loss_and_gradient(critic_batch, critic_cfg, g);
    const double critic_norm = std::sqrt(std::inner_product(g.begin(), g.end(), g.begin(), 0.0));
    const double critic = fd_error(ac.params().values, g, [&] {
        std::vector<double> tmp;
        return ac.loss_and_gradient(critic_batch, critic_cfg, tmp).total;
    });

    auto& d = desk();
    const std::vector<dex::ParallelPair> data(d.res.world.train.begin(), d.res.world.train.begin() + 20);
    auto disc = dex::Discriminator::create(data, *d.res.tokenizer, {6, 5, 0.5}, 3);
    for (auto& v : disc.params().values) v += 0.3 * rng.normal();
    std::vector<dex::Discriminator::Encoded> batch;
    for (std::size_t i = 0; i < 6; ++i) {
        batch.push_back(disc.encode(*d.res.tokenizer, data[i].source, data[i].target, dex::SampleLabel::Match));
        batch.push_back(disc.encode(*d.res.tokenizer, data[i].source, data[i + 6].target, dex::SampleLabel::Mismatch));
    }
    g.clear();
    disc.loss_and_gradient(batch, g);
    const double disc_norm = std::sqrt(std::inner_product(g.begin(), g.end(), g.begin(), 0.0));
    const double dis = fd_error(disc.params().values, g, [&] {
        std::vector<double> tmp;
        return disc.loss_and_gradient(batch, tmp);
    });
    const bool critic_only = std::abs(parts.actor) < 1e-12 && parts.critic > 0;
    const bool nonzero = actor_norm > 1e-3 && critic_norm > 1e-3 && disc_norm > 1e-3;
    return {actor < 1e-4 && critic < 1e-4 && dis < 1e-4 && critic_only && nonzero,
            fmt("max relative error: actor %.2e, critic %.2e (actor term %.1e), discriminator %.2e; gradient norms "
                "%.3f / %.3f / %.3f",
                actor, critic, parts.actor, dis, actor_norm, critic_norm, disc_norm)};
}

// 8 -------------------------------------------------------------------------
struct Experiment {
    dex::AttackReport rl;
    double train_seconds = 0;
    double survival = 0;
    double random_md = 0;
    dex::Interval rl_ci, random_ci;
    double untrained_dpe = 0;
    double untrained_md = 0;
};

Experiment& experiment() {
    static std::optional<Experiment> ex;
    if (ex) return *ex;
    auto& d = desk();
    ex.emplace();
    const auto& out = d.train();
    ex->train_seconds = d.train_seconds;
    ex->survival = out.final_survival_rate;
    auto policy = std::make_shared<dex::ActorCritic>(out.policy);
    ex->rl = dex::run_attack(d.setup(dex::AttackerId::DexcharRl, policy), d.res.world.test);

    std::vector<dex::BleuStats> clean, attacked, random;
    std::vector<dex::DegradationRecord> rand_recs;
    const auto table = d.res.table.with_unk(true);
    for (const auto& r : ex->rl.records) {
        dex::Rng rng(dex::sub_seed(23, "random:" + std::to_string(r.line)));
        const auto p = dex::random_budget_attack(r.original, r.edits, table, d.dicts, *d.res.tokenizer, rng);
        rand_recs.push_back({r.original, p.sentence, r.reference});
        clean.push_back(dex::bleu_stats(r.clean_translation, r.reference));
        attacked.push_back(dex::bleu_stats(r.perturbed_translation, r.reference));
        random.push_back(dex::bleu_stats(d.target->translate(p.sentence), r.reference));
    }
    ex->random_md = dex::degradation_report(*d.target, rand_recs, dex::BleuScorer{}).md;
    ex->rl_ci = dex::bootstrap_md_interval(clean, attacked, 1000, 31);
    ex->random_ci = dex::bootstrap_md_interval(clean, random, 1000, 31);

    const auto untrained = dex::ActorCritic::create(dex::policy_vocabulary(d.res.world.train, table),
                                                    dex::desk_train_config().policy, 99);
    const dex::RolloutContext ctx{nullptr, d.res.tokenizer.get(), &table, &d.dicts, nullptr};
    std::vector<dex::DegradationRecord> un_recs;
    for (std::size_t i = 0; i < d.res.world.test.size(); ++i) {
        dex::Rng rng(dex::sub_seed(23, "untrained:" + std::to_string(i)));
        const auto tr = dex::rollout(untrained, d.res.world.test[i], ctx, dex::SelectMode::Sample, rng);
        un_recs.push_back({d.res.world.test[i].source, tr.perturbed, d.res.world.test[i].target});
    }
    const auto un = dex::degradation_report(*d.target, un_recs, dex::BleuScorer{});
    ex->untrained_dpe = un.dpe;
    ex->untrained_md = un.md;
    return *ex;
}

Outcome closed_loop() {
    auto& ex = experiment();
    const bool a = ex.survival >= 0.8;
    const bool b = ex.rl.md > ex.random_md && ex.rl_ci.lo > ex.random_ci.hi;
    const bool c = ex.rl.dpe > ex.untrained_dpe;
    const bool time_ok = ex.train_seconds <= 1800;
    return {a && b && c && time_ok,
            fmt("(a) survival %.3f [%s]; (b) MD rl %.2f CI [%.2f, %.2f] vs budget-matched random %.2f CI [%.2f, %.2f] "
                "[%s]; (c) DPE trained %.3f vs untrained %.3f [%s]; training %.0f s over %zu train / %zu test",
                ex.survival, a ? "ok" : "fail", ex.rl.md, ex.rl_ci.lo, ex.rl_ci.hi, ex.random_md, ex.random_ci.lo,
                ex.random_ci.hi, b ? "ok" : "fail", ex.rl.dpe, ex.untrained_dpe, c ? "ok" : "fail", ex.train_seconds,
                desk().res.world.train.size(), ex.rl.records.size())};
}

// 9 -------------------------------------------------------------------------
Outcome adaptation(const fs::path& out_dir) {
    auto& d = desk();
    auto policy = std::make_shared<dex::ActorCritic>(d.train().policy);
    const auto setup = d.setup(dex::AttackerId::DexcharRl, policy);
    const auto train_report = dex::run_attack(setup, d.res.world.train);
    const auto ft_path = out_dir / "finetune.tsv";
    dex::emit_finetune_data(train_report.records, d.res.world.train, ft_path);
    const auto pairs = dex::load_finetune_data(ft_path);
    const auto adapted = dex::adapt_toy_translator(d.target, pairs, {0.2});

    const auto& test_report = experiment().rl;
    std::vector<std::string> clean_src, refs, mixed_src, mixed_refs;
    for (const auto& r : test_report.records) {
        clean_src.push_back(r.original);
        refs.push_back(r.reference);
    }
    mixed_src = clean_src;
    mixed_refs = refs;
    for (const auto& r : test_report.records) {
        mixed_src.push_back(r.perturbed);
        mixed_refs.push_back(r.reference);
    }
    auto score = [](const dex::Translator& t, const std::vector<std::string>& src, const std::vector<std::string>& ref) {
        std::vector<std::string> hyp;
        for (const auto& s : src) hyp.push_back(t.translate(s));
        return dex::bleu(hyp, ref, dex::BleuMode::Corpus);
    };
    const double clean_before = score(*d.target, clean_src, refs), clean_after = score(*adapted.handle, clean_src, refs);
    const double mixed_before = score(*d.target, mixed_src, mixed_refs);
    const double mixed_after = score(*adapted.handle, mixed_src, mixed_refs);
    const double gain = mixed_after - mixed_before, loss = clean_before - clean_after;
    return {gain >= 2.0 && loss <= 2.0,
            fmt("lambda=0.2, %zu aliases from %zu train pairs; mixed test BLEU %.2f -> %.2f (%+.2f); clean test BLEU "
                "%.2f -> %.2f (%+.2f)",
                adapted.aliases_added, pairs.size(), mixed_before, mixed_after, gain, clean_before, clean_after,
                -loss)};
}

// 10 ------------------------------------------------------------------------
Outcome overhead(const fs::path& out_dir) {
    auto& d = desk();
    auto policy = std::make_shared<dex::ActorCritic>(d.train().policy);
    const std::vector<dex::AttackSetup> setups{d.setup(dex::AttackerId::DexcharRl, policy),
                                               d.setup(dex::AttackerId::Gs)};
    const auto rows = dex::benchmark_overhead(setups, d.res.world.test);
    nlohmann::json report = nlohmann::json::array();
    for (const auto& r : rows) {
        report.push_back({{"attacker", r.attacker}, {"seconds", r.seconds}, {"sentences", r.sentences},
                          {"queries", r.queries}});
    }
    const auto path = out_dir / "timing_report.json";
    std::ofstream(path) << report.dump(2) << "\n";
    const double ratio = rows[1].seconds / std::max(rows[0].seconds, 1e-12);
    return {ratio >= 10.0 && fs::exists(path),
            fmt("dexchar-rl %.4f s vs gs %.4f s (%zu target queries) on %zu sentences: %.1fx; report %s",
                rows[0].seconds, rows[1].seconds, rows[1].queries, rows[0].sentences, ratio, path.string().c_str())};
}

// 11 ------------------------------------------------------------------------
std::string without_timing(const fs::path& p) {
    std::string out;
    for (const auto& line : dex::read_lines(p)) {
        if (nlohmann::json::parse(line).value("type", "") == "timing") continue;
        out += line + "\n";
    }
    return out;
}

Outcome determinism(const fs::path& out_dir) {
    auto& d = desk();
    dex::TrainConfig cfg = dex::desk_train_config();
    cfg.alternations = 2;
    cfg.n_a = 3;
    const std::vector<dex::ParallelPair> train(d.res.world.train.begin(), d.res.world.train.begin() + 400);
    const dex::AdversaryResources ar{train, d.res.tokenizer, d.res.table.with_unk(true), d.dicts, d.target};
    std::vector<std::string> checked;
    std::size_t diffs = 0;
    std::vector<std::shared_ptr<const dex::ActorCritic>> policies;
    for (int run = 0; run < 2; ++run) {
        policies.push_back(std::make_shared<dex::ActorCritic>(dex::train_adversary(cfg, ar).policy));
    }
    if (policies[0]->to_json() != policies[1]->to_json()) ++diffs;
    for (auto id : {dex::AttackerId::Rni, dex::AttackerId::Gs, dex::AttackerId::Rl, dex::AttackerId::DexcharRl}) {
        std::string bodies[2];
        for (int run = 0; run < 2; ++run) {
            const auto rep = dex::run_attack(d.setup(id, policies[run]), d.res.world.test);
            const auto path = out_dir / ("determinism_" + dex::to_string(id) + "_" + std::to_string(run) + ".jsonl");
            rep.write_jsonl(path);
            bodies[run] = without_timing(path);
        }
        if (bodies[0] != bodies[1] || bodies[0].empty()) ++diffs;
        checked.push_back(dex::to_string(id));
    }
    return {diffs == 0, fmt("trained policies and %s reports over two runs: %zu differences (timing line excluded)",
                            dex::join(checked, "/").c_str(), diffs)};
}

} // namespace

int main(int argc, char** argv) {
    const fs::path out_dir = argc > 1 ? fs::path(argv[1]) : fs::current_path() / "acceptance_out";
    fs::create_directories(out_dir);
    const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
        {1, unk_contract},
        {2, micro_examples},
        {3, metrics_oracles},
        {4, rni_statistics},
        {5, gs_contract},
        {6, xi_rule},
        {7, gradient_checks},
        {8, closed_loop},
        {9, [&] { return adaptation(out_dir); }},
        {10, [&] { return overhead(out_dir); }},
        {11, [&] { return determinism(out_dir); }},
    };
    nlohmann::json summary = nlohmann::json::array();
    int failed = 0;
    for (const auto& [id, run] : criteria) {
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += o.pass ? 0 : 1;
        std::printf("criterion %2d: %s  %s  (%.1f s)\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str(),
                    seconds_since(t0));
        std::fflush(stdout);
        summary.push_back({{"criterion", id}, {"pass", o.pass}, {"detail", o.detail}});
    }
    std::ofstream(out_dir / "acceptance.json") << summary.dump(2) << "\n";
    std::printf("%d of %zu criteria passed\n", int(criteria.size()) - failed, criteria.size());
    return failed ? 1 : 0;
}
