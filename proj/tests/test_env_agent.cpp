#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "dex/agent.hpp"
#include "dex/environment.hpp"
#include "dex/metrics.hpp"
#include "dex/text.hpp"
#include "fixtures.hpp"

namespace {

std::vector<dex::ParallelPair> desk_train(std::size_t n) {
    const auto& t = fixtures::desk().world.train;
    return {t.begin(), t.begin() + static_cast<std::ptrdiff_t>(n)};
}

/// Worst relative error between analytic and central-difference gradients.
template <typename Loss>
double worst_fd_error(std::vector<double>& w, const std::vector<double>& grad, Loss loss) {
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

} // namespace

TEST(Discriminator, UntrainedScoresHalf) {
    const auto data = desk_train(50);
    const auto& tok = *fixtures::desk().tokenizer;
    const auto d = dex::Discriminator::create(data, tok, {}, 1);
    EXPECT_DOUBLE_EQ(d.score(tok, data[0].source, data[0].target), 0.5);
}

TEST(Discriminator, FiniteDifferenceGradient) {
    const auto data = desk_train(20);
    const auto& tok = *fixtures::desk().tokenizer;
    dex::DiscriminatorShape shape{6, 5, 0.5};
    auto d = dex::Discriminator::create(data, tok, shape, 3);
    dex::Rng rng(5);
    for (auto& v : d.params().values) v += 0.3 * rng.normal();
    std::vector<dex::Discriminator::Encoded> batch;
    for (std::size_t i = 0; i < 6; ++i) {
        batch.push_back(d.encode(tok, data[i].source, data[i].target, dex::SampleLabel::Match));
        batch.push_back(d.encode(tok, data[i].source, data[i + 6].target, dex::SampleLabel::Mismatch));
    }
    std::vector<double> grad;
    d.loss_and_gradient(batch, grad);
    const double worst = worst_fd_error(d.params().values, grad, [&] {
        std::vector<double> g;
        return d.loss_and_gradient(batch, g);
    });
    EXPECT_LT(worst, 1e-4);
}

TEST(StepEpisode, RewardRules) {
    const auto data = desk_train(50);
    const auto& tok = *fixtures::desk().tokenizer;
    auto d = dex::Discriminator::create(data, tok, {}, 1);
    const auto none = dex::step_episode(d, tok, std::nullopt, data[0].target);
    EXPECT_EQ(none.reward, 0.0);
    EXPECT_TRUE(none.proceed);
    const auto half = dex::step_episode(d, tok, data[0].source, data[0].target);
    EXPECT_DOUBLE_EQ(half.reward, 0.5);
    EXPECT_TRUE(half.proceed);
    d.params().values[d.params().size() - 1] = -5.0;
    const auto reject = dex::step_episode(d, tok, data[0].source, data[0].target);
    EXPECT_EQ(reject.reward, -1.0);
    EXPECT_FALSE(reject.proceed);
}

TEST(Augmentation, ProbabilityIsClippedGap) {
    EXPECT_DOUBLE_EQ(dex::augmentation_probability(0.9, 0.75), 0.9 - 0.75);
    EXPECT_DOUBLE_EQ(dex::augmentation_probability(0.6, 0.75), 0.0);
}

TEST(Augmentation, EpochFractionTracksXi) {
    const auto& res = fixtures::desk();
    const auto dicts = dex::CharDicts::builtin();
    dex::Rng rng(8);
    std::size_t augmented = 0;
    const auto samples = dex::build_epoch_samples(res.world.train, 0.3, *res.tokenizer, dicts, 0.15, rng, augmented);
    EXPECT_EQ(samples.size(), 2 * res.world.train.size());
    EXPECT_NEAR(double(augmented) / double(res.world.train.size()), 0.3, 0.035);
    std::size_t zero = 0;
    dex::build_epoch_samples(res.world.train, 0.0, *res.tokenizer, dicts, 0.15, rng, zero);
    EXPECT_EQ(zero, 0u);
}

TEST(Augmentation, TrainingZeroXiAndEarlyStop) {
    const auto& res = fixtures::desk();
    const auto data = dex::split_discriminator_data(desk_train(400), 0.1, 1);
    auto d = dex::Discriminator::create(data.train, *res.tokenizer, {}, 1);
    dex::EnvConfig cfg;
    cfg.n_e = 3;
    cfg.rho_bar = 0.99;
    dex::Rng rng(2);
    const auto r = dex::train_discriminator(d, data, cfg, *res.tokenizer, dex::CharDicts::builtin(), 0.0, rng);
    ASSERT_FALSE(r.log.empty());
    EXPECT_EQ(r.log[0].xi, 0.0);
    EXPECT_EQ(r.log[0].augmented, 0u);

    auto d2 = dex::Discriminator::create(data.train, *res.tokenizer, {}, 1);
    cfg.rho_bar = 0.01;
    const auto early = dex::train_discriminator(d2, data, cfg, *res.tokenizer, dex::CharDicts::builtin(), 0.0, rng);
    EXPECT_EQ(early.epochs_run, 1);
    EXPECT_TRUE(early.reached_threshold);
}

TEST(Discriminator, DeskThousandPairsReachesThreshold) {
    const auto& res = fixtures::desk();
    dex::EnvConfig cfg;
    cfg.rho_bar = 0.75;
    cfg.n_e = 5;
    dex::Environment env(desk_train(1000), res.tokenizer, dex::CharDicts::builtin(), cfg);
    const auto r = env.refresh();
    EXPECT_TRUE(r.reached_threshold);
    EXPECT_GE(r.rho, 0.75);
}

TEST(ActorCritic, FiniteDifferenceGradient) {
    const std::vector<std::string> vocab = {"a", "b", "c", "d", "e"};
    auto ac = dex::ActorCritic::create(vocab, {4, 5, 0.5}, 3);
    dex::Rng r(9);
    for (auto& v : ac.params().values) v += 0.3 * r.normal();
    const dex::SubstitutionTable table({{"a", {{"b", .9}, {"c", .8}}}, {"b", {{"a", .9}}}}, 0.5, 2, true);
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
            s.value = 0.1 * double(k) - 0.05 * double(i);
            s.reward = 0.3 * k - 0.2 * double(i);
            t.steps.push_back(s);
        }
        t.episodic_reward = 1.5 * k;
        dex::compute_returns(t);
        batch.push_back(t);
    }
    dex::UpdateConfig cfg;
    cfg.entropy_weight = 0.1;
    cfg.return_scale = 0.5;
    std::vector<double> grad;
    ac.loss_and_gradient(batch, cfg, grad);
    const double worst = worst_fd_error(ac.params().values, grad, [&] {
        std::vector<double> g;
        return ac.loss_and_gradient(batch, cfg, g).total;
    });
    EXPECT_LT(worst, 1e-4);
}

TEST(ActorCritic, LegalActionsAndDistribution) {
    const dex::SubstitutionTable table({{"a", {{"b", .9}}}}, 0.5, 1, true);
    const dex::PolicyState st{{"a", "z"}, 0};
    const auto legal = dex::legal_perturbations(st, table);
    ASSERT_EQ(legal.size(), 2u);
    EXPECT_EQ(legal[0].kind, dex::Action::Kind::Substitute);
    EXPECT_EQ(legal[1].kind, dex::Action::Kind::DexCharUnk);
    EXPECT_TRUE(dex::legal_perturbations({{"a", "z"}, 1}, table.with_unk(false)).empty());
    const auto ac = dex::ActorCritic::create(std::vector<std::string>{"a", "b", "z"}, {}, 1);
    const auto dist = ac.distribution(st, legal);
    EXPECT_DOUBLE_EQ(dist.gate, 0.5);
    EXPECT_NEAR(dist.candidate_probs[0] + dist.candidate_probs[1], 1.0, 1e-12);
    double total = std::exp(ac.log_prob(st, legal, 0));
    for (std::size_t c = 1; c <= legal.size(); ++c) total += std::exp(ac.log_prob(st, legal, c));
    EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(Rollout, WithoutDiscriminatorEveryEditProceeds) {
    const auto& res = fixtures::desk();
    const auto data = desk_train(30);
    const auto vocab = dex::policy_vocabulary(data, res.table);
    const auto ac = dex::ActorCritic::create(vocab, {}, 2);
    const auto dicts = dex::CharDicts::builtin();
    const auto table = res.table.with_unk(true);
    const dex::RolloutContext ctx{nullptr, res.tokenizer.get(), &table, &dicts, nullptr};
    dex::Rng rng(3);
    for (const auto& p : data) {
        const auto t = dex::rollout(ac, p, ctx, dex::SelectMode::Sample, rng);
        EXPECT_TRUE(t.survived);
        EXPECT_EQ(t.steps.size(), dex::split_ws(p.source).size());
        EXPECT_EQ(t.edits, t.changes.size());
        EXPECT_EQ(t.edits, dex::levenshtein(dex::split_ws(t.perturbed), dex::split_ws(p.source)));
        for (const auto& s : t.steps) EXPECT_EQ(s.reward, 0.0);
    }
}

TEST(Rollout, RejectionEndsEpisodeWithoutApplyingEdit) {
    const auto& res = fixtures::desk();
    const auto data = desk_train(30);
    auto d = dex::Discriminator::create(data, *res.tokenizer, {}, 1);
    d.params().values[d.params().size() - 1] = -5.0;
    const auto ac = dex::ActorCritic::create(dex::policy_vocabulary(data, res.table), {}, 2);
    const auto dicts = dex::CharDicts::builtin();
    const auto table = res.table.with_unk(true);
    const dex::RolloutContext ctx{&d, res.tokenizer.get(), &table, &dicts, nullptr};
    dex::Rng rng(4);
    std::size_t rejected = 0;
    for (const auto& p : data) {
        const auto t = dex::rollout(ac, p, ctx, dex::SelectMode::Sample, rng);
        if (t.survived) continue;
        ++rejected;
        EXPECT_EQ(t.perturbed, p.source);
        EXPECT_EQ(t.steps.back().reward, -1.0);
        EXPECT_EQ(t.returns.front(), -1.0);
    }
    EXPECT_GT(rejected, 0u);
}

TEST(Returns, SuffixSumPlusEpisodic) {
    dex::Trajectory t;
    t.steps.resize(3);
    t.steps[0].reward = 0.5;
    t.steps[1].reward = 0.25;
    t.steps[2].reward = 1.0;
    t.episodic_reward = 10.0;
    dex::compute_returns(t);
    EXPECT_EQ(t.returns, (std::vector<double>{11.75, 11.25, 11.0}));
}

TEST(Training, TinyRunIsDeterministicAndCheckpoints) {
    const auto& res = fixtures::desk();
    auto target = std::make_shared<dex::LexiconTransducer>(res.world.lexicon, res.tokenizer, 1);
    const dex::AdversaryResources ar{desk_train(200), res.tokenizer, res.table.with_unk(true), dex::CharDicts::builtin(),
                                     target};
    dex::TrainConfig cfg;
    cfg.alternations = 1;
    cfg.n_a = 2;
    cfg.batch_size = 8;
    const auto a = dex::train_adversary(cfg, ar);
    const auto b = dex::train_adversary(cfg, ar);
    EXPECT_EQ(a.policy.params().values, b.policy.params().values);
    EXPECT_EQ(a.rounds.size(), 2u);

    const auto path = std::filesystem::temp_directory_path() / "dex_policy_test.json";
    a.policy.save(path, dex::config_hash(cfg));
    const auto back = dex::ActorCritic::load(path);
    EXPECT_EQ(back.params().values, a.policy.params().values);
    std::filesystem::remove(path);

    dex::TrainConfig other = cfg;
    other.seed = 2;
    EXPECT_NE(dex::config_hash(cfg), dex::config_hash(other));
}
