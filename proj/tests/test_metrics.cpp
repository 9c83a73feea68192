#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "dex/metrics.hpp"
#include "dex/rng.hpp"
#include "dex/text.hpp"
#include "oracles.hpp"

TEST(Bleu, IdenticalIsHundred) {
    EXPECT_DOUBLE_EQ(dex::sentence_bleu("the cat sat on the mat", "the cat sat on the mat"), 100.0);
}

TEST(Bleu, DisjointIsZero) {
    EXPECT_DOUBLE_EQ(dex::sentence_bleu("a b c d", "e f g h"), 0.0);
    const std::vector<std::string> h{"a b c d"}, r{"e f g h"};
    EXPECT_DOUBLE_EQ(dex::bleu(h, r, dex::BleuMode::Corpus), 0.0);
}

TEST(Bleu, LengthMismatchThrows) {
    const std::vector<std::string> h{"a"}, r{"a", "b"};
    EXPECT_THROW(dex::bleu(h, r, dex::BleuMode::Corpus), std::invalid_argument);
}

TEST(Bleu, StatsMatchOracleOnRandomFixtures) {
    dex::Rng rng(42);
    for (int i = 0; i < 100; ++i) {
        const auto h = oracles::random_sentence(rng, 1 + rng.below(12), 6);
        const auto r = oracles::random_sentence(rng, 1 + rng.below(12), 6);
        const auto want = oracles::ngram_stats(h, r);
        const auto got = dex::bleu_stats(h, r);
        for (std::size_t n = 0; n < 4; ++n) {
            EXPECT_EQ(got.matches[n], want.matches[n]) << h << " | " << r;
            EXPECT_EQ(got.totals[n], want.totals[n]);
        }
        EXPECT_NEAR(dex::sentence_bleu(h, r), oracles::bleu(want, true), 1e-9);
    }
}

TEST(Bleu, CorpusPoolsStatistics) {
    dex::Rng rng(7);
    std::vector<std::string> hs, rs;
    for (int i = 0; i < 30; ++i) {
        hs.push_back(oracles::random_sentence(rng, 3 + rng.below(10), 5));
        rs.push_back(oracles::random_sentence(rng, 3 + rng.below(10), 5));
    }
    oracles::Stats total;
    double sentence_sum = 0;
    for (std::size_t i = 0; i < hs.size(); ++i) {
        total += oracles::ngram_stats(hs[i], rs[i]);
        sentence_sum += oracles::bleu(oracles::ngram_stats(hs[i], rs[i]), true);
    }
    EXPECT_NEAR(dex::bleu(hs, rs, dex::BleuMode::Corpus), oracles::bleu(total, false), 1e-9);
    EXPECT_NEAR(dex::bleu(hs, rs, dex::BleuMode::Sentence), sentence_sum / 30, 1e-9);
}

TEST(EditDistance, MatchesOracleOnRandomFixtures) {
    dex::Rng rng(3);
    for (int i = 0; i < 100; ++i) {
        const auto a = oracles::random_sentence(rng, rng.below(10), 4);
        const auto b = oracles::random_sentence(rng, rng.below(10), 4);
        EXPECT_EQ(dex::edit_distance(a, b), oracles::levenshtein(dex::split_ws(a), dex::split_ws(b))) << a << " | " << b;
        EXPECT_LE(dex::edit_distance(a, b, true), dex::edit_distance(a, b));
    }
}

TEST(EditDistance, BlockShiftCostsOne) {
    EXPECT_EQ(dex::edit_distance("c d a b", "a b c d"), 4u);
    EXPECT_EQ(dex::edit_distance("c d a b", "a b c d", true), 1u);
    EXPECT_EQ(dex::edit_distance("a b c", "a b c", true), 0u);
    EXPECT_EQ(dex::edit_distance("a x c", "a b c"), 1u);
}

namespace {

class FixedScorer final : public dex::QualityScorer {
public:
    double score(std::span<const std::string> h, std::span<const std::string>) const override {
        return h.empty() ? 0.0 : (h.front() == "clean" ? 40.0 : 25.0);
    }
    std::string name() const override { return "fixed"; }
};

} // namespace

TEST(Degradation, MdAndDpeIdentities) {
    const std::vector<dex::DegradationRecord> recs{{"a b c", "a x c", "r"}, {"d e", "y z", "r"}};
    const auto r = dex::degradation_from_translations(recs, {"clean", "clean"}, {"pert", "pert"}, FixedScorer{});
    EXPECT_DOUBLE_EQ(r.md, 15.0);
    EXPECT_EQ(r.total_edits, 3u);
    EXPECT_DOUBLE_EQ(r.dpe, 5.0);
    EXPECT_FALSE(r.no_edits);

    const auto neg = dex::degradation_from_translations(recs, {"pert", "pert"}, {"clean", "clean"}, FixedScorer{});
    EXPECT_DOUBLE_EQ(neg.md, -15.0);

    const std::vector<dex::DegradationRecord> same{{"a b", "a b", "r"}};
    const auto z = dex::degradation_from_translations(same, {"clean"}, {"pert"}, FixedScorer{});
    EXPECT_TRUE(z.no_edits);
    EXPECT_DOUBLE_EQ(z.dpe, 0.0);
}

TEST(Degradation, BleuScorerMatchesOracle) {
    dex::Rng rng(5);
    std::vector<dex::DegradationRecord> recs;
    std::vector<std::string> clean, pert;
    oracles::Stats cs, ps;
    std::size_t edits = 0;
    for (int i = 0; i < 40; ++i) {
        const auto src = oracles::random_sentence(rng, 6, 8);
        const auto mod = oracles::random_sentence(rng, 6, 8);
        const auto ref = oracles::random_sentence(rng, 6, 5);
        recs.push_back({src, mod, ref});
        clean.push_back(oracles::random_sentence(rng, 6, 5));
        pert.push_back(oracles::random_sentence(rng, 6, 5));
        cs += oracles::ngram_stats(clean.back(), ref);
        ps += oracles::ngram_stats(pert.back(), ref);
        edits += oracles::levenshtein(dex::split_ws(mod), dex::split_ws(src));
    }
    const auto r = dex::degradation_from_translations(recs, clean, pert, dex::BleuScorer{});
    const double md = oracles::bleu(cs, false) - oracles::bleu(ps, false);
    EXPECT_NEAR(r.md, md, 1e-9);
    EXPECT_EQ(r.total_edits, edits);
    EXPECT_NEAR(r.dpe, md / static_cast<double>(edits), 1e-9);
}

namespace {

class ScriptedJudge final : public dex::Judge {
public:
    std::optional<dex::Verdict> judge(std::string_view s, std::string_view) const override {
        if (s == "yes") return dex::Verdict::Match;
        if (s == "no") return dex::Verdict::Mismatch;
        return std::nullopt;
    }
};

} // namespace

TEST(PairingAccuracy, UnjudgedLeavesDenominator) {
    const std::vector<std::pair<std::string, std::string>> pairs{{"yes", ""}, {"no", ""}, {"?", ""}, {"yes", ""}};
    const auto r = dex::pairing_accuracy(ScriptedJudge{}, pairs);
    EXPECT_EQ(r.judged, 3u);
    EXPECT_EQ(r.unjudged, 1u);
    EXPECT_NEAR(r.pa, 2.0 / 3.0, 1e-12);
    EXPECT_THROW(dex::pairing_accuracy(ScriptedJudge{}, {}), std::invalid_argument);
}

TEST(ChatJudge, ParseReply) {
    EXPECT_EQ(dex::ChatJudge::parse_reply("Yes."), dex::Verdict::Match);
    EXPECT_EQ(dex::ChatJudge::parse_reply("  \"no\", they differ"), dex::Verdict::Mismatch);
    EXPECT_EQ(dex::ChatJudge::parse_reply("NO"), dex::Verdict::Mismatch);
    EXPECT_FALSE(dex::ChatJudge::parse_reply("maybe"));
    EXPECT_FALSE(dex::ChatJudge::parse_reply(""));
}

TEST(LexicalOracle, ProjectsThroughLexiconAndTypos) {
    const dex::LexicalOracleJudge j({{"noise", "ruido"}, {"big", "grande"}, {"house", "casa"}}, 0.5);
    EXPECT_EQ(j.judge("big house", "grande casa"), dex::Verdict::Match);
    EXPECT_EQ(j.judge("big hosue", "grande casa"), dex::Verdict::Match);
    EXPECT_EQ(j.judge("noise", "grande casa"), dex::Verdict::Mismatch);
}

TEST(Bootstrap, SingleSegmentCollapses) {
    const std::vector<dex::BleuStats> c{dex::bleu_stats("a b c d e", "a b c d e")};
    const std::vector<dex::BleuStats> p{dex::bleu_stats("a b c d x", "a b c d e")};
    const auto ci = dex::bootstrap_md_interval(c, p, 200, 1);
    const double md = dex::bleu_from_stats(c[0], false) - dex::bleu_from_stats(p[0], false);
    EXPECT_DOUBLE_EQ(ci.lo, md);
    EXPECT_DOUBLE_EQ(ci.hi, md);
}

TEST(Bootstrap, IntervalCoversPointEstimateAndIsSeeded) {
    dex::Rng rng(9);
    std::vector<dex::BleuStats> c, p;
    dex::BleuStats tc, tp;
    for (int i = 0; i < 60; ++i) {
        const auto ref = oracles::random_sentence(rng, 8, 4);
        c.push_back(dex::bleu_stats(ref, ref));
        p.push_back(dex::bleu_stats(oracles::random_sentence(rng, 8, 4), ref));
        tc += c.back();
        tp += p.back();
    }
    const double md = dex::bleu_from_stats(tc, false) - dex::bleu_from_stats(tp, false);
    const auto a = dex::bootstrap_md_interval(c, p, 500, 3);
    const auto b = dex::bootstrap_md_interval(c, p, 500, 3);
    EXPECT_LE(a.lo, md);
    EXPECT_GE(a.hi, md);
    EXPECT_EQ(a.lo, b.lo);
    EXPECT_EQ(a.hi, b.hi);
}
