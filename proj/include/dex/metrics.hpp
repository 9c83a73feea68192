#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dex/target.hpp"

namespace dex {

// ---------------------------------------------------------------------------
// BLEU

/// Additive n-gram sufficient statistics (n = 1..4) for one or more segments.
struct BleuStats {
    std::array<std::uint64_t, 4> matches{};
    std::array<std::uint64_t, 4> totals{};
    std::uint64_t hyp_len = 0;
    std::uint64_t ref_len = 0;

    BleuStats& operator+=(const BleuStats& o);
    friend BleuStats operator+(BleuStats a, const BleuStats& b) { return a += b; }
    friend bool operator==(const BleuStats&, const BleuStats&) = default;
};

BleuStats bleu_stats(std::string_view hypothesis, std::string_view reference);

/// BLEU in [0, 100]. With `smooth`, an n >= 2 order without matches uses 1 / (total + 1)
/// as its precision; the unigram precision is never smoothed.
double bleu_from_stats(const BleuStats& stats, bool smooth);

enum class BleuMode { Corpus, Sentence };

/// Corpus mode pools statistics; sentence mode scores each pair (smoothed) and averages.
/// Throws std::invalid_argument on a length mismatch.
double bleu(std::span<const std::string> hypotheses, std::span<const std::string> references, BleuMode mode);

double sentence_bleu(std::string_view hypothesis, std::string_view reference);

// ---------------------------------------------------------------------------
// Edit distance

std::size_t levenshtein(std::span<const std::string> a, std::span<const std::string> b);

/// Token-level edits turning `original` into `perturbed`. Without shifts this is plain
/// Levenshtein; with shifts a contiguous block move costs one edit (TER-style greedy search).
std::size_t edit_distance(std::string_view perturbed, std::string_view original, bool allow_shifts = false);

// ---------------------------------------------------------------------------
// Quality scorers

/// Corpus-level translation quality; higher is better.
class QualityScorer {
public:
    virtual ~QualityScorer() = default;
    virtual double score(std::span<const std::string> hypotheses, std::span<const std::string> references) const = 0;
    virtual std::string name() const = 0;
};

class BleuScorer final : public QualityScorer {
public:
    double score(std::span<const std::string> hypotheses, std::span<const std::string> references) const override;
    std::string name() const override { return "bleu"; }
};

/// External scorer service: POST {"hypotheses": [...], "references": [...]} -> {"score": x}.
class HttpScorer final : public QualityScorer {
public:
    explicit HttpScorer(std::string url, int attempts = 3) : url_(std::move(url)), attempts_(attempts) {}
    double score(std::span<const std::string> hypotheses, std::span<const std::string> references) const override;
    std::string name() const override { return "http:" + url_; }

private:
    std::string url_;
    int attempts_;
};

// ---------------------------------------------------------------------------
// Degradation

struct DegradationRecord {
    std::string original;
    std::string perturbed;
    std::string reference;
};

struct DegradationResult {
    double md = 0.0;
    double dpe = 0.0;
    double clean_score = 0.0;
    double perturbed_score = 0.0;
    std::size_t total_edits = 0;
    /// Set when there were no edits; dpe is then reported as 0.
    bool no_edits = false;
    std::vector<std::string> clean_translations;
    std::vector<std::string> perturbed_translations;
    std::vector<std::size_t> edits;
};

/// md = score(clean translations) - score(perturbed translations), raw sign;
/// dpe = md / total token edits.
DegradationResult degradation_report(const Translator& target, std::span<const DegradationRecord> records,
                                     const QualityScorer& scorer);

/// Same arithmetic from already-computed translations.
DegradationResult degradation_from_translations(std::span<const DegradationRecord> records,
                                                std::vector<std::string> clean, std::vector<std::string> perturbed,
                                                const QualityScorer& scorer);

// ---------------------------------------------------------------------------
// Pairing accuracy

enum class Verdict { Match, Mismatch };

class Judge {
public:
    virtual ~Judge() = default;
    /// nullopt means the pair could not be judged (transport or parse failure).
    virtual std::optional<Verdict> judge(std::string_view source, std::string_view annotation) const = 0;
};

/// Ground-truth judge for constructed data: projects source words through a bilingual
/// lexicon and matches when at least `threshold` of the annotation tokens are covered.
/// Source words absent from the lexicon project through the closest lexicon key within
/// a small character edit distance, modelling a reader who sees through typos.
class LexicalOracleJudge final : public Judge {
public:
    explicit LexicalOracleJudge(std::map<std::string, std::string> lexicon, double threshold = 0.5);
    std::optional<Verdict> judge(std::string_view source, std::string_view annotation) const override;
    double overlap(std::string_view source, std::string_view annotation) const;

private:
    std::optional<std::string> project(const std::string& word) const;

    std::map<std::string, std::string> lexicon_;
    double threshold_;
};

struct ChatJudgeConfig {
    std::string url;
    std::string model = "gpt-3.5-turbo";
    /// Environment variable holding the bearer token.
    std::string token_env = "DEX_JUDGE_TOKEN";
    int attempts = 3;
    std::chrono::milliseconds timeout{30000};
};

/// Chat-completion judge with the fixed system/user prompt pair.
class ChatJudge final : public Judge {
public:
    static constexpr std::string_view kSystemPrompt =
        "You are a knowledgable multi-lingual specialist who can tell whether two sentences (might be different "
        "languages) are semantically matched by \"yes\" or \"no\"";

    explicit ChatJudge(ChatJudgeConfig config);

    static std::string render_user(std::string_view source, std::string_view annotation);
    /// Leading yes/no, case-insensitive, ignoring leading whitespace and punctuation.
    static std::optional<Verdict> parse_reply(std::string_view content);

    std::optional<Verdict> judge(std::string_view source, std::string_view annotation) const override;

private:
    ChatJudgeConfig config_;
};

struct PairingResult {
    double pa = 0.0;
    std::size_t judged = 0;
    std::size_t matched = 0;
    std::size_t unjudged = 0;
};

/// Fraction of judged pairs that match; unjudged pairs leave the denominator.
/// Throws std::invalid_argument("nothing to judge") for an empty list.
PairingResult pairing_accuracy(const Judge& judge, std::span<const std::pair<std::string, std::string>> pairs);

// ---------------------------------------------------------------------------
// Resampling

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

/// Percentile bootstrap interval for corpus-BLEU degradation over paired segments.
Interval bootstrap_md_interval(std::span<const BleuStats> clean, std::span<const BleuStats> perturbed,
                               std::size_t resamples, std::uint64_t seed, double confidence = 0.95);

} // namespace dex
