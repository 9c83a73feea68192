#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "dex/agent.hpp"
#include "dex/baselines.hpp"
#include "dex/metrics.hpp"

namespace dex {

enum class AttackerId { Rni, Gs, Rl, DexcharRl };

std::string to_string(AttackerId id);
/// Accepts rni, gs, rl, dexchar-rl.
std::optional<AttackerId> parse_attacker(std::string_view name);

struct AttackSetup {
    AttackerId attacker = AttackerId::Rni;
    BaselineConfig baseline;
    std::shared_ptr<const Tokenizer> tokenizer;
    /// Substitution table; the RL attackers use it with UNK on (dexchar-rl) or off (rl).
    SubstitutionTable table;
    CharDicts dicts = CharDicts::builtin();
    TranslatorHandle target;
    /// Trained policy for rl / dexchar-rl.
    std::shared_ptr<const ActorCritic> policy;
    /// Optional semantic gate at inference; perturbations D rejects are not applied.
    std::shared_ptr<const Discriminator> discriminator;
    /// Optional judge for pairing accuracy.
    std::shared_ptr<const Judge> judge;
    /// Quality scorer; BLEU when null.
    std::shared_ptr<const QualityScorer> scorer;
    /// Candidate fertility of the table, reported as is.
    std::optional<double> cf;
    std::uint64_t seed = 1;
    /// Resolved run configuration echoed into the report.
    nlohmann::json config = nlohmann::json::object();
    /// Input files whose content hashes go into the report.
    std::vector<std::filesystem::path> inputs;
};

struct SentenceRecord {
    std::size_t line = 0;
    std::string original;
    std::string perturbed;
    std::string reference;
    std::string clean_translation;
    std::string perturbed_translation;
    std::size_t edits = 0;
    std::vector<WordAlignment> changes;
    std::size_t queries = 0;
    bool truncated = false;
    std::optional<bool> matched;

    nlohmann::json to_json() const;
    static SentenceRecord from_json(const nlohmann::json& j);
};

struct AttackReport {
    std::string attacker;
    double md = 0.0;
    double dpe = 0.0;
    bool no_edits = false;
    double clean_score = 0.0;
    double perturbed_score = 0.0;
    std::optional<double> pa;
    std::size_t pa_judged = 0;
    std::size_t pa_unjudged = 0;
    std::optional<double> cf;
    std::size_t total_edits = 0;
    std::size_t queries = 0;
    std::size_t truncated = 0;
    double wall_clock_seconds = 0.0;
    std::vector<SentenceRecord> records;
    nlohmann::json config = nlohmann::json::object();
    nlohmann::json input_hashes = nlohmann::json::object();

    /// Summary record without timing fields.
    nlohmann::json summary() const;
    /// One line per sentence, then the summary, then a separate timing line.
    void write_jsonl(const std::filesystem::path& path) const;
    static std::vector<SentenceRecord> read_records(const std::filesystem::path& path);
};

/// Single-sentence attack with the configured attacker. Deterministic given the setup seed
/// and `line`.
SentenceRecord attack_sentence(const AttackSetup& setup, const ParallelPair& pair, std::size_t line);

/// Attacks every pair, translates clean and perturbed sources, and fills MD, DPE, PA and CF.
AttackReport run_attack(const AttackSetup& setup, std::span<const ParallelPair> pairs);

struct TagRatio {
    std::size_t perturbed = 0;
    std::size_t total = 0;
    double ratio = 0.0;
};

struct PosAnalysis {
    std::map<std::string, TagRatio> tags;
    std::size_t skipped = 0;
    std::size_t perturbed_tokens = 0;
    std::size_t total_tokens = 0;
    double overall_rate = 0.0;

    nlohmann::json to_json() const;
    std::string table() const;
};

/// Per-tag perturbation ratios. `pos_lines` hold "token/TAG" per original token, indexed
/// by record line; misaligned sentences are skipped and counted.
PosAnalysis analyze_pos(std::span<const SentenceRecord> records, std::span<const std::string> pos_lines);

struct EmitResult {
    std::size_t written = 0;
    std::size_t skipped = 0;
};

/// One "X'<TAB>Y" line per original pair (the original source where no record exists)
/// and an alignment sidecar at `<out>.align.jsonl`. Records whose line is outside the
/// pair list are skipped.
EmitResult emit_finetune_data(std::span<const SentenceRecord> records, std::span<const ParallelPair> pairs,
                              const std::filesystem::path& out);

std::vector<AdversarialPair> load_finetune_data(const std::filesystem::path& path);

struct TimingRow {
    std::string attacker;
    double seconds = 0.0;
    std::size_t sentences = 0;
    std::size_t queries = 0;
};

/// Wall-clock seconds per attacker over the same pairs, after one untimed warm-up sentence.
std::vector<TimingRow> benchmark_overhead(std::span<const AttackSetup> setups, std::span<const ParallelPair> pairs);

} // namespace dex
