#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "dex/candidates.hpp"
#include "dex/dexchar.hpp"
#include "dex/rng.hpp"
#include "dex/target.hpp"
#include "dex/tokenizer.hpp"

namespace dex {

enum class GsObjective { ScoreQuery, LossHook };

struct BaselineConfig {
    double rni_probability = 0.2;
    GsObjective gs_objective = GsObjective::ScoreQuery;
    /// Target queries allowed per sentence; 0 means unlimited.
    std::size_t max_queries = 0;
};

struct PerturbResult {
    std::string sentence;
    std::size_t tokens = 0;
    std::size_t perturbed_tokens = 0;
    std::vector<WordAlignment> changes;
};

/// Random noise injection: each word is perturbed with probability p by one character edit
/// of a uniformly chosen kind at a uniform position (falling back Swap -> Ins -> Sub -> Swap
/// when the kind is undefined there).
PerturbResult rni(std::string_view sentence, const CharDicts& dicts, double p, Rng& rng);

struct GreedyResult {
    std::string sentence;
    std::size_t queries = 0;
    bool truncated = false;
    /// Objective after each accepted edit, starting with the unperturbed value.
    std::vector<double> objective_trace;
    std::vector<WordAlignment> changes;
    GsObjective objective_used = GsObjective::ScoreQuery;
};

/// Left-to-right greedy substitution. At each position every table candidate is tried on
/// the current sentence; the best one is kept iff it strictly improves the objective
/// (first seen wins ties). Score objective: sentence-BLEU drop of the translation against
/// `reference`; loss objective: summed per-token loss from the target's hook (falls back to
/// score queries when the hook is absent). Throws std::invalid_argument when a nonzero
/// budget is below the word count.
GreedyResult greedy_search(std::string_view sentence, std::string_view reference, const SubstitutionTable& table,
                           const Translator& target, const BaselineConfig& cfg = {});

/// Random attacker matched to an edit budget: `edits` distinct positions chosen uniformly
/// among words with a legal action, each replaced by a uniform legal action (table
/// candidates, plus UNK generation when the table enables it).
PerturbResult random_budget_attack(std::string_view sentence, std::size_t edits, const SubstitutionTable& table,
                                   const CharDicts& dicts, const Tokenizer& tok, Rng& rng);

} // namespace dex
