#include "dex/baselines.hpp"

#include <numeric>
#include <stdexcept>

#include "dex/metrics.hpp"
#include "dex/text.hpp"

namespace dex {

namespace {

constexpr ActKind kKinds[] = {ActKind::Swap, ActKind::Ins, ActKind::Sub};

std::optional<std::string> random_char_edit(const std::string& word, const CharDicts& dicts, Rng& rng) {
    const std::size_t len = char_length(word);
    if (len == 0) return std::nullopt;
    const std::size_t pos = rng.below(len);
    const std::size_t first = rng.below(3);
    for (std::size_t i = 0; i < 3; ++i) {
        const ActKind kind = kKinds[(first + i) % 3];
        const std::size_t variants = variant_count(word, pos, kind, dicts);
        if (variants == 0) continue;
        auto out = act_perturb(word, pos, kind, dicts, variants > 1 ? rng.below(variants) : 0);
        if (out && *out != word) return out;
    }
    return std::nullopt;
}

} // namespace

PerturbResult rni(std::string_view sentence, const CharDicts& dicts, double p, Rng& rng) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("rni probability outside [0,1]");
    auto words = split_ws(sentence);
    PerturbResult out;
    out.tokens = words.size();
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (!rng.bernoulli(p)) continue;
        if (auto edited = random_char_edit(words[i], dicts, rng)) {
            out.changes.push_back({i, *edited, words[i]});
            words[i] = std::move(*edited);
            ++out.perturbed_tokens;
        }
    }
    out.sentence = join(words);
    return out;
}

GreedyResult greedy_search(std::string_view sentence, std::string_view reference, const SubstitutionTable& table,
                           const Translator& target, const BaselineConfig& cfg) {
    auto words = split_ws(sentence);
    if (cfg.max_queries != 0 && cfg.max_queries < words.size()) {
        throw std::invalid_argument("query budget below sentence length");
    }
    GreedyResult out;
    out.objective_used = cfg.gs_objective;
    const std::string ref(reference);

    bool any_candidates = false;
    for (const auto& w : words) any_candidates |= !table.candidates(w).empty();
    if (!any_candidates) {
        out.sentence = join(words);
        return out;
    }

    auto budget_left = [&] { return cfg.max_queries == 0 || out.queries < cfg.max_queries; };
    double base_bleu = 0.0;
    double current = 0.0;
    if (out.objective_used == GsObjective::LossHook) {
        ++out.queries;
        const auto losses = target.token_losses(sentence, ref);
        if (losses) {
            current = std::accumulate(losses->begin(), losses->end(), 0.0);
        } else {
            out.objective_used = GsObjective::ScoreQuery;
        }
    }
    if (out.objective_used == GsObjective::ScoreQuery) {
        ++out.queries;
        base_bleu = sentence_bleu(target.translate(sentence), ref);
    }
    auto objective = [&](const std::string& s) -> double {
        ++out.queries;
        if (out.objective_used == GsObjective::LossHook) {
            const auto losses = target.token_losses(s, ref);
            if (!losses) throw std::runtime_error("loss hook stopped answering");
            return std::accumulate(losses->begin(), losses->end(), 0.0);
        }
        return base_bleu - sentence_bleu(target.translate(s), ref);
    };
    out.objective_trace.push_back(current);

    for (std::size_t i = 0; i < words.size() && !out.truncated; ++i) {
        const std::string original = words[i];
        const auto cands = table.candidates(original);
        double best = current;
        std::optional<std::string> best_word;
        for (const auto& c : cands) {
            if (!budget_left()) {
                out.truncated = true;
                break;
            }
            words[i] = c.token;
            const double v = objective(join(words));
            if (v > best) {
                best = v;
                best_word = c.token;
            }
        }
        words[i] = original;
        if (best_word) {
            words[i] = *best_word;
            current = best;
            out.objective_trace.push_back(current);
            out.changes.push_back({i, *best_word, original});
        }
    }
    out.sentence = join(words);
    return out;
}

PerturbResult random_budget_attack(std::string_view sentence, std::size_t edits, const SubstitutionTable& table,
                                   const CharDicts& dicts, const Tokenizer& tok, Rng& rng) {
    auto words = split_ws(sentence);
    PerturbResult out;
    out.tokens = words.size();
    std::vector<std::size_t> positions;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (!table.candidates(words[i]).empty() || table.unk_enabled()) positions.push_back(i);
    }
    rng.shuffle(positions.begin(), positions.end());
    for (std::size_t i : positions) {
        if (out.perturbed_tokens >= edits) break;
        const auto cands = table.candidates(words[i]);
        const std::size_t options = cands.size() + (table.unk_enabled() ? 1 : 0);
        const std::size_t pick = rng.below(options);
        std::string replacement;
        if (pick < cands.size()) {
            replacement = cands[pick].token;
        } else {
            try {
                replacement = generate_unk(words[i], dicts, tok);
            } catch (const UnkGenerationError&) {
                continue;
            }
        }
        if (replacement == words[i]) continue;
        out.changes.push_back({i, replacement, words[i]});
        words[i] = std::move(replacement);
        ++out.perturbed_tokens;
    }
    out.sentence = join(words);
    return out;
}

} // namespace dex
