#include "dex/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <unordered_map>

#include <json.hpp>

#include "dex/errors.hpp"
#include "dex/rng.hpp"
#include "dex/text.hpp"
#include "http.hpp"

namespace dex {

BleuStats& BleuStats::operator+=(const BleuStats& o) {
    for (std::size_t n = 0; n < 4; ++n) {
        matches[n] += o.matches[n];
        totals[n] += o.totals[n];
    }
    hyp_len += o.hyp_len;
    ref_len += o.ref_len;
    return *this;
}

namespace {

std::unordered_map<std::string, std::uint64_t> ngram_counts(const std::vector<std::string>& toks, std::size_t n) {
    std::unordered_map<std::string, std::uint64_t> counts;
    for (std::size_t i = 0; i + n <= toks.size(); ++i) {
        std::string key;
        for (std::size_t k = 0; k < n; ++k) {
            key += toks[i + k];
            key.push_back('\x1f');
        }
        ++counts[key];
    }
    return counts;
}

} // namespace

BleuStats bleu_stats(std::string_view hypothesis, std::string_view reference) {
    const auto hyp = split_ws(hypothesis);
    const auto ref = split_ws(reference);
    BleuStats s;
    s.hyp_len = hyp.size();
    s.ref_len = ref.size();
    for (std::size_t n = 1; n <= 4; ++n) {
        const auto h = ngram_counts(hyp, n);
        const auto r = ngram_counts(ref, n);
        std::uint64_t match = 0;
        for (const auto& [gram, c] : h) {
            auto it = r.find(gram);
            if (it != r.end()) match += std::min(c, it->second);
        }
        s.matches[n - 1] = match;
        s.totals[n - 1] = hyp.size() >= n ? hyp.size() - n + 1 : 0;
    }
    return s;
}

double bleu_from_stats(const BleuStats& s, bool smooth) {
    if (s.hyp_len == 0 || s.matches[0] == 0) return 0.0;
    double log_sum = 0.0;
    for (std::size_t n = 0; n < 4; ++n) {
        double p;
        if (s.matches[n] == 0) {
            if (!smooth) return 0.0;
            p = 1.0 / static_cast<double>(s.totals[n] + 1);
        } else {
            p = static_cast<double>(s.matches[n]) / static_cast<double>(s.totals[n]);
        }
        log_sum += std::log(p);
    }
    const double bp = s.hyp_len < s.ref_len
                          ? std::exp(1.0 - static_cast<double>(s.ref_len) / static_cast<double>(s.hyp_len))
                          : 1.0;
    return 100.0 * bp * std::exp(log_sum / 4.0);
}

double bleu(std::span<const std::string> hypotheses, std::span<const std::string> references, BleuMode mode) {
    if (hypotheses.size() != references.size()) throw std::invalid_argument("hypothesis/reference count mismatch");
    if (hypotheses.empty()) return 0.0;
    if (mode == BleuMode::Corpus) {
        BleuStats total;
        for (std::size_t i = 0; i < hypotheses.size(); ++i) total += bleu_stats(hypotheses[i], references[i]);
        return bleu_from_stats(total, false);
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < hypotheses.size(); ++i) sum += sentence_bleu(hypotheses[i], references[i]);
    return sum / static_cast<double>(hypotheses.size());
}

double sentence_bleu(std::string_view hypothesis, std::string_view reference) {
    return bleu_from_stats(bleu_stats(hypothesis, reference), true);
}

std::size_t levenshtein(std::span<const std::string> a, std::span<const std::string> b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

std::size_t edit_distance(std::string_view perturbed, std::string_view original, bool allow_shifts) {
    auto hyp = split_ws(perturbed);
    const auto ref = split_ws(original);
    std::size_t dist = levenshtein(hyp, ref);
    if (!allow_shifts) return dist;

    constexpr std::size_t kMaxBlock = 10;
    std::size_t shifts = 0;
    while (dist > 1) {
        std::size_t best = dist;
        std::vector<std::string> best_seq;
        const std::size_t n = hyp.size();
        for (std::size_t start = 0; start < n; ++start) {
            for (std::size_t len = 1; len <= std::min(kMaxBlock, n - start); ++len) {
                std::vector<std::string> rest;
                rest.reserve(n);
                rest.insert(rest.end(), hyp.begin(), hyp.begin() + static_cast<std::ptrdiff_t>(start));
                rest.insert(rest.end(), hyp.begin() + static_cast<std::ptrdiff_t>(start + len), hyp.end());
                for (std::size_t dest = 0; dest <= rest.size(); ++dest) {
                    if (dest == start) continue;
                    std::vector<std::string> moved = rest;
                    moved.insert(moved.begin() + static_cast<std::ptrdiff_t>(dest),
                                 hyp.begin() + static_cast<std::ptrdiff_t>(start),
                                 hyp.begin() + static_cast<std::ptrdiff_t>(start + len));
                    const std::size_t d = levenshtein(moved, ref);
                    if (d + 1 < best) {
                        best = d + 1;
                        best_seq = std::move(moved);
                    }
                }
            }
        }
        if (best_seq.empty()) break;
        hyp = std::move(best_seq);
        dist = best - 1;
        ++shifts;
    }
    return dist + shifts;
}

double BleuScorer::score(std::span<const std::string> hypotheses, std::span<const std::string> references) const {
    return bleu(hypotheses, references, BleuMode::Corpus);
}

double HttpScorer::score(std::span<const std::string> hypotheses, std::span<const std::string> references) const {
    nlohmann::json body{{"hypotheses", std::vector<std::string>(hypotheses.begin(), hypotheses.end())},
                        {"references", std::vector<std::string>(references.begin(), references.end())}};
    const auto res = detail::post_json(url_, body, {}, attempts_, std::chrono::milliseconds(60000));
    if (!res.is_object() || !res.contains("score") || !res["score"].is_number()) {
        throw ProtocolError("scorer response lacks a numeric \"score\"");
    }
    return res["score"].get<double>();
}

DegradationResult degradation_from_translations(std::span<const DegradationRecord> records,
                                                std::vector<std::string> clean, std::vector<std::string> perturbed,
                                                const QualityScorer& scorer) {
    if (clean.size() != records.size() || perturbed.size() != records.size()) {
        throw std::invalid_argument("translation count mismatch");
    }
    DegradationResult r;
    std::vector<std::string> refs;
    refs.reserve(records.size());
    for (const auto& rec : records) {
        refs.push_back(rec.reference);
        r.edits.push_back(edit_distance(rec.perturbed, rec.original));
        r.total_edits += r.edits.back();
    }
    r.clean_score = scorer.score(clean, refs);
    r.perturbed_score = scorer.score(perturbed, refs);
    r.md = r.clean_score - r.perturbed_score;
    r.no_edits = r.total_edits == 0;
    r.dpe = r.no_edits ? 0.0 : r.md / static_cast<double>(r.total_edits);
    r.clean_translations = std::move(clean);
    r.perturbed_translations = std::move(perturbed);
    return r;
}

DegradationResult degradation_report(const Translator& target, std::span<const DegradationRecord> records,
                                     const QualityScorer& scorer) {
    std::vector<std::string> clean, perturbed;
    clean.reserve(records.size());
    perturbed.reserve(records.size());
    for (const auto& rec : records) {
        clean.push_back(target.translate(rec.original));
        perturbed.push_back(rec.perturbed == rec.original ? clean.back() : target.translate(rec.perturbed));
    }
    return degradation_from_translations(records, std::move(clean), std::move(perturbed), scorer);
}

namespace {

// Optimal string alignment distance over scalar values, with an early-exit bound.
std::size_t osa_distance(const std::u32string& a, const std::u32string& b, std::size_t bound) {
    const std::size_t n = a.size(), m = b.size();
    if ((n > m ? n - m : m - n) > bound) return bound + 1;
    std::vector<std::vector<std::size_t>> d(n + 1, std::vector<std::size_t>(m + 1));
    for (std::size_t i = 0; i <= n; ++i) d[i][0] = i;
    for (std::size_t j = 0; j <= m; ++j) d[0][j] = j;
    for (std::size_t i = 1; i <= n; ++i) {
        std::size_t row_min = SIZE_MAX;
        for (std::size_t j = 1; j <= m; ++j) {
            const std::size_t cost = a[i - 1] == b[j - 1] ? 0 : 1;
            d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + cost});
            if (i > 1 && j > 1 && a[i - 1] == b[j - 2] && a[i - 2] == b[j - 1]) {
                d[i][j] = std::min(d[i][j], d[i - 2][j - 2] + 1);
            }
            row_min = std::min(row_min, d[i][j]);
        }
        if (row_min > bound) return bound + 1;
    }
    return d[n][m];
}

} // namespace

LexicalOracleJudge::LexicalOracleJudge(std::map<std::string, std::string> lexicon, double threshold)
    : lexicon_(std::move(lexicon)), threshold_(threshold) {}

std::optional<std::string> LexicalOracleJudge::project(const std::string& word) const {
    if (auto it = lexicon_.find(word); it != lexicon_.end()) return it->second;
    const auto w = decode_utf8(word);
    const std::size_t bound = std::max<std::size_t>(1, w.size() / 4);
    std::size_t best = bound + 1;
    const std::string* best_target = nullptr;
    for (const auto& [key, target] : lexicon_) {
        const std::size_t d = osa_distance(w, decode_utf8(key), bound);
        if (d < best) {
            best = d;
            best_target = &target;
        }
    }
    if (!best_target) return std::nullopt;
    return *best_target;
}

double LexicalOracleJudge::overlap(std::string_view source, std::string_view annotation) const {
    const auto ann = split_ws(annotation);
    if (ann.empty()) return 0.0;
    std::map<std::string, std::size_t> projected;
    for (const auto& w : split_ws(source)) {
        if (auto p = project(w)) {
            for (const auto& t : split_ws(*p)) ++projected[t];
        }
    }
    std::size_t covered = 0;
    for (const auto& t : ann) {
        auto it = projected.find(t);
        if (it != projected.end() && it->second > 0) {
            --it->second;
            ++covered;
        }
    }
    return static_cast<double>(covered) / static_cast<double>(ann.size());
}

std::optional<Verdict> LexicalOracleJudge::judge(std::string_view source, std::string_view annotation) const {
    return overlap(source, annotation) >= threshold_ ? Verdict::Match : Verdict::Mismatch;
}

ChatJudge::ChatJudge(ChatJudgeConfig config) : config_(std::move(config)) {}

std::string ChatJudge::render_user(std::string_view source, std::string_view annotation) {
    std::string out;
    out.append(source);
    out.push_back(' ');
    out.append(annotation);
    out.append(" are they semantically matched?");
    return out;
}

std::optional<Verdict> ChatJudge::parse_reply(std::string_view content) {
    std::size_t i = 0;
    while (i < content.size() && (std::isspace(static_cast<unsigned char>(content[i])) ||
                                  std::ispunct(static_cast<unsigned char>(content[i])))) {
        ++i;
    }
    auto starts_with_ci = [&](std::string_view word) {
        if (content.size() - i < word.size()) return false;
        for (std::size_t k = 0; k < word.size(); ++k) {
            if (std::tolower(static_cast<unsigned char>(content[i + k])) != word[k]) return false;
        }
        const std::size_t end = i + word.size();
        return end == content.size() || !std::isalpha(static_cast<unsigned char>(content[end]));
    };
    if (starts_with_ci("yes")) return Verdict::Match;
    if (starts_with_ci("no")) return Verdict::Mismatch;
    return std::nullopt;
}

std::optional<Verdict> ChatJudge::judge(std::string_view source, std::string_view annotation) const {
    nlohmann::json body{
        {"model", config_.model},
        {"temperature", 0},
        {"messages",
         nlohmann::json::array({{{"role", "system"}, {"content", kSystemPrompt}},
                                {{"role", "user"}, {"content", render_user(source, annotation)}}})},
    };
    std::vector<std::pair<std::string, std::string>> headers;
    if (const char* token = std::getenv(config_.token_env.c_str()); token && *token) {
        headers.emplace_back("Authorization", std::string("Bearer ") + token);
    }
    try {
        const auto res = detail::post_json(config_.url, body, headers, config_.attempts, config_.timeout);
        const auto& content = res.at("choices").at(0).at("message").at("content");
        if (!content.is_string()) return std::nullopt;
        return parse_reply(content.get<std::string>());
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

PairingResult pairing_accuracy(const Judge& judge, std::span<const std::pair<std::string, std::string>> pairs) {
    if (pairs.empty()) throw std::invalid_argument("nothing to judge");
    PairingResult r;
    for (const auto& [source, annotation] : pairs) {
        const auto v = judge.judge(source, annotation);
        if (!v) {
            ++r.unjudged;
            continue;
        }
        ++r.judged;
        if (*v == Verdict::Match) ++r.matched;
    }
    r.pa = r.judged == 0 ? 0.0 : static_cast<double>(r.matched) / static_cast<double>(r.judged);
    return r;
}

Interval bootstrap_md_interval(std::span<const BleuStats> clean, std::span<const BleuStats> perturbed,
                               std::size_t resamples, std::uint64_t seed, double confidence) {
    if (clean.size() != perturbed.size() || clean.empty()) throw std::invalid_argument("bootstrap needs paired segments");
    if (resamples == 0) throw std::invalid_argument("bootstrap needs at least one resample");
    Rng rng(seed, "bootstrap");
    std::vector<double> mds;
    mds.reserve(resamples);
    const std::size_t n = clean.size();
    for (std::size_t r = 0; r < resamples; ++r) {
        BleuStats c, p;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t k = rng.below(n);
            c += clean[k];
            p += perturbed[k];
        }
        mds.push_back(bleu_from_stats(c, false) - bleu_from_stats(p, false));
    }
    std::sort(mds.begin(), mds.end());
    const double alpha = (1.0 - confidence) / 2.0;
    auto at = [&](double q) {
        const auto idx = static_cast<std::size_t>(std::floor(q * static_cast<double>(resamples - 1) + 0.5));
        return mds[std::min(idx, resamples - 1)];
    };
    return {at(alpha), at(1.0 - alpha)};
}

} // namespace dex
