#include "dex/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>
#include <tuple>

#include "dex/text.hpp"

namespace dex {

namespace {

using Pair = std::pair<std::string, std::string>;

std::vector<std::string> to_chars(std::string_view word) {
    std::vector<std::string> out;
    for (char32_t cp : decode_utf8(word)) out.push_back(encode_utf8(cp));
    return out;
}

std::string pair_key(std::string_view a, std::string_view b) {
    std::string key;
    key.reserve(a.size() + b.size() + 1);
    key.append(a);
    key.push_back(' ');
    key.append(b);
    return key;
}

std::map<std::string, std::uint64_t> count_words(std::span<const std::string> corpus) {
    std::map<std::string, std::uint64_t> counts;
    for (const auto& line : corpus) {
        for (auto& w : split_ws(line)) ++counts[std::move(w)];
    }
    return counts;
}

// Pair statistics with an ordered index so the best pair is always at begin().
class PairStats {
public:
    void add(const Pair& p, std::int64_t delta, std::size_t word) {
        auto [it, inserted] = counts_.try_emplace(p, 0);
        if (!inserted) order_.erase({-it->second, p});
        it->second += delta;
        if (it->second > 0) {
            order_.insert({-it->second, p});
            if (delta > 0) where_[p].insert(word);
        } else {
            counts_.erase(it);
            where_.erase(p);
        }
    }

    bool empty() const { return order_.empty(); }
    std::int64_t best_count() const { return -std::get<0>(*order_.begin()); }
    const Pair& best() const { return std::get<1>(*order_.begin()); }

    std::vector<std::size_t> words_with(const Pair& p) const {
        auto it = where_.find(p);
        if (it == where_.end()) return {};
        return {it->second.begin(), it->second.end()};
    }

private:
    std::map<Pair, std::int64_t> counts_;
    std::set<std::tuple<std::int64_t, Pair>> order_;
    std::map<Pair, std::set<std::size_t>> where_;
};

std::vector<std::string> merge_pair(const std::vector<std::string>& syms, const Pair& p) {
    std::vector<std::string> out;
    out.reserve(syms.size());
    for (std::size_t i = 0; i < syms.size();) {
        if (i + 1 < syms.size() && syms[i] == p.first && syms[i + 1] == p.second) {
            out.push_back(p.first + p.second);
            i += 2;
        } else {
            out.push_back(syms[i]);
            ++i;
        }
    }
    return out;
}

} // namespace

bool Segmentation::has_oov() const {
    return std::find(oov.begin(), oov.end(), true) != oov.end();
}

Vocabulary::Vocabulary(std::vector<std::pair<std::string, std::uint64_t>> counts, std::size_t size_limit)
    : entries_(std::move(counts)), size_limit_(size_limit) {
    if (size_limit_ == 0) throw std::invalid_argument("vocabulary size limit must be positive");
    std::sort(entries_.begin(), entries_.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    rank_.reserve(entries_.size());
    for (std::size_t i = 0; i < entries_.size(); ++i) rank_.emplace(entries_[i].first, i);
}

bool Vocabulary::contains(std::string_view piece) const {
    auto it = rank_.find(std::string(piece));
    return it != rank_.end() && it->second < size_limit_;
}

std::uint64_t Vocabulary::count(std::string_view piece) const {
    auto it = rank_.find(std::string(piece));
    return it == rank_.end() ? 0 : entries_[it->second].second;
}

Vocabulary Vocabulary::truncated(std::size_t size_limit) const {
    return Vocabulary(entries_, size_limit);
}

MergeTable learn_bpe(std::span<const std::string> corpus, std::size_t num_merges, std::size_t min_frequency,
                     std::string_view marker) {
    if (num_merges == 0) throw std::invalid_argument("num_merges must be at least 1");
    const auto word_counts = count_words(corpus);
    if (word_counts.empty()) throw std::invalid_argument("empty corpus");

    std::vector<std::vector<std::string>> words;
    std::vector<std::int64_t> freq;
    for (const auto& [w, c] : word_counts) {
        words.push_back(to_chars(w));
        freq.push_back(static_cast<std::int64_t>(c));
    }

    PairStats stats;
    auto account = [&](std::size_t idx, std::int64_t sign) {
        const auto& syms = words[idx];
        for (std::size_t i = 0; i + 1 < syms.size(); ++i) stats.add({syms[i], syms[i + 1]}, sign * freq[idx], idx);
    };
    for (std::size_t i = 0; i < words.size(); ++i) account(i, +1);

    MergeTable table;
    table.continuation_marker = std::string(marker);
    const auto min_count = static_cast<std::int64_t>(std::max<std::size_t>(min_frequency, 1));
    while (table.merges.size() < num_merges && !stats.empty() && stats.best_count() >= min_count) {
        const Pair best = stats.best();
        for (std::size_t idx : stats.words_with(best)) {
            account(idx, -1);
            words[idx] = merge_pair(words[idx], best);
            account(idx, +1);
        }
        table.merges.push_back(best);
    }
    return table;
}

Tokenizer::Tokenizer(MergeTable merges, Vocabulary vocab) : merges_(std::move(merges)), vocab_(std::move(vocab)) {
    ranks_.reserve(merges_.merges.size());
    for (std::size_t i = 0; i < merges_.merges.size(); ++i) {
        ranks_.try_emplace(pair_key(merges_.merges[i].first, merges_.merges[i].second), i);
    }
}

std::vector<std::string> Tokenizer::pieces(std::string_view word) const {
    auto syms = to_chars(word);
    while (syms.size() > 1) {
        std::size_t best_rank = SIZE_MAX;
        std::size_t best_pos = 0;
        for (std::size_t i = 0; i + 1 < syms.size(); ++i) {
            auto it = ranks_.find(pair_key(syms[i], syms[i + 1]));
            if (it != ranks_.end() && it->second < best_rank) {
                best_rank = it->second;
                best_pos = i;
            }
        }
        if (best_rank == SIZE_MAX) break;
        const Pair p{syms[best_pos], syms[best_pos + 1]};
        syms = merge_pair(syms, p);
    }
    for (std::size_t i = 0; i + 1 < syms.size(); ++i) syms[i] += merges_.continuation_marker;
    return syms;
}

Segmentation Tokenizer::segment(std::string_view word) const {
    Segmentation seg;
    seg.marker = merges_.continuation_marker;
    seg.word_boundaries.push_back(0);
    seg.pieces = pieces(word);
    for (const auto& p : seg.pieces) seg.oov.push_back(!vocab_.contains(p));
    return seg;
}

Segmentation Tokenizer::segment_line(std::string_view line) const {
    Segmentation seg;
    seg.marker = merges_.continuation_marker;
    for (const auto& word : split_ws(line)) {
        seg.word_boundaries.push_back(seg.pieces.size());
        for (auto& p : pieces(word)) {
            seg.oov.push_back(!vocab_.contains(p));
            seg.pieces.push_back(std::move(p));
        }
    }
    return seg;
}

bool Tokenizer::is_unk(std::string_view word) const {
    for (const auto& p : pieces(word)) {
        if (!vocab_.contains(p)) return true;
    }
    return false;
}

std::string Tokenizer::retokenize(std::string_view line) const {
    return detokenize(segment_line(line));
}

std::string detokenize(std::span<const std::string> pieces, std::string_view marker) {
    std::string out;
    bool continuing = false;
    for (const auto& piece : pieces) {
        if (!out.empty() && !continuing) out.push_back(' ');
        std::string_view p = piece;
        continuing = !marker.empty() && p.size() >= marker.size() && p.substr(p.size() - marker.size()) == marker;
        if (continuing) p.remove_suffix(marker.size());
        out.append(p);
    }
    return out;
}

std::string detokenize(const Segmentation& seg) {
    return detokenize(seg.pieces, seg.marker);
}

Vocabulary build_vocabulary(std::span<const std::string> corpus, const MergeTable& merges, std::size_t size_limit) {
    const auto word_counts = count_words(corpus);
    Tokenizer tok(merges, Vocabulary({}, 1));
    std::map<std::string, std::uint64_t> piece_counts;
    for (const auto& [w, c] : word_counts) {
        for (auto& p : tok.pieces(w)) piece_counts[std::move(p)] += c;
    }
    return Vocabulary({piece_counts.begin(), piece_counts.end()}, size_limit);
}

void save_merges(const std::filesystem::path& path, const MergeTable& merges) {
    std::vector<std::string> lines;
    lines.reserve(merges.merges.size());
    for (const auto& [a, b] : merges.merges) lines.push_back(a + " " + b);
    write_lines(path, lines);
}

MergeTable load_merges(const std::filesystem::path& path, std::string_view marker) {
    MergeTable table;
    table.continuation_marker = std::string(marker);
    std::size_t lineno = 0;
    for (const auto& line : read_lines(path)) {
        ++lineno;
        if (line.empty() || line.starts_with("#version")) continue;
        auto parts = split_ws(line);
        if (parts.size() != 2) {
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected two pieces");
        }
        table.merges.emplace_back(std::move(parts[0]), std::move(parts[1]));
    }
    return table;
}

void save_vocabulary(const std::filesystem::path& path, const Vocabulary& vocab) {
    std::vector<std::string> lines;
    lines.reserve(vocab.entries().size());
    for (const auto& [piece, count] : vocab.entries()) lines.push_back(piece + "\t" + std::to_string(count));
    write_lines(path, lines);
}

Vocabulary load_vocabulary(const std::filesystem::path& path, std::size_t size_limit) {
    std::vector<std::pair<std::string, std::uint64_t>> counts;
    std::size_t lineno = 0;
    for (const auto& line : read_lines(path)) {
        ++lineno;
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected piece<TAB>count");
        }
        try {
            counts.emplace_back(line.substr(0, tab), std::stoull(line.substr(tab + 1)));
        } catch (const std::exception&) {
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": bad count");
        }
    }
    return Vocabulary(std::move(counts), size_limit);
}

} // namespace dex
