#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace dex {

inline constexpr std::string_view kDefaultMarker = "@@";

/// Ordered BPE merge rules. Index in `merges` is the merge priority (lower wins).
struct MergeTable {
    std::vector<std::pair<std::string, std::string>> merges;
    std::string continuation_marker{kDefaultMarker};

    friend bool operator==(const MergeTable&, const MergeTable&) = default;
};

/// Frequency-ranked piece inventory. Only the `size_limit` most frequent pieces are
/// in-vocabulary; ties in count are ranked by piece text.
class Vocabulary {
public:
    Vocabulary() = default;
    Vocabulary(std::vector<std::pair<std::string, std::uint64_t>> counts, std::size_t size_limit);

    bool contains(std::string_view piece) const;
    std::uint64_t count(std::string_view piece) const;

    std::size_t size_limit() const { return size_limit_; }
    /// Number of pieces that pass the truncation.
    std::size_t in_vocabulary_size() const { return std::min(size_limit_, entries_.size()); }
    /// All counted pieces, count descending.
    const std::vector<std::pair<std::string, std::uint64_t>>& entries() const { return entries_; }

    Vocabulary truncated(std::size_t size_limit) const;

private:
    std::vector<std::pair<std::string, std::uint64_t>> entries_;
    std::unordered_map<std::string, std::size_t> rank_;
    std::size_t size_limit_ = 0;
};

/// Subword pieces of one or more words. `word_boundaries[i]` is the index of the
/// first piece of word i; `oov[j]` flags pieces outside the truncated vocabulary.
struct Segmentation {
    std::vector<std::string> pieces;
    std::vector<std::size_t> word_boundaries;
    std::vector<bool> oov;
    std::string marker{kDefaultMarker};

    std::size_t word_count() const { return word_boundaries.size(); }
    bool has_oov() const;
};

/// Learns merges greedily by pair frequency over whitespace-separated words.
/// Equal-frequency pairs are broken by the lexicographically smallest (left, right).
/// Learning stops early when the best pair occurs fewer than `min_frequency` times.
/// Throws std::invalid_argument on an empty corpus or num_merges == 0.
MergeTable learn_bpe(std::span<const std::string> corpus, std::size_t num_merges,
                     std::size_t min_frequency = 2, std::string_view marker = kDefaultMarker);

/// Merges plus vocabulary: everything needed to segment and to decide UNK status.
class Tokenizer {
public:
    Tokenizer(MergeTable merges, Vocabulary vocab);

    /// Segments a single word. Never fails; unknown characters fall back to single-character pieces.
    Segmentation segment(std::string_view word) const;
    /// Segments a whitespace-tokenized line word by word.
    Segmentation segment_line(std::string_view line) const;

    /// Raw BPE pieces of a word with continuation markers applied.
    std::vector<std::string> pieces(std::string_view word) const;

    /// True iff the word's segmentation has at least one out-of-vocabulary piece.
    bool is_unk(std::string_view word) const;

    /// Rewrites a line through segment + detokenize, as a translation system would see it.
    std::string retokenize(std::string_view line) const;

    const MergeTable& merges() const { return merges_; }
    const Vocabulary& vocabulary() const { return vocab_; }
    const std::string& marker() const { return merges_.continuation_marker; }

private:
    MergeTable merges_;
    Vocabulary vocab_;
    std::unordered_map<std::string, std::size_t> ranks_;
};

/// Strips continuation markers and joins words with single spaces.
std::string detokenize(const Segmentation& seg);
std::string detokenize(std::span<const std::string> pieces, std::string_view marker = kDefaultMarker);

/// Segments every word of the corpus with `merges` and counts the resulting pieces.
Vocabulary build_vocabulary(std::span<const std::string> corpus, const MergeTable& merges,
                            std::size_t size_limit);

void save_merges(const std::filesystem::path& path, const MergeTable& merges);
MergeTable load_merges(const std::filesystem::path& path, std::string_view marker = kDefaultMarker);

void save_vocabulary(const std::filesystem::path& path, const Vocabulary& vocab);
Vocabulary load_vocabulary(const std::filesystem::path& path, std::size_t size_limit);

} // namespace dex
