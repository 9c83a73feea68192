#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dex/tokenizer.hpp"

namespace dex {

/// Character edit kinds. Deletion is deliberately absent.
enum class ActKind { Swap, Ins, Sub };

std::string_view to_string(ActKind kind);

/// Which dictionary feeds a Sub edit.
enum class SubSource {
    /// Homoglyphs first, then keyboard neighbours.
    Knn,
    /// Homophone forms (whole-word or per-character keys).
    Phone,
};

/// Character-level substitution dictionaries. Keys never list themselves as candidates.
struct CharDicts {
    std::map<char32_t, std::vector<char32_t>> keyboard_vicinity;
    std::map<char32_t, std::vector<char32_t>> homoglyphs;
    /// Keys may be single characters or whole words; values may be multi-character.
    std::map<std::u32string, std::vector<std::u32string>> homophones;

    /// QWERTY neighbours and a curated Latin homoglyph table; no homophones.
    static CharDicts builtin();

    /// Loads "key<TAB>cand1,cand2,..." files. Empty paths leave that dictionary empty.
    static CharDicts load(const std::filesystem::path& keyboard, const std::filesystem::path& homoglyphs,
                          const std::filesystem::path& homophones = {});

    /// Substitution list for one character under `source` (homoglyphs before keyboard for Knn).
    std::vector<std::u32string> char_candidates(char32_t ch, SubSource source) const;

    bool has_homophone(std::u32string_view word) const;
};

void save_char_map(const std::filesystem::path& path, const std::map<char32_t, std::vector<char32_t>>& map);

class UnkGenerationError : public std::runtime_error {
public:
    explicit UnkGenerationError(const std::string& word)
        : std::runtime_error("unk generation failed for \"" + word + "\"") {}
};

/// Number of distinct edits of `kind` at `position` (Sub variants, 1 for Swap/Ins when defined).
std::size_t variant_count(std::string_view word, std::size_t position, ActKind kind, const CharDicts& dicts,
                          SubSource source = SubSource::Knn);

/// Single edit of `word` at `position`. Swap exchanges position and position+1; Ins
/// duplicates the character right after itself; Sub replaces it with candidate `variant`.
/// Returns nullopt when the edit is undefined there (last position for Swap, equal
/// neighbours for Swap, no Sub candidate). Throws std::out_of_range for a bad position.
std::optional<std::string> act_perturb(std::string_view word, std::size_t position, ActKind kind,
                                       const CharDicts& dicts, std::size_t variant = 0,
                                       SubSource source = SubSource::Knn);

/// Scans positions left to right and returns the first single edit of `kind` that the
/// tokenizer regards as UNK. Every trial starts from the original word.
/// For Phone substitutions a whole-word homophone entry is tried before per-character ones.
std::optional<std::string> delta(std::string_view word, ActKind kind, const CharDicts& dicts,
                                 const Tokenizer& tok, SubSource source = SubSource::Knn);

/// Default iteration cap for the insertion stage: 2*|word| + 4.
std::size_t default_unk_iterations(std::string_view word);

/// UNK generation: homophone substitution, then Swap (|w| > 3) or knn Sub, then
/// compounding insertions until the tokenizer regards the word as UNK.
/// Throws UnkGenerationError when the insertion stage exhausts `max_iters`.
std::string generate_unk(std::string_view word, const CharDicts& dicts, const Tokenizer& tok, std::size_t max_iters);
std::string generate_unk(std::string_view word, const CharDicts& dicts, const Tokenizer& tok);

} // namespace dex
