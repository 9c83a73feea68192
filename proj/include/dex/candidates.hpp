#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace dex {

using FrequencyMap = std::unordered_map<std::string, std::uint64_t>;

/// Token counts over whitespace-tokenized lines.
FrequencyMap count_tokens(std::span<const std::string> corpus);

/// Dense token embeddings, row-major.
class EmbeddingTable {
public:
    EmbeddingTable() = default;
    EmbeddingTable(std::vector<std::string> tokens, std::vector<double> values, std::size_t dim);

    std::size_t size() const { return tokens_.size(); }
    std::size_t dim() const { return dim_; }
    const std::string& token(std::size_t i) const { return tokens_[i]; }
    const std::vector<std::string>& tokens() const { return tokens_; }
    std::optional<std::size_t> index(std::string_view token) const;
    std::span<const double> row(std::size_t i) const { return {values_.data() + i * dim_, dim_}; }

    /// word2vec text format: header "count dim", then "token v1 ... vdim" per line.
    static EmbeddingTable load_text(const std::filesystem::path& path);
    void save_text(const std::filesystem::path& path) const;

    /// Deterministic vectors built from hashed character trigrams (with word boundary
    /// markers). Tokens sharing spelling share direction.
    static EmbeddingTable from_char_ngrams(std::vector<std::string> tokens, std::size_t dim, std::uint64_t seed);

private:
    std::vector<std::string> tokens_;
    std::vector<double> values_;
    std::size_t dim_ = 0;
    std::unordered_map<std::string, std::size_t> index_;
};

double cosine_similarity(std::span<const double> a, std::span<const double> b);

enum class RadiusMode {
    /// One radius: mean similarity to the k-th neighbour over the most frequent tokens.
    Global,
    /// Each token's radius is the mean similarity of its own k neighbours.
    PerToken,
    /// Caller-provided radius.
    Fixed,
};

struct CandidateOptions {
    std::size_t k = 10;
    bool unk_enabled = true;
    RadiusMode mode = RadiusMode::Global;
    double fixed_epsilon = 0.0;
    /// Number of most frequent tokens whose k-th neighbour similarities define the global radius.
    std::size_t radius_top_n = 500;
};

struct Candidate {
    std::string token;
    double similarity = 0.0;

    friend bool operator==(const Candidate&, const Candidate&) = default;
};

/// Name of the universal UNK action in exported tables.
inline constexpr std::string_view kUnkAction = "<unk>";

class SubstitutionTable {
public:
    SubstitutionTable() = default;
    SubstitutionTable(std::map<std::string, std::vector<Candidate>> candidates, double epsilon, std::size_t k,
                      bool unk_enabled);

    /// Substitution candidates of `token`, similarity descending. Never includes the UNK action.
    std::span<const Candidate> candidates(std::string_view token) const;
    bool unk_enabled() const { return unk_enabled_; }
    double epsilon() const { return epsilon_; }
    std::size_t k() const { return k_; }
    const std::map<std::string, std::vector<Candidate>, std::less<>>& entries() const { return *table_; }

    /// Copy of this table with the UNK action switched on or off; entries are shared.
    SubstitutionTable with_unk(bool enabled) const;

    /// "token<TAB>cand1,cand2,..." lines; the UNK action is appended when enabled.
    /// A leading "#" line records epsilon, k and the UNK flag.
    void save(const std::filesystem::path& path) const;
    static SubstitutionTable load(const std::filesystem::path& path);

private:
    std::shared_ptr<const std::map<std::string, std::vector<Candidate>, std::less<>>> table_ =
        std::make_shared<const std::map<std::string, std::vector<Candidate>, std::less<>>>();
    double epsilon_ = 0.0;
    std::size_t k_ = 0;
    bool unk_enabled_ = false;
};

/// Builds candidate lists from exact k-nearest-neighbour search by cosine similarity.
/// Candidates must lie within the vicinity radius and have positive similarity.
/// Throws std::invalid_argument when k >= vocabulary size ("k too large") or k == 0.
SubstitutionTable build_substitution_table(const EmbeddingTable& emb, const FrequencyMap& freq,
                                           const CandidateOptions& opts);

struct FertilityResult {
    double value = 0.0;
    std::size_t tokens_counted = 0;
    /// Set when fewer than top_n tokens were available.
    bool truncated = false;
};

/// Mean candidate-list length (UNK excluded) over the top_n most frequent tokens of the table.
FertilityResult candidate_fertility(const SubstitutionTable& table, const FrequencyMap& freq, std::size_t top_n = 500);

/// Tokens ordered by descending frequency, ties by token text.
std::vector<std::string> most_frequent(std::span<const std::string> tokens, const FrequencyMap& freq,
                                       std::size_t top_n);

} // namespace dex
