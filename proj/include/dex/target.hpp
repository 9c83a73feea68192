#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dex/tokenizer.hpp"

namespace dex {

/// A system under attack: source text in, target text out.
/// Implementations must be deterministic for a fixed state and input.
class Translator {
public:
    virtual ~Translator() = default;

    virtual std::string translate(std::string_view source) const = 0;

    /// Optional white-box hook: per-token losses of `reference` given `source`.
    /// nullopt when the target does not expose losses.
    virtual std::optional<std::vector<double>> token_losses(std::string_view source,
                                                            std::string_view reference) const {
        (void)source;
        (void)reference;
        return std::nullopt;
    }

    virtual std::string describe() const = 0;
};

using TranslatorHandle = std::shared_ptr<const Translator>;

/// How the lexicon transducer mistranslates words it regards as UNK.
struct DistortionRule {
    /// Repeat the previously emitted target word in place of the dropped one.
    bool duplicate_previous = true;
    /// With at least `rotate_min_unk` UNK words, rotate a window starting at the first UNK position.
    bool rotate_window = true;
    std::size_t rotate_min_unk = 2;
    std::size_t window = 3;
};

/// Word-for-word translator that breaks on UNK words. In-vocabulary words are looked
/// up in the lexicon (or copied when absent); UNK words are dropped per DistortionRule.
class LexiconTransducer final : public Translator {
public:
    struct Alias {
        std::string original;
        double weight = 0.0;
    };

    LexiconTransducer(std::map<std::string, std::string> lexicon, std::shared_ptr<const Tokenizer> tokenizer,
                      std::uint64_t seed, DistortionRule rule = {});

    std::string translate(std::string_view source) const override;
    std::string describe() const override;

    const std::map<std::string, std::string>& lexicon() const { return lexicon_; }
    const std::map<std::string, Alias>& aliases() const { return aliases_; }
    const Tokenizer& tokenizer() const { return *tok_; }
    std::shared_ptr<const Tokenizer> tokenizer_ptr() const { return tok_; }

    /// Copy with an extra alias; the alias applies only where the word is UNK.
    LexiconTransducer with_alias(std::string perturbed, std::string original, double weight) const;

private:
    std::string translate_word(const std::string& word) const;

    std::map<std::string, std::string> lexicon_;
    std::map<std::string, Alias> aliases_;
    std::shared_ptr<const Tokenizer> tok_;
    std::uint64_t seed_;
    DistortionRule rule_;
};

/// Parses "src<TAB>tgt" lines. Errors carry the file name and line number.
std::map<std::string, std::string> load_lexicon(const std::filesystem::path& path);

TranslatorHandle build_toy_translator(const std::filesystem::path& lexicon_file,
                                      std::shared_ptr<const Tokenizer> tokenizer, std::uint64_t seed);

struct AdaptConfig {
    /// Adversarial coefficient; aliases are registered only when lambda > 0.
    double lambda = 0.2;
    /// Used by neural targets only; kept for configuration parity.
    double learning_rate = 1e-6;
};

struct WordAlignment {
    std::size_t position = 0;
    std::string perturbed;
    std::string original;

    friend bool operator==(const WordAlignment&, const WordAlignment&) = default;
};

/// Adversarial training pair (X', Y) with the word alignment of X' back to X.
struct AdversarialPair {
    std::string perturbed_source;
    std::string reference;
    std::vector<WordAlignment> alignment;
};

struct AdaptResult {
    TranslatorHandle handle;
    std::size_t aliases_added = 0;
    /// Alignments that could not be registered (original untranslatable, perturbed form not UNK, ...).
    std::size_t skipped = 0;
};

/// Desk-scale adversarial fine-tuning: perturbed surface forms become aliases of the
/// words they replaced. Clean (UNK-free) inputs translate exactly as before.
/// Throws std::invalid_argument when `handle` is not a LexiconTransducer.
AdaptResult adapt_toy_translator(const TranslatorHandle& handle, std::span<const AdversarialPair> pairs,
                                 const AdaptConfig& config);

/// Client settings for external translation services.
struct ExternalConfig {
    std::string endpoint;
    int attempts = 3;
    int max_in_flight = 4;
    std::chrono::milliseconds timeout{10000};
};

/// Environment variable that overrides the translator endpoint URL.
inline constexpr const char* kTranslatorUrlEnv = "DEX_TRANSLATOR_URL";

/// HTTP POST client: {"source": ...} -> {"translation": ...}; loss hook
/// {"source": ..., "reference": ...} -> {"token_losses": [...]}.
class HttpTranslator final : public Translator {
public:
    explicit HttpTranslator(ExternalConfig config);
    ~HttpTranslator() override;

    std::string translate(std::string_view source) const override;
    std::optional<std::vector<double>> token_losses(std::string_view source, std::string_view reference) const override;
    std::string describe() const override;

private:
    struct Gate;
    ExternalConfig config_;
    std::unique_ptr<Gate> gate_;
};

/// Newline-delimited JSON over the stdin/stdout of a child process (run via /bin/sh -c).
/// Requests are serialized on the pipe; a crashed child is restarted on retry.
class ProcessTranslator final : public Translator {
public:
    explicit ProcessTranslator(std::string command, int attempts = 3);
    ~ProcessTranslator() override;

    ProcessTranslator(const ProcessTranslator&) = delete;
    ProcessTranslator& operator=(const ProcessTranslator&) = delete;

    std::string translate(std::string_view source) const override;
    std::optional<std::vector<double>> token_losses(std::string_view source, std::string_view reference) const override;
    std::string describe() const override;

private:
    std::string exchange(const std::string& request_line) const;
    void start() const;
    void stop() const;

    std::string command_;
    int attempts_;
    mutable std::mutex mu_;
    mutable int pid_ = -1;
    mutable int to_child_ = -1;
    mutable int from_child_ = -1;
    mutable std::string buffer_;
};

/// Builds an external handle from a spec: "http://..." / "https://..." or "process:<command>".
/// The endpoint env var overrides HTTP endpoints.
TranslatorHandle make_external_translator(const std::string& spec, int attempts = 3, int max_in_flight = 4);

} // namespace dex
