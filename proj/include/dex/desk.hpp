#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "dex/agent.hpp"
#include "dex/candidates.hpp"
#include "dex/environment.hpp"
#include "dex/tokenizer.hpp"

namespace dex {

/// Synthetic pseudo-language world for experiments: concepts grouped into semantic
/// fields, 1-3 source synonyms per concept, one target word per concept.
struct DeskConfig {
    std::size_t concepts = 1200;
    std::size_t fields = 40;
    std::size_t corpus_sentences = 12000;
    std::size_t train_pairs = 2000;
    std::size_t test_pairs = 200;
    std::size_t min_length = 6;
    std::size_t max_length = 14;
    double zipf_exponent = 1.0;
    /// Probability that a secondary synonym has a lexicon entry (primaries always do).
    double secondary_coverage = 0.6;
    /// Probability that a sentence uses a concept's primary synonym.
    double primary_rate = 0.6;
    std::size_t embedding_dim = 32;
    double field_weight = 1.0;
    double concept_weight = 1.2;
    double noise_weight = 0.35;
    std::uint64_t seed = 7;
};

struct DeskWorld {
    /// Monolingual source corpus (includes the sources of train and test pairs).
    std::vector<std::string> corpus;
    std::vector<ParallelPair> train;
    std::vector<ParallelPair> test;
    /// "token/TAG" lines aligned with test sources.
    std::vector<std::string> test_pos;
    std::map<std::string, std::string> lexicon;
    EmbeddingTable embeddings;
};

DeskWorld generate_desk(const DeskConfig& cfg);

/// Writes corpus.txt, train.src/.tgt, test.src/.tgt, test.pos, lexicon.tsv, embeddings.vec.
void write_desk(const DeskWorld& world, const std::filesystem::path& dir);

/// Reads paired files with equal line counts.
std::vector<ParallelPair> read_parallel(const std::filesystem::path& src, const std::filesystem::path& tgt);
void write_parallel(std::span<const ParallelPair> pairs, const std::filesystem::path& src,
                    const std::filesystem::path& tgt);

struct DeskResources {
    DeskWorld world;
    std::shared_ptr<const Tokenizer> tokenizer;
    SubstitutionTable table;
};

/// Desk world plus a tokenizer (BPE over the corpus, 30k-truncated vocabulary) and a
/// substitution table built from the world's embeddings.
DeskResources build_desk_resources(const DeskConfig& cfg, std::size_t num_merges = 20000,
                                   std::size_t vocab_limit = 30000, const CandidateOptions& opts = {});

/// Adversary training settings used for desk experiments: longer schedule and a stricter
/// discriminator threshold than the library defaults.
TrainConfig desk_train_config();

} // namespace dex
