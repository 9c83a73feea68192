#pragma once

#include <memory>
#include <string>
#include <vector>

#include "dex/desk.hpp"
#include "dex/tokenizer.hpp"

namespace fixtures {

/// Tokenizer whose merges and vocabulary both come from `corpus`.
inline std::shared_ptr<const dex::Tokenizer> tokenizer_from(const std::vector<std::string>& corpus,
                                                            std::size_t num_merges = 1000,
                                                            std::size_t vocab_limit = 30000) {
    auto merges = dex::learn_bpe(corpus, num_merges);
    auto vocab = dex::build_vocabulary(corpus, merges, vocab_limit);
    return std::make_shared<const dex::Tokenizer>(std::move(merges), std::move(vocab));
}

/// Vocabulary holding exactly `pieces`, each counted once.
inline dex::Vocabulary vocab_of(const std::vector<std::string>& pieces) {
    std::vector<std::pair<std::string, std::uint64_t>> counts;
    for (const auto& p : pieces) counts.emplace_back(p, 1);
    return dex::Vocabulary(std::move(counts), pieces.size());
}

/// Default desk world with tokenizer and table, built once per process.
inline const dex::DeskResources& desk() {
    static const dex::DeskResources res = dex::build_desk_resources(dex::DeskConfig{});
    return res;
}

} // namespace fixtures
