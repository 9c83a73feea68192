#include "dex/desk.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "dex/rng.hpp"
#include "dex/text.hpp"

namespace dex {

namespace {

const std::vector<std::string> kSrcOnset = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "sh", "tr"};
const std::vector<std::string> kSrcVowel = {"a", "e", "i", "o", "u"};
const std::vector<std::string> kSrcCoda = {"", "", "", "n", "r", "s", "l"};
const std::vector<std::string> kTgtOnset = {"b", "d", "f", "g", "h", "k", "l", "m", "n", "r", "s", "t", "w", "sch", "pf"};
const std::vector<std::string> kTgtVowel = {"a", "e", "i", "o", "u", "ä", "ö", "ü", "ei", "au"};
const std::vector<std::string> kTgtUmlaut = {"ä", "ö", "ü"};

std::string pick(const std::vector<std::string>& v, Rng& rng) { return v[rng.below(v.size())]; }

std::string source_word(Rng& rng) {
    const std::size_t syllables = 2 + rng.below(3);
    std::string w;
    for (std::size_t i = 0; i < syllables; ++i) w += pick(kSrcOnset, rng) + pick(kSrcVowel, rng);
    return w + pick(kSrcCoda, rng);
}

std::string target_word(Rng& rng) {
    const std::size_t syllables = 2 + rng.below(2);
    const std::size_t umlaut_at = rng.below(syllables);
    std::string w;
    for (std::size_t i = 0; i < syllables; ++i) {
        w += pick(kTgtOnset, rng) + (i == umlaut_at ? pick(kTgtUmlaut, rng) : pick(kTgtVowel, rng));
    }
    return w;
}

struct Concept {
    std::size_t field = 0;
    std::vector<std::string> synonyms;
    std::string target;
    std::string tag;
};

std::string unique_word(std::set<std::string>& used, Rng& rng, std::string (*make)(Rng&)) {
    for (;;) {
        auto w = make(rng);
        if (used.insert(w).second) return w;
    }
}

} // namespace

DeskWorld generate_desk(const DeskConfig& cfg) {
    if (cfg.concepts == 0 || cfg.fields == 0) throw std::invalid_argument("desk needs concepts and fields");
    if (cfg.min_length == 0 || cfg.max_length < cfg.min_length) throw std::invalid_argument("bad sentence lengths");
    if (cfg.train_pairs + cfg.test_pairs > cfg.corpus_sentences) {
        throw std::invalid_argument("corpus smaller than train + test");
    }
    Rng rng(cfg.seed, "desk-words");
    std::set<std::string> used;
    std::vector<Concept> concepts(cfg.concepts);
    for (std::size_t c = 0; c < cfg.concepts; ++c) {
        auto& con = concepts[c];
        con.field = c % cfg.fields;
        const std::size_t n = 1 + (rng.bernoulli(0.5) ? 1 : 0) + (rng.bernoulli(0.2) ? 1 : 0);
        for (std::size_t i = 0; i < n; ++i) con.synonyms.push_back(unique_word(used, rng, source_word));
        con.target = unique_word(used, rng, target_word);
        const double u = rng.uniform();
        con.tag = u < 0.45 ? "NN" : u < 0.70 ? "VV" : u < 0.85 ? "JJ" : "AD";
    }

    DeskWorld world;
    Rng lex_rng(cfg.seed, "desk-lexicon");
    for (const auto& con : concepts) {
        world.lexicon[con.synonyms[0]] = con.target;
        for (std::size_t i = 1; i < con.synonyms.size(); ++i) {
            if (lex_rng.bernoulli(cfg.secondary_coverage)) world.lexicon[con.synonyms[i]] = con.target;
        }
    }

    // Zipfian concept frequencies over a random rank order
    Rng sent_rng(cfg.seed, "desk-sentences");
    std::vector<std::size_t> rank(cfg.concepts);
    for (std::size_t i = 0; i < rank.size(); ++i) rank[i] = i;
    sent_rng.shuffle(rank.begin(), rank.end());
    std::vector<double> cumulative(cfg.concepts);
    double total = 0.0;
    for (std::size_t r = 0; r < cfg.concepts; ++r) {
        total += 1.0 / std::pow(static_cast<double>(r + 1), cfg.zipf_exponent);
        cumulative[r] = total;
    }
    auto draw_concept = [&] {
        const double u = sent_rng.uniform() * total;
        const auto r = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) -
                                                cumulative.begin());
        return rank[std::min(r, cfg.concepts - 1)];
    };

    std::vector<ParallelPair> pairs;
    std::vector<std::string> tags;
    for (std::size_t s = 0; s < cfg.corpus_sentences; ++s) {
        const std::size_t len = cfg.min_length + sent_rng.below(cfg.max_length - cfg.min_length + 1);
        std::vector<std::string> src, tgt, pos;
        for (std::size_t i = 0; i < len; ++i) {
            const auto& con = concepts[draw_concept()];
            std::size_t syn = 0;
            if (con.synonyms.size() > 1 && !sent_rng.bernoulli(cfg.primary_rate)) {
                syn = 1 + sent_rng.below(con.synonyms.size() - 1);
            }
            src.push_back(con.synonyms[syn]);
            tgt.push_back(con.target);
            pos.push_back(con.synonyms[syn] + "/" + con.tag);
        }
        pairs.push_back({join(src), join(tgt)});
        tags.push_back(join(pos));
    }
    for (std::size_t s = 0; s < pairs.size(); ++s) {
        world.corpus.push_back(pairs[s].source);
        if (s < cfg.train_pairs) {
            world.train.push_back(pairs[s]);
        } else if (s < cfg.train_pairs + cfg.test_pairs) {
            world.test.push_back(pairs[s]);
            world.test_pos.push_back(tags[s]);
        }
    }

    Rng emb_rng(cfg.seed, "desk-embeddings");
    const std::size_t d = cfg.embedding_dim;
    std::vector<std::vector<double>> field_vecs(cfg.fields, std::vector<double>(d));
    for (auto& v : field_vecs) {
        for (double& x : v) x = emb_rng.normal();
    }
    std::vector<std::string> tokens;
    std::vector<double> values;
    for (const auto& con : concepts) {
        std::vector<double> cv(d);
        for (double& x : cv) x = emb_rng.normal();
        for (const auto& w : con.synonyms) {
            tokens.push_back(w);
            for (std::size_t k = 0; k < d; ++k) {
                values.push_back(cfg.field_weight * field_vecs[con.field][k] + cfg.concept_weight * cv[k] +
                                 cfg.noise_weight * emb_rng.normal());
            }
        }
    }
    world.embeddings = EmbeddingTable(std::move(tokens), std::move(values), d);
    return world;
}

void write_parallel(std::span<const ParallelPair> pairs, const std::filesystem::path& src,
                    const std::filesystem::path& tgt) {
    std::vector<std::string> s, t;
    for (const auto& p : pairs) {
        s.push_back(p.source);
        t.push_back(p.target);
    }
    write_lines(src, s);
    write_lines(tgt, t);
}

std::vector<ParallelPair> read_parallel(const std::filesystem::path& src, const std::filesystem::path& tgt) {
    const auto s = read_lines(src);
    const auto t = read_lines(tgt);
    if (s.size() != t.size()) {
        throw std::runtime_error(src.string() + " and " + tgt.string() + " differ in line count (" +
                                 std::to_string(s.size()) + " vs " + std::to_string(t.size()) + ")");
    }
    std::vector<ParallelPair> out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) out.push_back({s[i], t[i]});
    return out;
}

void write_desk(const DeskWorld& world, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_lines(dir / "corpus.txt", world.corpus);
    write_parallel(world.train, dir / "train.src", dir / "train.tgt");
    write_parallel(world.test, dir / "test.src", dir / "test.tgt");
    write_lines(dir / "test.pos", world.test_pos);
    std::vector<std::string> lex;
    for (const auto& [s, t] : world.lexicon) lex.push_back(s + "\t" + t);
    write_lines(dir / "lexicon.tsv", lex);
    world.embeddings.save_text(dir / "embeddings.vec");
}

DeskResources build_desk_resources(const DeskConfig& cfg, std::size_t num_merges, std::size_t vocab_limit,
                                   const CandidateOptions& opts) {
    DeskResources res;
    res.world = generate_desk(cfg);
    auto merges = learn_bpe(res.world.corpus, num_merges);
    auto vocab = build_vocabulary(res.world.corpus, merges, vocab_limit);
    res.tokenizer = std::make_shared<const Tokenizer>(std::move(merges), std::move(vocab));
    res.table = build_substitution_table(res.world.embeddings, count_tokens(res.world.corpus), opts);
    return res;
}

TrainConfig desk_train_config() {
    TrainConfig cfg;
    cfg.alternations = 16;
    cfg.n_a = 150;
    cfg.update.entropy_weight = 0.003;
    cfg.env.rho_bar = 0.9;
    cfg.env.n_e = 10;
    return cfg;
}

} // namespace dex
