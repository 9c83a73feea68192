#include "dex/candidates.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "dex/rng.hpp"
#include "dex/text.hpp"

namespace dex {

FrequencyMap count_tokens(std::span<const std::string> corpus) {
    FrequencyMap freq;
    for (const auto& line : corpus) {
        for (auto& w : split_ws(line)) ++freq[std::move(w)];
    }
    return freq;
}

EmbeddingTable::EmbeddingTable(std::vector<std::string> tokens, std::vector<double> values, std::size_t dim)
    : tokens_(std::move(tokens)), values_(std::move(values)), dim_(dim) {
    if (dim_ == 0) throw std::invalid_argument("embedding dim must be positive");
    if (values_.size() != tokens_.size() * dim_) throw std::invalid_argument("embedding value count mismatch");
    for (double v : values_) {
        if (!std::isfinite(v)) throw std::invalid_argument("embedding values must be finite");
    }
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        if (!index_.emplace(tokens_[i], i).second) throw std::invalid_argument("duplicate embedding token " + tokens_[i]);
    }
}

std::optional<std::size_t> EmbeddingTable::index(std::string_view token) const {
    auto it = index_.find(std::string(token));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

EmbeddingTable EmbeddingTable::load_text(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::size_t count = 0, dim = 0;
    if (!(in >> count >> dim)) throw std::runtime_error(path.string() + ":1: expected header \"count dim\"");
    std::vector<std::string> tokens;
    std::vector<double> values;
    tokens.reserve(count);
    values.reserve(count * dim);
    for (std::size_t i = 0; i < count; ++i) {
        std::string tok;
        if (!(in >> tok)) throw std::runtime_error(path.string() + ":" + std::to_string(i + 2) + ": missing row");
        tokens.push_back(tok);
        for (std::size_t j = 0; j < dim; ++j) {
            double v;
            if (!(in >> v)) throw std::runtime_error(path.string() + ":" + std::to_string(i + 2) + ": short row");
            values.push_back(v);
        }
    }
    return EmbeddingTable(std::move(tokens), std::move(values), dim);
}

void EmbeddingTable::save_text(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << size() << ' ' << dim_ << '\n' << std::setprecision(17);
    for (std::size_t i = 0; i < size(); ++i) {
        out << tokens_[i];
        for (double v : row(i)) out << ' ' << v;
        out << '\n';
    }
}

EmbeddingTable EmbeddingTable::from_char_ngrams(std::vector<std::string> tokens, std::size_t dim, std::uint64_t seed) {
    std::vector<double> values(tokens.size() * dim, 0.0);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        std::u32string padded = U"<" + decode_utf8(tokens[i]) + U">";
        double* v = values.data() + i * dim;
        for (std::size_t s = 0; s + 3 <= padded.size(); ++s) {
            Rng rng(splitmix64(seed ^ fnv1a(encode_utf8(padded.substr(s, 3)))));
            for (std::size_t j = 0; j < dim; ++j) v[j] += rng.normal();
        }
        double norm = 0;
        for (std::size_t j = 0; j < dim; ++j) norm += v[j] * v[j];
        norm = std::sqrt(norm);
        if (norm > 0) {
            for (std::size_t j = 0; j < dim; ++j) v[j] /= norm;
        }
    }
    return EmbeddingTable(std::move(tokens), std::move(values), dim);
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0 || nb == 0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

SubstitutionTable::SubstitutionTable(std::map<std::string, std::vector<Candidate>> candidates, double epsilon,
                                     std::size_t k, bool unk_enabled)
    : table_(std::make_shared<const std::map<std::string, std::vector<Candidate>, std::less<>>>(
          std::make_move_iterator(candidates.begin()), std::make_move_iterator(candidates.end()))),
      epsilon_(epsilon), k_(k), unk_enabled_(unk_enabled) {}

std::span<const Candidate> SubstitutionTable::candidates(std::string_view token) const {
    auto it = table_->find(token);
    if (it == table_->end()) return {};
    return it->second;
}

SubstitutionTable SubstitutionTable::with_unk(bool enabled) const {
    SubstitutionTable copy = *this;
    copy.unk_enabled_ = enabled;
    return copy;
}

void SubstitutionTable::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << std::setprecision(17) << "# epsilon=" << epsilon_ << " k=" << k_ << " unk=" << (unk_enabled_ ? 1 : 0) << '\n';
    for (const auto& [token, cands] : *table_) {
        out << token << '\t';
        bool first = true;
        for (const auto& c : cands) {
            out << (first ? "" : ",") << c.token;
            first = false;
        }
        if (unk_enabled_) out << (first ? "" : ",") << kUnkAction;
        out << '\n';
    }
}

SubstitutionTable SubstitutionTable::load(const std::filesystem::path& path) {
    std::map<std::string, std::vector<Candidate>> table;
    double epsilon = 0;
    std::size_t k = 0;
    bool unk = false;
    std::size_t lineno = 0;
    for (const auto& line : read_lines(path)) {
        ++lineno;
        if (line.empty()) continue;
        if (line.front() == '#') {
            std::istringstream ss(line.substr(1));
            std::string field;
            while (ss >> field) {
                const auto eq = field.find('=');
                if (eq == std::string::npos) continue;
                const auto key = field.substr(0, eq);
                const auto val = field.substr(eq + 1);
                if (key == "epsilon") epsilon = std::stod(val);
                else if (key == "k") k = std::stoul(val);
                else if (key == "unk") unk = val == "1";
            }
            continue;
        }
        const auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected token<TAB>candidates");
        }
        auto& cands = table[line.substr(0, tab)];
        for (auto& c : split(std::string_view(line).substr(tab + 1), ',')) {
            if (c.empty()) continue;
            if (c == kUnkAction) {
                unk = true;
                continue;
            }
            cands.push_back({std::move(c), 0.0});
        }
    }
    return SubstitutionTable(std::move(table), epsilon, k, unk);
}

std::vector<std::string> most_frequent(std::span<const std::string> tokens, const FrequencyMap& freq,
                                       std::size_t top_n) {
    auto count_of = [&](const std::string& t) -> std::uint64_t {
        auto it = freq.find(t);
        return it == freq.end() ? 0 : it->second;
    };
    std::vector<std::string> sorted(tokens.begin(), tokens.end());
    std::sort(sorted.begin(), sorted.end(), [&](const std::string& a, const std::string& b) {
        const auto ca = count_of(a), cb = count_of(b);
        return ca != cb ? ca > cb : a < b;
    });
    if (sorted.size() > top_n) sorted.resize(top_n);
    return sorted;
}

SubstitutionTable build_substitution_table(const EmbeddingTable& emb, const FrequencyMap& freq,
                                           const CandidateOptions& opts) {
    const std::size_t n = emb.size();
    if (n == 0) throw std::invalid_argument("empty embedding table");
    if (opts.k == 0) throw std::invalid_argument("k must be at least 1");
    if (opts.k >= n) throw std::invalid_argument("k too large");

    const std::size_t dim = emb.dim();
    std::vector<double> unit(n * dim);
    for (std::size_t i = 0; i < n; ++i) {
        auto r = emb.row(i);
        double norm = 0;
        for (double v : r) norm += v * v;
        norm = std::sqrt(norm);
        for (std::size_t j = 0; j < dim; ++j) unit[i * dim + j] = norm > 0 ? r[j] / norm : 0.0;
    }

    // Exact k-NN per token: similarity descending, ties by token text.
    std::vector<std::vector<Candidate>> knn(n);
    std::vector<std::pair<double, std::size_t>> sims(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t m = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            double dot = 0;
            const double* a = &unit[i * dim];
            const double* b = &unit[j * dim];
            for (std::size_t d = 0; d < dim; ++d) dot += a[d] * b[d];
            sims[m++] = {dot, j};
        }
        auto better = [&](const auto& x, const auto& y) {
            return x.first != y.first ? x.first > y.first : emb.token(x.second) < emb.token(y.second);
        };
        std::partial_sort(sims.begin(), sims.begin() + static_cast<std::ptrdiff_t>(opts.k), sims.end(), better);
        knn[i].reserve(opts.k);
        for (std::size_t r = 0; r < opts.k; ++r) knn[i].push_back({emb.token(sims[r].second), sims[r].first});
    }

    double global_eps = opts.fixed_epsilon;
    if (opts.mode == RadiusMode::Global) {
        const auto top = most_frequent(emb.tokens(), freq, opts.radius_top_n);
        double sum = 0;
        for (const auto& t : top) sum += knn[*emb.index(t)].back().similarity;
        global_eps = sum / static_cast<double>(top.size());
    }

    std::map<std::string, std::vector<Candidate>> table;
    for (std::size_t i = 0; i < n; ++i) {
        double eps = global_eps;
        if (opts.mode == RadiusMode::PerToken) {
            double s = 0;
            for (const auto& c : knn[i]) s += c.similarity;
            eps = s / static_cast<double>(knn[i].size());
        }
        auto& out = table[emb.token(i)];
        for (const auto& c : knn[i]) {
            if (c.similarity >= eps && c.similarity > 0.0) out.push_back(c);
        }
    }
    return SubstitutionTable(std::move(table), opts.mode == RadiusMode::PerToken ? 0.0 : global_eps, opts.k,
                             opts.unk_enabled);
}

FertilityResult candidate_fertility(const SubstitutionTable& table, const FrequencyMap& freq, std::size_t top_n) {
    if (top_n == 0) throw std::invalid_argument("top_n must be at least 1");
    std::vector<std::string> tokens;
    tokens.reserve(table.entries().size());
    for (const auto& [t, _] : table.entries()) tokens.push_back(t);
    const auto top = most_frequent(tokens, freq, top_n);
    FertilityResult result;
    result.tokens_counted = top.size();
    result.truncated = top.size() < top_n;
    if (top.empty()) return result;
    double sum = 0;
    for (const auto& t : top) sum += static_cast<double>(table.candidates(t).size());
    result.value = sum / static_cast<double>(top.size());
    return result;
}

} // namespace dex
