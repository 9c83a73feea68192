#include "dex/dexchar.hpp"

#include <algorithm>
#include <fstream>

#include "dex/text.hpp"

namespace dex {

namespace {

struct CharRow {
    char32_t key;
    std::u32string_view cands;
};

constexpr CharRow kQwerty[] = {
    {U'q', U"wa"},    {U'w', U"qeas"},  {U'e', U"wrsd"},   {U'r', U"etdf"},  {U't', U"ryfg"},  {U'y', U"tugh"},
    {U'u', U"yihj"},  {U'i', U"uojk"},  {U'o', U"ipkl"},   {U'p', U"ol"},    {U'a', U"qwsz"},  {U's', U"awedzx"},
    {U'd', U"serfxc"}, {U'f', U"drtgcv"}, {U'g', U"ftyhvb"}, {U'h', U"gyujbn"}, {U'j', U"huiknm"}, {U'k', U"jiolm"},
    {U'l', U"kop"},   {U'z', U"asx"},   {U'x', U"zsdc"},   {U'c', U"xdfv"},  {U'v', U"cfgb"},  {U'b', U"vghn"},
    {U'n', U"bhjm"},  {U'm', U"njk"},
};

// Latin letters and visually near-identical Greek/Cyrillic/IPA code points.
constexpr CharRow kHomoglyphs[] = {
    {U'a', U"аα"}, {U'b', U"ƅ"},        {U'c', U"сϲ"}, {U'd', U"ԁ"},
    {U'e', U"εе"}, {U'g', U"ɡ"},        {U'h', U"һ"},       {U'i', U"іı"},
    {U'j', U"ј"},       {U'k', U"κ"},        {U'l', U"ӏǀ"}, {U'm', U"ｍ"},
    {U'n', U"ո"},       {U'o', U"оο"},  {U'p', U"рρ"}, {U'q', U"ԛ"},
    {U'r', U"г"},       {U's', U"ѕ"},        {U't', U"τ"},       {U'u', U"υս"},
    {U'v', U"ν"},       {U'w', U"ԝω"},  {U'x', U"хχ"}, {U'y', U"уγ"},
    {U'z', U"ᴢ"},       {U'A', U"АΑ"},  {U'B', U"ВΒ"}, {U'C', U"С"},
    {U'E', U"ЕΕ"}, {U'H', U"НΗ"},  {U'I', U"ІΙ"}, {U'K', U"КΚ"},
    {U'M', U"МΜ"}, {U'O', U"ОΟ"},  {U'P', U"РΡ"}, {U'T', U"ТΤ"},
    {U'X', U"ХΧ"}, {U'Y', U"Υ"},
};

template <std::size_t N>
std::map<char32_t, std::vector<char32_t>> to_map(const CharRow (&rows)[N]) {
    std::map<char32_t, std::vector<char32_t>> out;
    for (const auto& row : rows) out[row.key] = {row.cands.begin(), row.cands.end()};
    return out;
}

std::vector<std::pair<std::u32string, std::vector<std::u32string>>> read_dict(const std::filesystem::path& path) {
    std::vector<std::pair<std::u32string, std::vector<std::u32string>>> rows;
    std::size_t lineno = 0;
    for (const auto& line : read_lines(path)) {
        ++lineno;
        if (line.empty() || line.front() == '#') continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected key<TAB>candidates");
        }
        std::pair<std::u32string, std::vector<std::u32string>> row;
        row.first = decode_utf8(line.substr(0, tab));
        for (const auto& c : split(std::string_view(line).substr(tab + 1), ',')) {
            auto cand = decode_utf8(c);
            if (!cand.empty() && cand != row.first) row.second.push_back(std::move(cand));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::map<char32_t, std::vector<char32_t>> load_char_map(const std::filesystem::path& path) {
    std::map<char32_t, std::vector<char32_t>> out;
    if (path.empty()) return out;
    std::size_t row_index = 0;
    for (auto& [key, cands] : read_dict(path)) {
        ++row_index;
        if (key.size() != 1) {
            throw std::runtime_error(path.string() + ": entry " + std::to_string(row_index) + ": key must be one character");
        }
        auto& dst = out[key[0]];
        for (const auto& c : cands) {
            if (c.size() != 1) {
                throw std::runtime_error(path.string() + ": entry " + std::to_string(row_index) +
                                         ": candidates must be single characters");
            }
            dst.push_back(c[0]);
        }
    }
    return out;
}

std::u32string insert_copy(const std::u32string& w, std::size_t pos) {
    std::u32string out = w;
    out.insert(out.begin() + static_cast<std::ptrdiff_t>(pos) + 1, w[pos]);
    return out;
}

} // namespace

std::string_view to_string(ActKind kind) {
    switch (kind) {
    case ActKind::Swap: return "swap";
    case ActKind::Ins: return "ins";
    case ActKind::Sub: return "sub";
    }
    return "?";
}

CharDicts CharDicts::builtin() {
    CharDicts d;
    d.keyboard_vicinity = to_map(kQwerty);
    d.homoglyphs = to_map(kHomoglyphs);
    return d;
}

CharDicts CharDicts::load(const std::filesystem::path& keyboard, const std::filesystem::path& homoglyphs,
                          const std::filesystem::path& homophones) {
    CharDicts d;
    d.keyboard_vicinity = load_char_map(keyboard);
    d.homoglyphs = load_char_map(homoglyphs);
    if (!homophones.empty()) {
        for (auto& [key, cands] : read_dict(homophones)) {
            auto& dst = d.homophones[key];
            dst.insert(dst.end(), cands.begin(), cands.end());
        }
    }
    return d;
}

void save_char_map(const std::filesystem::path& path, const std::map<char32_t, std::vector<char32_t>>& map) {
    std::vector<std::string> lines;
    for (const auto& [key, cands] : map) {
        std::string line = encode_utf8(key) + "\t";
        for (std::size_t i = 0; i < cands.size(); ++i) line += (i ? "," : "") + encode_utf8(cands[i]);
        lines.push_back(std::move(line));
    }
    write_lines(path, lines);
}

std::vector<std::u32string> CharDicts::char_candidates(char32_t ch, SubSource source) const {
    std::vector<std::u32string> out;
    if (source == SubSource::Phone) {
        auto it = homophones.find(std::u32string(1, ch));
        if (it != homophones.end()) out = it->second;
        return out;
    }
    for (const auto* map : {&homoglyphs, &keyboard_vicinity}) {
        auto it = map->find(ch);
        if (it == map->end()) continue;
        for (char32_t c : it->second) {
            if (c != ch) out.emplace_back(1, c);
        }
    }
    return out;
}

bool CharDicts::has_homophone(std::u32string_view word) const {
    if (homophones.contains(std::u32string(word))) return true;
    return std::any_of(word.begin(), word.end(), [&](char32_t c) { return homophones.contains(std::u32string(1, c)); });
}

std::size_t variant_count(std::string_view word, std::size_t position, ActKind kind, const CharDicts& dicts,
                          SubSource source) {
    const auto w = decode_utf8(word);
    if (position >= w.size()) throw std::out_of_range("perturbation position out of range");
    switch (kind) {
    case ActKind::Swap: return position + 1 < w.size() && w[position] != w[position + 1] ? 1 : 0;
    case ActKind::Ins: return 1;
    case ActKind::Sub: return dicts.char_candidates(w[position], source).size();
    }
    return 0;
}

std::optional<std::string> act_perturb(std::string_view word, std::size_t position, ActKind kind,
                                       const CharDicts& dicts, std::size_t variant, SubSource source) {
    auto w = decode_utf8(word);
    if (position >= w.size()) throw std::out_of_range("perturbation position out of range");
    switch (kind) {
    case ActKind::Swap:
        if (position + 1 >= w.size() || w[position] == w[position + 1]) return std::nullopt;
        std::swap(w[position], w[position + 1]);
        return encode_utf8(w);
    case ActKind::Ins:
        return encode_utf8(insert_copy(w, position));
    case ActKind::Sub: {
        const auto cands = dicts.char_candidates(w[position], source);
        if (variant >= cands.size()) return std::nullopt;
        w.replace(position, 1, cands[variant]);
        return encode_utf8(w);
    }
    }
    return std::nullopt;
}

std::optional<std::string> delta(std::string_view word, ActKind kind, const CharDicts& dicts, const Tokenizer& tok,
                                 SubSource source) {
    const auto w = decode_utf8(word);
    if (kind == ActKind::Sub && source == SubSource::Phone) {
        auto it = dicts.homophones.find(w);
        if (it != dicts.homophones.end()) {
            for (const auto& form : it->second) {
                auto cand = encode_utf8(form);
                if (tok.is_unk(cand)) return cand;
            }
        }
    }
    for (std::size_t pos = 0; pos < w.size(); ++pos) {
        const std::size_t variants = variant_count(word, pos, kind, dicts, source);
        for (std::size_t v = 0; v < variants; ++v) {
            auto cand = act_perturb(word, pos, kind, dicts, v, source);
            if (cand && tok.is_unk(*cand)) return cand;
        }
    }
    return std::nullopt;
}

std::size_t default_unk_iterations(std::string_view word) {
    return 2 * char_length(word) + 4;
}

std::string generate_unk(std::string_view word, const CharDicts& dicts, const Tokenizer& tok, std::size_t max_iters) {
    if (word.empty()) throw std::invalid_argument("generate_unk needs a non-empty word");
    if (max_iters == 0) throw std::invalid_argument("max_iters must be at least 1");
    const auto w = decode_utf8(word);

    std::optional<std::string> result;
    if (dicts.has_homophone(w)) result = delta(word, ActKind::Sub, dicts, tok, SubSource::Phone);
    if (!result) {
        result = w.size() > 3 ? delta(word, ActKind::Swap, dicts, tok)
                              : delta(word, ActKind::Sub, dicts, tok, SubSource::Knn);
    }
    if (result) return *result;

    // Insertions compound: when no single insertion yields UNK, keep the middle
    // duplication and keep inserting from there.
    std::u32string current = w;
    for (std::size_t iter = 0; iter < max_iters; ++iter) {
        const auto current_utf8 = encode_utf8(current);
        if (auto r = delta(current_utf8, ActKind::Ins, dicts, tok)) return *r;
        current = insert_copy(current, current.size() / 2);
    }
    throw UnkGenerationError(std::string(word));
}

std::string generate_unk(std::string_view word, const CharDicts& dicts, const Tokenizer& tok) {
    return generate_unk(word, dicts, tok, default_unk_iterations(word));
}

} // namespace dex
