#include "dex/attack.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "dex/text.hpp"

namespace dex {

using nlohmann::json;

std::string to_string(AttackerId id) {
    switch (id) {
    case AttackerId::Rni: return "rni";
    case AttackerId::Gs: return "gs";
    case AttackerId::Rl: return "rl";
    case AttackerId::DexcharRl: return "dexchar-rl";
    }
    return "?";
}

std::optional<AttackerId> parse_attacker(std::string_view name) {
    if (name == "rni") return AttackerId::Rni;
    if (name == "gs") return AttackerId::Gs;
    if (name == "rl") return AttackerId::Rl;
    if (name == "dexchar-rl") return AttackerId::DexcharRl;
    return std::nullopt;
}

namespace {

json alignment_json(const std::vector<WordAlignment>& changes) {
    json a = json::array();
    for (const auto& c : changes) a.push_back({c.position, c.perturbed, c.original});
    return a;
}

std::vector<WordAlignment> alignment_from_json(const json& a) {
    std::vector<WordAlignment> out;
    for (const auto& e : a) out.push_back({e.at(0).get<std::size_t>(), e.at(1).get<std::string>(), e.at(2).get<std::string>()});
    return out;
}

} // namespace

json SentenceRecord::to_json() const {
    json j{{"type", "sentence"},
           {"line", line},
           {"original", original},
           {"perturbed", perturbed},
           {"reference", reference},
           {"clean_translation", clean_translation},
           {"perturbed_translation", perturbed_translation},
           {"edits", edits},
           {"changes", alignment_json(changes)},
           {"queries", queries},
           {"truncated", truncated}};
    j["matched"] = matched ? json(*matched) : json(nullptr);
    return j;
}

SentenceRecord SentenceRecord::from_json(const json& j) {
    SentenceRecord r;
    r.line = j.at("line").get<std::size_t>();
    r.original = j.at("original").get<std::string>();
    r.perturbed = j.at("perturbed").get<std::string>();
    r.reference = j.at("reference").get<std::string>();
    r.clean_translation = j.value("clean_translation", "");
    r.perturbed_translation = j.value("perturbed_translation", "");
    r.edits = j.value("edits", std::size_t{0});
    r.changes = alignment_from_json(j.at("changes"));
    r.queries = j.value("queries", std::size_t{0});
    r.truncated = j.value("truncated", false);
    if (j.contains("matched") && !j.at("matched").is_null()) r.matched = j.at("matched").get<bool>();
    return r;
}

json AttackReport::summary() const {
    json j{{"type", "summary"},
           {"attacker", attacker},
           {"md", md},
           {"dpe", dpe},
           {"no_edits", no_edits},
           {"clean_score", clean_score},
           {"perturbed_score", perturbed_score},
           {"total_edits", total_edits},
           {"sentences", records.size()},
           {"queries", queries},
           {"truncated", truncated},
           {"pa_judged", pa_judged},
           {"pa_unjudged", pa_unjudged},
           {"config", config},
           {"inputs", input_hashes}};
    j["pa"] = pa ? json(*pa) : json(nullptr);
    j["cf"] = cf ? json(*cf) : json(nullptr);
    return j;
}

void AttackReport::write_jsonl(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    for (const auto& r : records) out << r.to_json().dump() << '\n';
    out << summary().dump() << '\n';
    out << json{{"type", "timing"}, {"wall_clock_seconds", wall_clock_seconds}}.dump() << '\n';
}

std::vector<SentenceRecord> AttackReport::read_records(const std::filesystem::path& path) {
    std::vector<SentenceRecord> out;
    std::size_t lineno = 0;
    for (const auto& line : read_lines(path)) {
        ++lineno;
        if (trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
        if (j.value("type", "") == "sentence") out.push_back(SentenceRecord::from_json(j));
    }
    return out;
}

SentenceRecord attack_sentence(const AttackSetup& setup, const ParallelPair& pair, std::size_t line) {
    SentenceRecord rec;
    rec.line = line;
    rec.original = pair.source;
    rec.reference = pair.target;
    Rng rng(sub_seed(setup.seed, "attack:" + std::to_string(line)));
    switch (setup.attacker) {
    case AttackerId::Rni: {
        auto r = rni(pair.source, setup.dicts, setup.baseline.rni_probability, rng);
        rec.perturbed = std::move(r.sentence);
        rec.changes = std::move(r.changes);
        break;
    }
    case AttackerId::Gs: {
        if (!setup.target) throw std::invalid_argument("gs needs a target");
        auto r = greedy_search(pair.source, pair.target, setup.table, *setup.target, setup.baseline);
        rec.perturbed = std::move(r.sentence);
        rec.changes = std::move(r.changes);
        rec.queries = r.queries;
        rec.truncated = r.truncated;
        break;
    }
    case AttackerId::Rl:
    case AttackerId::DexcharRl: {
        if (!setup.policy) throw std::invalid_argument(to_string(setup.attacker) + " needs a trained policy");
        if (!setup.tokenizer) throw std::invalid_argument("rl attack needs a tokenizer");
        const auto table = setup.table.with_unk(setup.attacker == AttackerId::DexcharRl);
        const RolloutContext ctx{setup.discriminator.get(), setup.tokenizer.get(), &table, &setup.dicts, nullptr};
        auto tr = rollout(*setup.policy, pair, ctx, SelectMode::Greedy, rng);
        rec.perturbed = std::move(tr.perturbed);
        rec.changes = std::move(tr.changes);
        break;
    }
    }
    rec.edits = edit_distance(rec.perturbed, rec.original);
    return rec;
}

AttackReport run_attack(const AttackSetup& setup, std::span<const ParallelPair> pairs) {
    AttackReport report;
    report.attacker = to_string(setup.attacker);
    report.config = setup.config;
    report.config["attacker"] = report.attacker;
    report.config["seed"] = setup.seed;
    if (setup.target) report.config["target"] = setup.target->describe();
    for (const auto& p : setup.inputs) report.input_hashes[p.filename().string()] = file_hash(p);
    report.cf = setup.cf;

    const auto start = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < pairs.size(); ++i) report.records.push_back(attack_sentence(setup, pairs[i], i));
    report.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    if (!setup.target) throw std::invalid_argument("evaluation needs a target");
    std::vector<DegradationRecord> deg;
    for (const auto& r : report.records) deg.push_back({r.original, r.perturbed, r.reference});
    const BleuScorer bleu;
    const QualityScorer& scorer = setup.scorer ? *setup.scorer : static_cast<const QualityScorer&>(bleu);
    const auto d = degradation_report(*setup.target, deg, scorer);
    report.md = d.md;
    report.dpe = d.dpe;
    report.no_edits = d.no_edits;
    report.clean_score = d.clean_score;
    report.perturbed_score = d.perturbed_score;
    report.total_edits = d.total_edits;
    for (std::size_t i = 0; i < report.records.size(); ++i) {
        auto& r = report.records[i];
        r.clean_translation = d.clean_translations[i];
        r.perturbed_translation = d.perturbed_translations[i];
        report.queries += r.queries;
        report.truncated += r.truncated ? 1 : 0;
    }
    if (setup.judge && !report.records.empty()) {
        for (auto& r : report.records) {
            if (auto v = setup.judge->judge(r.perturbed, r.reference)) {
                r.matched = *v == Verdict::Match;
                ++report.pa_judged;
            } else {
                ++report.pa_unjudged;
            }
        }
        std::size_t matched = 0;
        for (const auto& r : report.records) matched += r.matched.value_or(false) ? 1 : 0;
        if (report.pa_judged) report.pa = static_cast<double>(matched) / static_cast<double>(report.pa_judged);
    }
    return report;
}

json PosAnalysis::to_json() const {
    json tags_json = json::object();
    for (const auto& [tag, r] : tags) tags_json[tag] = {{"perturbed", r.perturbed}, {"total", r.total}, {"ratio", r.ratio}};
    return {{"tags", tags_json},
            {"skipped", skipped},
            {"perturbed_tokens", perturbed_tokens},
            {"total_tokens", total_tokens},
            {"overall_rate", overall_rate}};
}

std::string PosAnalysis::table() const {
    std::ostringstream out;
    char buf[96];
    std::snprintf(buf, sizeof buf, "%-8s %10s %10s %8s\n", "tag", "perturbed", "total", "ratio");
    out << buf;
    for (const auto& [tag, r] : tags) {
        std::snprintf(buf, sizeof buf, "%-8s %10zu %10zu %8.4f\n", tag.c_str(), r.perturbed, r.total, r.ratio);
        out << buf;
    }
    std::snprintf(buf, sizeof buf, "%-8s %10zu %10zu %8.4f\n", "all", perturbed_tokens, total_tokens, overall_rate);
    out << buf;
    return out.str();
}

PosAnalysis analyze_pos(std::span<const SentenceRecord> records, std::span<const std::string> pos_lines) {
    PosAnalysis out;
    for (const auto& r : records) {
        if (r.line >= pos_lines.size()) {
            ++out.skipped;
            continue;
        }
        const auto tagged = split_ws(pos_lines[r.line]);
        const auto words = split_ws(r.original);
        if (tagged.size() != words.size()) {
            ++out.skipped;
            continue;
        }
        std::vector<std::string> tags;
        bool aligned = true;
        for (std::size_t i = 0; i < tagged.size() && aligned; ++i) {
            const auto slash = tagged[i].rfind('/');
            aligned = slash != std::string::npos && slash > 0 && tagged[i].substr(0, slash) == words[i];
            if (aligned) tags.push_back(tagged[i].substr(slash + 1));
        }
        if (!aligned) {
            ++out.skipped;
            continue;
        }
        std::vector<bool> changed(words.size(), false);
        for (const auto& c : r.changes) {
            if (c.position < changed.size()) changed[c.position] = true;
        }
        for (std::size_t i = 0; i < words.size(); ++i) {
            auto& t = out.tags[tags[i]];
            ++t.total;
            ++out.total_tokens;
            if (changed[i]) {
                ++t.perturbed;
                ++out.perturbed_tokens;
            }
        }
    }
    for (auto& [tag, t] : out.tags) t.ratio = t.total ? static_cast<double>(t.perturbed) / static_cast<double>(t.total) : 0.0;
    out.overall_rate =
        out.total_tokens ? static_cast<double>(out.perturbed_tokens) / static_cast<double>(out.total_tokens) : 0.0;
    return out;
}

EmitResult emit_finetune_data(std::span<const SentenceRecord> records, std::span<const ParallelPair> pairs,
                              const std::filesystem::path& out) {
    EmitResult result;
    std::vector<const SentenceRecord*> by_line(pairs.size(), nullptr);
    for (const auto& r : records) {
        if (r.line >= pairs.size()) {
            ++result.skipped;
            continue;
        }
        by_line[r.line] = &r;
    }
    if (result.skipped) std::cerr << "warning: " << result.skipped << " records without a matching pair skipped\n";
    std::ofstream data(out);
    std::ofstream align(out.string() + ".align.jsonl");
    if (!data || !align) throw std::runtime_error("cannot write " + out.string());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto* r = by_line[i];
        const std::string& src = r ? r->perturbed : pairs[i].source;
        data << src << '\t' << pairs[i].target << '\n';
        align << json{{"line", i}, {"alignment", alignment_json(r ? r->changes : std::vector<WordAlignment>{})}}.dump()
              << '\n';
        ++result.written;
    }
    return result;
}

std::vector<AdversarialPair> load_finetune_data(const std::filesystem::path& path) {
    const auto data = read_lines(path);
    const auto align = read_lines(path.string() + ".align.jsonl");
    if (data.size() != align.size()) throw std::runtime_error(path.string() + ": alignment sidecar length mismatch");
    std::vector<AdversarialPair> out;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto tab = data[i].find('\t');
        if (tab == std::string::npos) {
            throw std::runtime_error(path.string() + ":" + std::to_string(i + 1) + ": expected X'<TAB>Y");
        }
        const auto j = json::parse(align[i]);
        out.push_back({data[i].substr(0, tab), data[i].substr(tab + 1), alignment_from_json(j.at("alignment"))});
    }
    return out;
}

std::vector<TimingRow> benchmark_overhead(std::span<const AttackSetup> setups, std::span<const ParallelPair> pairs) {
    std::vector<TimingRow> rows;
    for (const auto& setup : setups) {
        TimingRow row;
        row.attacker = to_string(setup.attacker);
        if (!pairs.empty()) (void)attack_sentence(setup, pairs[0], 0);
        const auto start = std::chrono::steady_clock::now();
        for (std::size_t i = 0; i < pairs.size(); ++i) row.queries += attack_sentence(setup, pairs[i], i).queries;
        row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        row.sentences = pairs.size();
        rows.push_back(row);
    }
    return rows;
}

} // namespace dex
