#include <cstdio>
#include <cstdlib>
#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dex/agent.hpp"
#include "dex/attack.hpp"
#include "dex/baselines.hpp"
#include "dex/candidates.hpp"
#include "dex/desk.hpp"
#include "dex/environment.hpp"
#include "dex/errors.hpp"
#include "dex/metrics.hpp"
#include "dex/target.hpp"
#include "dex/text.hpp"
#include "dex/tokenizer.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kJudgeUrlEnv = "DEX_JUDGE_URL";

/// Shared resource flags.
struct Resources {
    std::string merges, vocab, table, lexicon, target;
    std::size_t vocab_limit = 30000;
    std::uint64_t seed = 1;
};

void add_tokenizer_flags(CLI::App* sub, Resources& r) {
    sub->add_option("--merges", r.merges, "BPE merge table")->required();
    sub->add_option("--vocab", r.vocab, "Vocabulary file")->required();
    sub->add_option("--vocab-limit", r.vocab_limit, "Keep the top N vocabulary entries")->capture_default_str();
}

void add_target_flags(CLI::App* sub, Resources& r) {
    sub->add_option("--lexicon", r.lexicon, "Lexicon for the built-in toy translator");
    sub->add_option("--target", r.target, "External translator: http(s)://... or process:<command>");
}

std::shared_ptr<const dex::Tokenizer> load_tokenizer(const Resources& r) {
    return std::make_shared<const dex::Tokenizer>(dex::load_merges(r.merges),
                                                  dex::load_vocabulary(r.vocab, r.vocab_limit));
}

dex::TranslatorHandle load_target(const Resources& r, std::shared_ptr<const dex::Tokenizer> tok) {
    if (!r.target.empty()) return dex::make_external_translator(r.target);
    if (const char* url = std::getenv(dex::kTranslatorUrlEnv); url && *url) return dex::make_external_translator(url);
    if (!r.lexicon.empty()) return dex::build_toy_translator(r.lexicon, std::move(tok), r.seed);
    throw std::invalid_argument("no target: pass --lexicon or --target");
}

/// Every option of `sub` with its resolved value.
json resolved_config(const CLI::App* sub) {
    json cfg = json::object();
    cfg["subcommand"] = sub->get_name();
    for (const CLI::Option* opt : sub->get_options()) {
        if (opt->get_lnames().empty()) continue;
        const auto& name = opt->get_lnames().front();
        if (name == "help" || name == "config") continue;
        if (opt->count() > 0) {
            const auto res = opt->reduced_results();
            cfg[name] = res.size() == 1 ? json(res.front()) : json(res);
        } else {
            cfg[name] = opt->get_default_str();
        }
    }
    return cfg;
}

void write_json(const std::string& path, const json& j) {
    if (path.empty() || path == "-") {
        std::cout << j.dump(2) << '\n';
        return;
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << '\n';
}

std::vector<std::string> config_file_args(const fs::path& path, const CLI::App* sub) {
    std::vector<std::string> args;
    std::size_t lineno = 0;
    for (const auto& raw : dex::read_lines(path)) {
        ++lineno;
        const auto line = dex::trim(raw);
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected key=value");
        }
        const auto key = dex::trim(line.substr(0, eq));
        const auto value = dex::trim(line.substr(eq + 1));
        if (!sub->get_option_no_throw("--" + std::string(key))) continue;
        args.push_back("--" + std::string(key) + "=" + std::string(value));
    }
    return args;
}

std::unique_ptr<dex::Judge> make_judge(const std::string& spec, double threshold) {
    if (spec.empty()) return nullptr;
    if (spec.rfind("lexicon:", 0) == 0) {
        return std::make_unique<dex::LexicalOracleJudge>(dex::load_lexicon(spec.substr(8)), threshold);
    }
    dex::ChatJudgeConfig cfg;
    cfg.url = spec;
    if (const char* url = std::getenv(kJudgeUrlEnv); url && *url) cfg.url = url;
    return std::make_unique<dex::ChatJudge>(cfg);
}

int error_exit(const std::string& kind, const std::string& message) {
    std::cerr << json{{"error", kind}, {"message", message}}.dump() << '\n';
    return 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"dex: character-level adversarial attacks on translation systems"};
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    std::string config_path;
    auto add_config = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "key=value file; its values override flags");
    };

    // synth
    auto* synth = app.add_subcommand("synth", "Write a synthetic desk world");
    dex::DeskConfig desk;
    std::string synth_out;
    synth->add_option("--out", synth_out, "Output directory")->required();
    synth->add_option("--seed", desk.seed)->capture_default_str();
    synth->add_option("--concepts", desk.concepts)->capture_default_str();
    synth->add_option("--corpus-sentences", desk.corpus_sentences)->capture_default_str();
    synth->add_option("--train-pairs", desk.train_pairs)->capture_default_str();
    synth->add_option("--test-pairs", desk.test_pairs)->capture_default_str();
    add_config(synth);

    // learn-bpe
    auto* lbpe = app.add_subcommand("learn-bpe", "Learn BPE merges from a corpus");
    std::string corpus, out;
    std::size_t num_merges = 20000, min_frequency = 2;
    lbpe->add_option("--corpus", corpus)->required();
    lbpe->add_option("--num-merges", num_merges)->capture_default_str();
    lbpe->add_option("--min-frequency", min_frequency)->capture_default_str();
    lbpe->add_option("--out", out)->required();
    add_config(lbpe);

    // build-vocab
    auto* bvocab = app.add_subcommand("build-vocab", "Build a frequency-ranked BPE vocabulary");
    std::string merges_path;
    std::size_t limit = 30000;
    bvocab->add_option("--corpus", corpus)->required();
    bvocab->add_option("--merges", merges_path)->required();
    bvocab->add_option("--limit", limit)->capture_default_str();
    bvocab->add_option("--out", out)->required();
    add_config(bvocab);

    // build-candidates
    auto* bcand = app.add_subcommand("build-candidates", "Build the substitution table from embeddings");
    std::string embeddings, radius = "global";
    dex::CandidateOptions copts;
    bool no_unk = false;
    bcand->add_option("--embeddings", embeddings)->required();
    bcand->add_option("--corpus", corpus, "Corpus for token frequencies")->required();
    bcand->add_option("--k", copts.k)->capture_default_str();
    bcand->add_option("--radius", radius)->check(CLI::IsMember({"global", "per-token", "fixed"}))->capture_default_str();
    bcand->add_option("--epsilon", copts.fixed_epsilon, "Radius when --radius fixed")->capture_default_str();
    bcand->add_option("--top-n", copts.radius_top_n)->capture_default_str();
    bcand->add_flag("--no-unk", no_unk, "Disable the UNK action");
    bcand->add_option("--out", out)->required();
    add_config(bcand);

    // train
    auto* train = app.add_subcommand("train", "Train the adversary against a target");
    Resources res;
    std::string src, tgt, policy_out, disc_out, log_path, profile = "default";
    dex::TrainConfig tc;
    add_tokenizer_flags(train, res);
    add_target_flags(train, res);
    train->add_option("--table", res.table)->required();
    train->add_option("--src", src)->required();
    train->add_option("--tgt", tgt)->required();
    train->add_option("--profile", profile, "default or desk settings before overrides")
        ->check(CLI::IsMember({"default", "desk"}))
        ->capture_default_str();
    train->add_option("--seed", res.seed)->capture_default_str();
    train->add_option("--alternations", tc.alternations);
    train->add_option("--n-a", tc.n_a);
    train->add_option("--batch-size", tc.batch_size);
    train->add_option("--lr", tc.update.learning_rate);
    train->add_option("--entropy-weight", tc.update.entropy_weight);
    train->add_option("--return-scale", tc.update.return_scale);
    train->add_option("--rho-bar", tc.env.rho_bar);
    train->add_option("--n-e", tc.env.n_e);
    train->add_option("--d-lr", tc.env.learning_rate);
    train->add_option("--policy-out", policy_out)->required();
    train->add_option("--disc-out", disc_out);
    train->add_option("--log", log_path, "Per-round JSONL log");
    add_config(train);

    // attack
    auto* attack = app.add_subcommand("attack", "Attack a test corpus and write a report");
    std::string attacker = "rni", policy_path, disc_path, judge_spec, adv_out, cf_corpus;
    double rni_p = 0.2, judge_threshold = 0.5;
    std::size_t max_queries = 0;
    add_tokenizer_flags(attack, res);
    add_target_flags(attack, res);
    attack->add_option("--table", res.table)->required();
    attack->add_option("--src", src)->required();
    attack->add_option("--tgt", tgt)->required();
    attack->add_option("--attacker", attacker)->check(CLI::IsMember({"rni", "gs", "rl", "dexchar-rl"}))->capture_default_str();
    attack->add_option("--rni-p", rni_p)->capture_default_str();
    attack->add_option("--max-queries", max_queries, "GS query budget per sentence (0 = unlimited)")->capture_default_str();
    attack->add_option("--policy", policy_path);
    attack->add_option("--discriminator", disc_path, "Gate perturbations with a trained D");
    attack->add_option("--judge", judge_spec, "lexicon:<file> or a chat-completion URL");
    attack->add_option("--judge-threshold", judge_threshold)->capture_default_str();
    attack->add_option("--cf-corpus", cf_corpus, "Corpus for candidate fertility");
    attack->add_option("--seed", res.seed)->capture_default_str();
    attack->add_option("--out", out, "Report JSONL")->required();
    attack->add_option("--adv-out", adv_out, "Perturbed sources, one per line");
    add_config(attack);

    // evaluate
    auto* eval = app.add_subcommand("evaluate", "Recompute MD/DPE and a bootstrap interval from a report");
    std::string report_path;
    std::size_t resamples = 1000;
    add_tokenizer_flags(eval, res);
    add_target_flags(eval, res);
    eval->add_option("--report", report_path)->required();
    eval->add_option("--resamples", resamples)->capture_default_str();
    eval->add_option("--seed", res.seed)->capture_default_str();
    eval->add_option("--out", out);
    add_config(eval);

    // analyze-pos
    auto* apos = app.add_subcommand("analyze-pos", "Per-tag perturbation ratios");
    std::string pos_path;
    apos->add_option("--report", report_path)->required();
    apos->add_option("--pos", pos_path, "token/TAG lines aligned with the sources")->required();
    apos->add_option("--out", out);
    add_config(apos);

    // emit-finetune
    auto* emit = app.add_subcommand("emit-finetune", "Write adversarial (X', Y) pairs");
    emit->add_option("--report", report_path)->required();
    emit->add_option("--src", src)->required();
    emit->add_option("--tgt", tgt)->required();
    emit->add_option("--out", out)->required();
    add_config(emit);

    // adapt-toy
    auto* adapt = app.add_subcommand("adapt-toy", "Adapt the toy translator on adversarial pairs");
    std::string pairs_path, adv_report;
    dex::AdaptConfig acfg;
    add_tokenizer_flags(adapt, res);
    adapt->add_option("--lexicon", res.lexicon)->required();
    adapt->add_option("--pairs", pairs_path, "Output of emit-finetune")->required();
    adapt->add_option("--lambda", acfg.lambda)->capture_default_str();
    adapt->add_option("--src", src, "Clean test sources")->required();
    adapt->add_option("--tgt", tgt, "Test references")->required();
    adapt->add_option("--adv-report", adv_report, "Attack report on the test set")->required();
    adapt->add_option("--seed", res.seed)->capture_default_str();
    adapt->add_option("--out", out);
    add_config(adapt);

    // benchmark
    auto* bench = app.add_subcommand("benchmark", "Wall-clock overhead per attacker");
    std::vector<std::string> attackers{"rni", "gs", "dexchar-rl"};
    add_tokenizer_flags(bench, res);
    add_target_flags(bench, res);
    bench->add_option("--table", res.table)->required();
    bench->add_option("--src", src)->required();
    bench->add_option("--tgt", tgt)->required();
    bench->add_option("--attackers", attackers)->delimiter(',')->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
    bench->add_option("--policy", policy_path);
    bench->add_option("--seed", res.seed)->capture_default_str();
    bench->add_option("--out", out);
    add_config(bench);

    // Config file values are appended after the flags so they win.
    std::vector<std::string> args(argv + 1, argv + argc);
    std::string config_file;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) config_file = args[i + 1];
        else if (args[i].rfind("--config=", 0) == 0) config_file = args[i].substr(9);
    }
    if (!config_file.empty() && !args.empty()) {
        if (CLI::App* sub = app.get_subcommand_no_throw(args[0])) {
            try {
                for (auto& extra : config_file_args(config_file, sub)) args.push_back(std::move(extra));
            } catch (const std::exception& e) {
                return error_exit("config", e.what());
            }
        }
    }
    std::reverse(args.begin(), args.end());
    try {
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (synth->parsed()) {
            const auto world = dex::generate_desk(desk);
            dex::write_desk(world, synth_out);
            std::cout << json{{"out", synth_out}, {"train", world.train.size()}, {"test", world.test.size()},
                              {"corpus", world.corpus.size()}}
                             .dump()
                      << '\n';
        } else if (lbpe->parsed()) {
            const auto merges = dex::learn_bpe(dex::read_lines(corpus), num_merges, min_frequency);
            dex::save_merges(out, merges);
            std::cout << json{{"merges", merges.merges.size()}}.dump() << '\n';
        } else if (bvocab->parsed()) {
            const auto vocab = dex::build_vocabulary(dex::read_lines(corpus), dex::load_merges(merges_path), limit);
            dex::save_vocabulary(out, vocab);
            std::cout << json{{"entries", vocab.entries().size()}, {"in_vocabulary", vocab.in_vocabulary_size()}}.dump() << '\n';
        } else if (bcand->parsed()) {
            copts.unk_enabled = !no_unk;
            copts.mode = radius == "fixed" ? dex::RadiusMode::Fixed : radius == "per-token" ? dex::RadiusMode::PerToken : dex::RadiusMode::Global;
            const auto freq = dex::count_tokens(dex::read_lines(corpus));
            const auto table = dex::build_substitution_table(dex::EmbeddingTable::load_text(embeddings), freq, copts);
            table.save(out);
            const auto cf = dex::candidate_fertility(table, freq, copts.radius_top_n);
            std::cout << json{{"epsilon", table.epsilon()}, {"entries", table.entries().size()}, {"cf", cf.value},
                              {"cf_tokens", cf.tokens_counted}, {"cf_truncated", cf.truncated}}
                             .dump()
                      << '\n';
        } else if (train->parsed()) {
            dex::TrainConfig cfg = profile == "desk" ? dex::desk_train_config() : dex::TrainConfig{};
            auto take = [](auto& dst, const auto& src_value, const CLI::App* sub, const char* name) {
                if (sub->count(name) > 0) dst = src_value;
            };
            take(cfg.alternations, tc.alternations, train, "--alternations");
            take(cfg.n_a, tc.n_a, train, "--n-a");
            take(cfg.batch_size, tc.batch_size, train, "--batch-size");
            take(cfg.update.learning_rate, tc.update.learning_rate, train, "--lr");
            take(cfg.update.entropy_weight, tc.update.entropy_weight, train, "--entropy-weight");
            take(cfg.update.return_scale, tc.update.return_scale, train, "--return-scale");
            take(cfg.env.rho_bar, tc.env.rho_bar, train, "--rho-bar");
            take(cfg.env.n_e, tc.env.n_e, train, "--n-e");
            take(cfg.env.learning_rate, tc.env.learning_rate, train, "--d-lr");
            cfg.seed = res.seed;
            cfg.env.seed = dex::sub_seed(res.seed, "environment");
            auto tok = load_tokenizer(res);
            dex::AdversaryResources ar{dex::read_parallel(src, tgt), tok, dex::SubstitutionTable::load(res.table),
                                       dex::CharDicts::builtin(), load_target(res, tok)};
            std::ofstream log;
            if (!log_path.empty()) {
                log.open(log_path);
                if (!log) throw std::runtime_error("cannot write " + log_path);
            }
            auto outcome = dex::train_adversary(cfg, ar, [&](const dex::RoundReport& r) {
                if (log) log << r.to_json().dump() << '\n';
            });
            outcome.policy.save(policy_out, dex::config_hash(cfg));
            if (!disc_out.empty()) outcome.environment->save(disc_out);
            std::cout << json{{"final_survival_rate", outcome.final_survival_rate},
                              {"rounds", outcome.rounds.size()},
                              {"refreshes", outcome.refreshes.size()},
                              {"config", dex::to_json(cfg)},
                              {"config_hash", dex::config_hash(cfg)}}
                             .dump()
                      << '\n';
        } else if (attack->parsed()) {
            auto tok = load_tokenizer(res);
            dex::AttackSetup setup;
            setup.attacker = *dex::parse_attacker(attacker);
            setup.baseline.rni_probability = rni_p;
            setup.baseline.max_queries = max_queries;
            setup.tokenizer = tok;
            setup.table = dex::SubstitutionTable::load(res.table);
            setup.target = load_target(res, tok);
            if (!policy_path.empty()) setup.policy = std::make_shared<const dex::ActorCritic>(dex::ActorCritic::load(policy_path));
            if (!disc_path.empty()) {
                setup.discriminator = std::make_shared<const dex::Discriminator>(dex::load_discriminator(disc_path));
            }
            setup.judge = make_judge(judge_spec, judge_threshold);
            if (!cf_corpus.empty()) {
                setup.cf = dex::candidate_fertility(setup.table, dex::count_tokens(dex::read_lines(cf_corpus))).value;
            }
            setup.seed = res.seed;
            setup.config = resolved_config(attack);
            for (const auto& p : {res.merges, res.vocab, res.table, res.lexicon, src, tgt, policy_path, disc_path}) {
                if (!p.empty()) setup.inputs.emplace_back(p);
            }
            const auto pairs = dex::read_parallel(src, tgt);
            const auto report = dex::run_attack(setup, pairs);
            report.write_jsonl(out);
            if (!adv_out.empty()) {
                std::vector<std::string> lines;
                for (const auto& r : report.records) lines.push_back(r.perturbed);
                dex::write_lines(adv_out, lines);
            }
            std::cout << report.summary().dump() << '\n';
        } else if (eval->parsed()) {
            auto tok = load_tokenizer(res);
            const auto target = load_target(res, tok);
            const auto records = dex::AttackReport::read_records(report_path);
            std::vector<dex::DegradationRecord> deg;
            for (const auto& r : records) deg.push_back({r.original, r.perturbed, r.reference});
            const auto d = dex::degradation_report(*target, deg, dex::BleuScorer{});
            std::vector<dex::BleuStats> clean, pert;
            for (std::size_t i = 0; i < deg.size(); ++i) {
                clean.push_back(dex::bleu_stats(d.clean_translations[i], deg[i].reference));
                pert.push_back(dex::bleu_stats(d.perturbed_translations[i], deg[i].reference));
            }
            json j{{"sentences", deg.size()}, {"md", d.md},           {"dpe", d.dpe},
                   {"clean", d.clean_score},  {"perturbed", d.perturbed_score}, {"edits", d.total_edits},
                   {"config", resolved_config(eval)}};
            if (!deg.empty()) {
                const auto ci = dex::bootstrap_md_interval(clean, pert, resamples, res.seed);
                j["md_ci95"] = {ci.lo, ci.hi};
            }
            write_json(out, j);
        } else if (apos->parsed()) {
            const auto records = dex::AttackReport::read_records(report_path);
            const auto pos = dex::read_lines(pos_path);
            const auto analysis = dex::analyze_pos(records, pos);
            std::cerr << analysis.table();
            write_json(out, analysis.to_json());
        } else if (emit->parsed()) {
            const auto records = dex::AttackReport::read_records(report_path);
            const auto pairs = dex::read_parallel(src, tgt);
            const auto r = dex::emit_finetune_data(records, pairs, out);
            if (r.skipped > 0) std::cerr << "warning: skipped " << r.skipped << " records without a matching pair\n";
            std::cout << json{{"written", r.written}, {"skipped", r.skipped}}.dump() << '\n';
        } else if (adapt->parsed()) {
            auto tok = load_tokenizer(res);
            const auto base = dex::build_toy_translator(res.lexicon, tok, res.seed);
            const auto adapted = dex::adapt_toy_translator(base, dex::load_finetune_data(pairs_path), acfg);
            const auto test = dex::read_parallel(src, tgt);
            const auto adv = dex::AttackReport::read_records(adv_report);
            std::vector<std::string> clean_src, refs, adv_src, adv_refs, mixed_src, mixed_refs;
            for (const auto& p : test) {
                clean_src.push_back(p.source);
                refs.push_back(p.target);
            }
            for (const auto& r : adv) {
                adv_src.push_back(r.perturbed);
                adv_refs.push_back(r.reference);
            }
            mixed_src = clean_src;
            mixed_src.insert(mixed_src.end(), adv_src.begin(), adv_src.end());
            mixed_refs = refs;
            mixed_refs.insert(mixed_refs.end(), adv_refs.begin(), adv_refs.end());
            auto score = [](const dex::Translator& t, const std::vector<std::string>& s,
                            const std::vector<std::string>& r) {
                std::vector<std::string> hyp;
                for (const auto& line : s) hyp.push_back(t.translate(line));
                return dex::bleu(hyp, r, dex::BleuMode::Corpus);
            };
            json j{{"aliases_added", adapted.aliases_added}, {"skipped", adapted.skipped}, {"lambda", acfg.lambda}};
            for (const auto& [name, handle] : {std::pair{"before", base}, std::pair{"after", adapted.handle}}) {
                j[name] = {{"clean", score(*handle, clean_src, refs)},
                           {"adversarial", score(*handle, adv_src, adv_refs)},
                           {"mixed", score(*handle, mixed_src, mixed_refs)}};
            }
            j["config"] = resolved_config(adapt);
            write_json(out, j);
        } else if (bench->parsed()) {
            auto tok = load_tokenizer(res);
            const auto table = dex::SubstitutionTable::load(res.table);
            const auto target = load_target(res, tok);
            std::shared_ptr<const dex::ActorCritic> policy;
            if (!policy_path.empty()) policy = std::make_shared<const dex::ActorCritic>(dex::ActorCritic::load(policy_path));
            std::vector<dex::AttackSetup> setups;
            for (const auto& name : attackers) {
                const auto id = dex::parse_attacker(name);
                if (!id) throw std::invalid_argument("unknown attacker " + name);
                dex::AttackSetup s;
                s.attacker = *id;
                s.tokenizer = tok;
                s.table = table;
                s.target = target;
                s.policy = policy;
                s.seed = res.seed;
                setups.push_back(std::move(s));
            }
            const auto pairs = dex::read_parallel(src, tgt);
            json rows = json::array();
            for (const auto& row : dex::benchmark_overhead(setups, pairs)) {
                rows.push_back({{"attacker", row.attacker},
                                {"seconds", row.seconds},
                                {"sentences", row.sentences},
                                {"queries", row.queries}});
                std::fprintf(stderr, "%-12s %10.4f s  %6zu sentences  %8zu queries\n", row.attacker.c_str(),
                             row.seconds, row.sentences, row.queries);
            }
            write_json(out, json{{"timing", rows}, {"config", resolved_config(bench)}});
        }
    } catch (const dex::TransportError& e) {
        return error_exit("transport", e.what());
    } catch (const dex::ProtocolError& e) {
        return error_exit("protocol", e.what());
    } catch (const std::invalid_argument& e) {
        return error_exit("invalid_argument", e.what());
    } catch (const std::exception& e) {
        return error_exit("runtime", e.what());
    }
    return 0;
}
