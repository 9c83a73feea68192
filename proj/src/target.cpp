#include "dex/target.hpp"

#include <algorithm>
#include <csignal>
#include <cstdlib>
#include <semaphore>
#include <stdexcept>

#include <fcntl.h>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "dex/errors.hpp"
#include "dex/rng.hpp"
#include "dex/text.hpp"
#include "http.hpp"

namespace dex {

using nlohmann::json;

LexiconTransducer::LexiconTransducer(std::map<std::string, std::string> lexicon,
                                     std::shared_ptr<const Tokenizer> tokenizer, std::uint64_t seed,
                                     DistortionRule rule)
    : lexicon_(std::move(lexicon)), tok_(std::move(tokenizer)), seed_(seed), rule_(rule) {
    if (!tok_) throw std::invalid_argument("lexicon transducer needs a tokenizer");
}

std::string LexiconTransducer::translate_word(const std::string& word) const {
    auto it = lexicon_.find(word);
    return it == lexicon_.end() ? word : it->second;
}

std::string LexiconTransducer::translate(std::string_view source) const {
    std::vector<std::string> out;
    std::size_t unk_count = 0;
    std::size_t first_unk = 0;
    for (const auto& word : split_ws(source)) {
        if (!tok_->is_unk(word)) {
            for (auto& t : split_ws(translate_word(word))) out.push_back(std::move(t));
            continue;
        }
        auto alias = aliases_.find(word);
        if (alias != aliases_.end() && alias->second.weight > 0.0) {
            for (auto& t : split_ws(translate_word(alias->second.original))) out.push_back(std::move(t));
            continue;
        }
        if (unk_count++ == 0) first_unk = out.size();
        if (rule_.duplicate_previous && !out.empty()) out.push_back(out.back());
    }
    if (rule_.rotate_window && rule_.window >= 2 && unk_count >= rule_.rotate_min_unk && out.size() >= rule_.window) {
        const std::size_t start = std::min(first_unk, out.size() - rule_.window);
        const std::size_t shift = 1 + splitmix64(seed_ ^ fnv1a(source)) % (rule_.window - 1);
        auto first = out.begin() + static_cast<std::ptrdiff_t>(start);
        std::rotate(first, first + static_cast<std::ptrdiff_t>(shift), first + static_cast<std::ptrdiff_t>(rule_.window));
    }
    return join(out);
}

std::string LexiconTransducer::describe() const {
    return "lexicon:" + std::to_string(lexicon_.size()) + "+" + std::to_string(aliases_.size()) +
           ":seed=" + std::to_string(seed_);
}

LexiconTransducer LexiconTransducer::with_alias(std::string perturbed, std::string original, double weight) const {
    LexiconTransducer copy = *this;
    copy.aliases_[std::move(perturbed)] = Alias{std::move(original), weight};
    return copy;
}

std::map<std::string, std::string> load_lexicon(const std::filesystem::path& path) {
    std::map<std::string, std::string> lexicon;
    std::size_t lineno = 0;
    for (const auto& line : read_lines(path)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto tab = line.find('\t');
        const auto where = path.string() + ":" + std::to_string(lineno) + ": ";
        if (tab == std::string::npos) throw std::runtime_error(where + "expected src<TAB>tgt");
        auto src = std::string(trim(std::string_view(line).substr(0, tab)));
        auto tgt = std::string(trim(std::string_view(line).substr(tab + 1)));
        if (src.empty() || tgt.empty()) throw std::runtime_error(where + "empty source or target");
        if (split_ws(src).size() != 1) throw std::runtime_error(where + "source must be a single word");
        lexicon[std::move(src)] = std::move(tgt);
    }
    return lexicon;
}

TranslatorHandle build_toy_translator(const std::filesystem::path& lexicon_file,
                                      std::shared_ptr<const Tokenizer> tokenizer, std::uint64_t seed) {
    return std::make_shared<LexiconTransducer>(load_lexicon(lexicon_file), std::move(tokenizer), seed);
}

AdaptResult adapt_toy_translator(const TranslatorHandle& handle, std::span<const AdversarialPair> pairs,
                                 const AdaptConfig& config) {
    const auto* base = dynamic_cast<const LexiconTransducer*>(handle.get());
    if (!base) throw std::invalid_argument("adaptation needs a lexicon transducer handle");
    if (config.lambda < 0.0 || config.lambda > 1.0) throw std::invalid_argument("lambda must lie in [0, 1]");

    AdaptResult result;
    if (config.lambda == 0.0 || pairs.empty()) {
        result.handle = handle;
        return result;
    }
    LexiconTransducer adapted = *base;
    const Tokenizer& tok = base->tokenizer();
    for (const auto& pair : pairs) {
        const auto words = split_ws(pair.perturbed_source);
        for (const auto& a : pair.alignment) {
            const bool aligned = a.position < words.size() && words[a.position] == a.perturbed;
            const bool usable = aligned && a.perturbed != a.original && tok.is_unk(a.perturbed) &&
                                !tok.is_unk(a.original) && base->lexicon().contains(a.original);
            if (!usable) {
                ++result.skipped;
                continue;
            }
            if (!adapted.aliases().contains(a.perturbed)) ++result.aliases_added;
            adapted = adapted.with_alias(a.perturbed, a.original, config.lambda);
        }
    }
    result.handle = std::make_shared<LexiconTransducer>(std::move(adapted));
    return result;
}

namespace {

std::string parse_translation(const json& response) {
    if (!response.is_object() || !response.contains("translation") || !response["translation"].is_string()) {
        throw ProtocolError("response lacks a string \"translation\" field");
    }
    return response["translation"].get<std::string>();
}

std::optional<std::vector<double>> parse_losses(const json& response) {
    if (!response.is_object() || !response.contains("token_losses")) return std::nullopt;
    const auto& arr = response["token_losses"];
    if (!arr.is_array()) throw ProtocolError("\"token_losses\" must be an array");
    std::vector<double> out;
    for (const auto& v : arr) {
        if (!v.is_number()) throw ProtocolError("\"token_losses\" must hold numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

} // namespace

struct HttpTranslator::Gate {
    explicit Gate(int n) : slots(n) {}
    std::counting_semaphore<1024> slots;
};

HttpTranslator::HttpTranslator(ExternalConfig config)
    : config_(std::move(config)), gate_(std::make_unique<Gate>(std::clamp(config_.max_in_flight, 1, 1024))) {
    if (config_.endpoint.empty()) throw std::invalid_argument("translator endpoint is empty");
}

HttpTranslator::~HttpTranslator() = default;

std::string HttpTranslator::translate(std::string_view source) const {
    gate_->slots.acquire();
    try {
        auto res = detail::post_json(config_.endpoint, json{{"source", source}}, {}, config_.attempts, config_.timeout);
        gate_->slots.release();
        return parse_translation(res);
    } catch (...) {
        gate_->slots.release();
        throw;
    }
}

std::optional<std::vector<double>> HttpTranslator::token_losses(std::string_view source,
                                                                std::string_view reference) const {
    gate_->slots.acquire();
    try {
        auto res = detail::post_json(config_.endpoint, json{{"source", source}, {"reference", reference}}, {},
                                     config_.attempts, config_.timeout);
        gate_->slots.release();
        return parse_losses(res);
    } catch (...) {
        gate_->slots.release();
        throw;
    }
}

std::string HttpTranslator::describe() const {
    return "http:" + config_.endpoint;
}

ProcessTranslator::ProcessTranslator(std::string command, int attempts)
    : command_(std::move(command)), attempts_(std::max(attempts, 1)) {
    std::signal(SIGPIPE, SIG_IGN);
}

ProcessTranslator::~ProcessTranslator() {
    std::lock_guard lock(mu_);
    stop();
}

void ProcessTranslator::start() const {
    int in_pipe[2], out_pipe[2];
    if (pipe(in_pipe) != 0) throw TransportError("pipe failed", 1);
    if (pipe(out_pipe) != 0) {
        close(in_pipe[0]);
        close(in_pipe[1]);
        throw TransportError("pipe failed", 1);
    }
    const pid_t pid = fork();
    if (pid < 0) throw TransportError("fork failed", 1);
    if (pid == 0) {
        dup2(in_pipe[0], STDIN_FILENO);
        dup2(out_pipe[1], STDOUT_FILENO);
        close(in_pipe[0]);
        close(in_pipe[1]);
        close(out_pipe[0]);
        close(out_pipe[1]);
        execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }
    close(in_pipe[0]);
    close(out_pipe[1]);
    fcntl(in_pipe[1], F_SETFD, FD_CLOEXEC);
    fcntl(out_pipe[0], F_SETFD, FD_CLOEXEC);
    pid_ = pid;
    to_child_ = in_pipe[1];
    from_child_ = out_pipe[0];
    buffer_.clear();
}

void ProcessTranslator::stop() const {
    if (to_child_ >= 0) close(to_child_);
    if (from_child_ >= 0) close(from_child_);
    if (pid_ > 0) {
        int status = 0;
        waitpid(pid_, &status, 0);
    }
    pid_ = -1;
    to_child_ = -1;
    from_child_ = -1;
    buffer_.clear();
}

std::string ProcessTranslator::exchange(const std::string& request_line) const {
    std::lock_guard lock(mu_);
    std::string last_error;
    for (int attempt = 1; attempt <= attempts_; ++attempt) {
        if (pid_ < 0) start();
        bool ok = true;
        const std::string line = request_line + "\n";
        std::size_t written = 0;
        while (written < line.size()) {
            const auto n = write(to_child_, line.data() + written, line.size() - written);
            if (n <= 0) {
                ok = false;
                break;
            }
            written += static_cast<std::size_t>(n);
        }
        if (ok) {
            for (;;) {
                const auto nl = buffer_.find('\n');
                if (nl != std::string::npos) {
                    std::string reply = buffer_.substr(0, nl);
                    buffer_.erase(0, nl + 1);
                    return reply;
                }
                char chunk[4096];
                const auto n = read(from_child_, chunk, sizeof chunk);
                if (n <= 0) {
                    ok = false;
                    break;
                }
                buffer_.append(chunk, static_cast<std::size_t>(n));
            }
        }
        last_error = "translator process \"" + command_ + "\" closed its pipe";
        stop();
    }
    throw TransportError(last_error, attempts_);
}

std::string ProcessTranslator::translate(std::string_view source) const {
    const auto reply = exchange(json{{"source", source}}.dump());
    try {
        return parse_translation(json::parse(reply));
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("malformed translator reply: ") + e.what());
    }
}

std::optional<std::vector<double>> ProcessTranslator::token_losses(std::string_view source,
                                                                   std::string_view reference) const {
    const auto reply = exchange(json{{"source", source}, {"reference", reference}}.dump());
    try {
        return parse_losses(json::parse(reply));
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("malformed translator reply: ") + e.what());
    }
}

std::string ProcessTranslator::describe() const {
    return "process:" + command_;
}

TranslatorHandle make_external_translator(const std::string& spec, int attempts, int max_in_flight) {
    if (spec.starts_with("process:")) return std::make_shared<ProcessTranslator>(spec.substr(8), attempts);
    ExternalConfig cfg;
    cfg.endpoint = spec;
    if (const char* env = std::getenv(kTranslatorUrlEnv); env && *env) cfg.endpoint = env;
    cfg.attempts = attempts;
    cfg.max_in_flight = max_in_flight;
    return std::make_shared<HttpTranslator>(std::move(cfg));
}

} // namespace dex
