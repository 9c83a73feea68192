#include "dex/environment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "dex/metrics.hpp"
#include "dex/text.hpp"

namespace dex {

using nlohmann::json;

namespace {

std::vector<std::string> index_to_vector(const std::unordered_map<std::string, std::size_t>& index) {
    std::vector<std::string> out(index.size() + 1);
    for (const auto& [tok, id] : index) out[id] = tok;
    return out;
}

std::unordered_map<std::string, std::size_t> vector_to_index(const std::vector<std::string>& items) {
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 1; i < items.size(); ++i) index.emplace(items[i], i);
    return index;
}

} // namespace

void Discriminator::allocate() {
    const std::size_t d = shape_.dim, h = shape_.hidden;
    params_ = nn::Parameters{};
    src_emb_ = params_.add("source_embedding", source_index_.size() + 1, d);
    ann_emb_ = params_.add("annotation_embedding", annotation_index_.size() + 1, d);
    w1_ = params_.add("hidden.weight", h, 4 * d);
    b1_ = params_.add("hidden.bias", h, 1);
    w2_ = params_.add("head.weight", 1, h);
    b2_ = params_.add("head.bias", 1, 1);
}

Discriminator Discriminator::create(std::span<const ParallelPair> data, const Tokenizer& tok,
                                    const DiscriminatorShape& shape, std::uint64_t seed) {
    Discriminator d;
    d.shape_ = shape;
    std::set<std::string> pieces, words;
    for (const auto& p : data) {
        for (auto& piece : tok.segment_line(p.source).pieces) pieces.insert(std::move(piece));
        for (auto& w : split_ws(p.target)) words.insert(std::move(w));
    }
    std::size_t next = 1;
    for (const auto& p : pieces) d.source_index_.emplace(p, next++);
    next = 1;
    for (const auto& w : words) d.annotation_index_.emplace(w, next++);
    d.allocate();

    Rng rng(seed, "discriminator-init");
    nn::fill_normal(d.params_.view(d.src_emb_), rng, shape.init_scale);
    nn::fill_normal(d.params_.view(d.ann_emb_), rng, shape.init_scale);
    nn::fill_normal(d.params_.view(d.w1_), rng, 1.0 / std::sqrt(static_cast<double>(4 * shape.dim)));
    return d;
}

Discriminator::Encoded Discriminator::encode(const Tokenizer& tok, std::string_view source,
                                             std::string_view annotation, SampleLabel label) const {
    Encoded e;
    for (const auto& piece : tok.segment_line(source).pieces) {
        auto it = source_index_.find(piece);
        e.source_ids.push_back(it == source_index_.end() ? 0 : it->second);
    }
    for (const auto& w : split_ws(annotation)) {
        auto it = annotation_index_.find(w);
        e.annotation_ids.push_back(it == annotation_index_.end() ? 0 : it->second);
    }
    if (e.source_ids.empty()) e.source_ids.push_back(0);
    if (e.annotation_ids.empty()) e.annotation_ids.push_back(0);
    e.label = label == SampleLabel::Match ? 1.0 : 0.0;
    return e;
}

void Discriminator::forward(const Encoded& e, Forward& fw) const {
    const std::size_t d = shape_.dim, h = shape_.hidden;
    fw.u.assign(d, 0.0);
    fw.v.assign(d, 0.0);
    const double* se = params_.ptr(src_emb_);
    const double* ae = params_.ptr(ann_emb_);
    for (std::size_t id : e.source_ids) {
        for (std::size_t k = 0; k < d; ++k) fw.u[k] += se[id * d + k];
    }
    for (std::size_t id : e.annotation_ids) {
        for (std::size_t k = 0; k < d; ++k) fw.v[k] += ae[id * d + k];
    }
    const double ns = 1.0 / static_cast<double>(e.source_ids.size());
    const double na = 1.0 / static_cast<double>(e.annotation_ids.size());
    for (std::size_t k = 0; k < d; ++k) {
        fw.u[k] *= ns;
        fw.v[k] *= na;
    }
    fw.f.resize(4 * d);
    for (std::size_t k = 0; k < d; ++k) {
        fw.f[k] = fw.u[k];
        fw.f[d + k] = fw.v[k];
        fw.f[2 * d + k] = std::abs(fw.u[k] - fw.v[k]);
        fw.f[3 * d + k] = fw.u[k] * fw.v[k];
    }
    fw.h.resize(h);
    nn::matvec(params_.ptr(w1_), h, 4 * d, fw.f.data(), params_.ptr(b1_), fw.h.data());
    for (double& x : fw.h) x = std::tanh(x);
    fw.z = params_.ptr(b2_)[0];
    const double* w2 = params_.ptr(w2_);
    for (std::size_t k = 0; k < h; ++k) fw.z += w2[k] * fw.h[k];
    fw.p = nn::sigmoid(fw.z);
}

double Discriminator::probability(const Encoded& e) const {
    Forward fw;
    forward(e, fw);
    return fw.p;
}

double Discriminator::score(const Tokenizer& tok, std::string_view source, std::string_view annotation) const {
    return probability(encode(tok, source, annotation));
}

double Discriminator::loss_and_gradient(std::span<const Encoded> batch, std::vector<double>& grad) const {
    if (grad.size() != params_.size()) grad.assign(params_.size(), 0.0);
    if (batch.empty()) return 0.0;
    const std::size_t d = shape_.dim, h = shape_.hidden;
    const double scale = 1.0 / static_cast<double>(batch.size());
    const auto& layout = params_.layout();
    double* g_se = grad.data() + layout[src_emb_].offset;
    double* g_ae = grad.data() + layout[ann_emb_].offset;
    double* g_w1 = grad.data() + layout[w1_].offset;
    double* g_b1 = grad.data() + layout[b1_].offset;
    double* g_w2 = grad.data() + layout[w2_].offset;
    double* g_b2 = grad.data() + layout[b2_].offset;
    const double* w2 = params_.ptr(w2_);

    Forward fw;
    std::vector<double> dh(h), df(4 * d);
    double loss = 0.0;
    for (const auto& e : batch) {
        forward(e, fw);
        loss -= e.label * nn::log_sigmoid(fw.z) + (1.0 - e.label) * nn::log_sigmoid(-fw.z);
        const double dz = (fw.p - e.label) * scale;
        g_b2[0] += dz;
        for (std::size_t k = 0; k < h; ++k) {
            g_w2[k] += dz * fw.h[k];
            dh[k] = dz * w2[k] * (1.0 - fw.h[k] * fw.h[k]);
        }
        nn::outer_acc(g_w1, h, 4 * d, dh.data(), fw.f.data());
        for (std::size_t k = 0; k < h; ++k) g_b1[k] += dh[k];
        std::fill(df.begin(), df.end(), 0.0);
        nn::matvec_t_acc(params_.ptr(w1_), h, 4 * d, dh.data(), df.data());
        const double ns = 1.0 / static_cast<double>(e.source_ids.size());
        const double na = 1.0 / static_cast<double>(e.annotation_ids.size());
        for (std::size_t k = 0; k < d; ++k) {
            const double diff = fw.u[k] - fw.v[k];
            const double sgn = diff > 0 ? 1.0 : (diff < 0 ? -1.0 : 0.0);
            const double du = df[k] + sgn * df[2 * d + k] + fw.v[k] * df[3 * d + k];
            const double dv = df[d + k] - sgn * df[2 * d + k] + fw.u[k] * df[3 * d + k];
            for (std::size_t id : e.source_ids) g_se[id * d + k] += du * ns;
            for (std::size_t id : e.annotation_ids) g_ae[id * d + k] += dv * na;
        }
    }
    return loss * scale;
}

double Discriminator::sgd_step(std::span<const Encoded> batch, double learning_rate, std::vector<double>& scratch) {
    scratch.assign(params_.size(), 0.0);
    const double loss = loss_and_gradient(batch, scratch);
    for (std::size_t i = 0; i < scratch.size(); ++i) params_.values[i] -= learning_rate * scratch[i];
    return loss;
}

json Discriminator::to_json() const {
    return {
        {"shape", {{"dim", shape_.dim}, {"hidden", shape_.hidden}, {"init_scale", shape_.init_scale}}},
        {"source_tokens", index_to_vector(source_index_)},
        {"annotation_tokens", index_to_vector(annotation_index_)},
        {"params", params_.to_json()},
    };
}

Discriminator Discriminator::from_json(const json& j) {
    Discriminator d;
    d.shape_.dim = j.at("shape").at("dim").get<std::size_t>();
    d.shape_.hidden = j.at("shape").at("hidden").get<std::size_t>();
    d.shape_.init_scale = j.at("shape").at("init_scale").get<double>();
    d.source_index_ = vector_to_index(j.at("source_tokens").get<std::vector<std::string>>());
    d.annotation_index_ = vector_to_index(j.at("annotation_tokens").get<std::vector<std::string>>());
    d.allocate();
    d.params_.load_json(j.at("params"));
    return d;
}

double augmentation_probability(double rho, double rho_bar) {
    return std::max(0.0, rho - rho_bar);
}

std::string perturb_sentence_chars(std::string_view sentence, const CharDicts& dicts, double word_rate, Rng& rng) {
    auto words = split_ws(sentence);
    if (words.empty()) return std::string(sentence);
    const auto k = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::lround(word_rate * static_cast<double>(words.size()))));
    std::vector<std::size_t> order(words.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order.begin(), order.end());
    constexpr ActKind kinds[] = {ActKind::Swap, ActKind::Ins, ActKind::Sub};
    for (std::size_t n = 0; n < std::min(k, order.size()); ++n) {
        auto& w = words[order[n]];
        const std::size_t pos = rng.below(char_length(w));
        const std::size_t first = rng.below(3);
        for (std::size_t attempt = 0; attempt < 3; ++attempt) {
            const ActKind kind = kinds[(first + attempt) % 3];
            const std::size_t variants = variant_count(w, pos, kind, dicts);
            if (variants == 0) continue;
            if (auto r = act_perturb(w, pos, kind, dicts, rng.below(variants))) {
                w = *r;
                break;
            }
        }
    }
    return join(words);
}

DiscriminatorData split_discriminator_data(std::span<const ParallelPair> data, double validation_fraction,
                                           std::uint64_t seed) {
    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(seed, "discriminator-split");
    rng.shuffle(order.begin(), order.end());
    std::size_t n_val = static_cast<std::size_t>(std::ceil(validation_fraction * static_cast<double>(data.size())));
    if (data.size() >= 2) n_val = std::clamp<std::size_t>(n_val, 1, data.size() - 1);
    else n_val = 0;
    DiscriminatorData out;
    for (std::size_t i = 0; i < order.size(); ++i) {
        (i < n_val ? out.validation : out.train).push_back(data[order[i]]);
    }
    return out;
}

double validation_accuracy(const Discriminator& d, const Tokenizer& tok, std::span<const ParallelPair> validation) {
    if (validation.empty()) return 0.0;
    std::size_t correct = 0, total = 0;
    const std::size_t n = validation.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double pos = d.score(tok, validation[i].source, validation[i].target);
        correct += pos >= 0.5 ? 1 : 0;
        ++total;
        if (n > 1) {
            const double neg = d.score(tok, validation[i].source, validation[(i + 1) % n].target);
            correct += neg < 0.5 ? 1 : 0;
            ++total;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(total);
}

std::vector<DiscriminatorSample> build_epoch_samples(std::span<const ParallelPair> train, double xi,
                                                     const Tokenizer& tok, const CharDicts& dicts,
                                                     double word_rate, Rng& rng, std::size_t& augmented) {
    std::vector<DiscriminatorSample> samples;
    samples.reserve(2 * train.size());
    const std::size_t n = train.size();
    for (const auto& pair : train) {
        std::string src = pair.source;
        if (rng.bernoulli(xi)) {
            src = perturb_sentence_chars(src, dicts, word_rate, rng);
            ++augmented;
        }
        samples.push_back({tok.retokenize(src), pair.target, SampleLabel::Match});
    }
    if (n > 1) {
        const std::size_t offset = 1 + rng.below(n - 1);
        for (std::size_t i = 0; i < n; ++i) {
            samples.push_back({samples[i].source, train[(i + offset) % n].target, SampleLabel::Mismatch});
        }
    }
    return samples;
}

DiscriminatorTrainResult train_discriminator(Discriminator& d, const DiscriminatorData& data, const EnvConfig& cfg,
                                             const Tokenizer& tok, const CharDicts& dicts, double rho_prev, Rng& rng) {
    if (data.train.empty()) throw std::invalid_argument("discriminator needs parallel data");
    if (cfg.n_e < 1) throw std::invalid_argument("n_e must be at least 1");
    if (!(cfg.rho_bar > 0.0 && cfg.rho_bar < 1.0)) throw std::invalid_argument("rho_bar must lie in (0, 1)");

    DiscriminatorTrainResult result;
    double rho = rho_prev;
    std::vector<double> scratch;
    for (int epoch = 1; epoch <= cfg.n_e; ++epoch) {
        EpochLog log;
        log.epoch = epoch;
        log.xi = augmentation_probability(rho, cfg.rho_bar);
        std::size_t augmented = 0;
        auto samples = build_epoch_samples(data.train, log.xi, tok, dicts, cfg.augment_word_rate, rng, augmented);
        log.positives = data.train.size();
        log.augmented = augmented;

        std::vector<Discriminator::Encoded> encoded;
        encoded.reserve(samples.size());
        for (const auto& s : samples) encoded.push_back(d.encode(tok, s.source, s.annotation, s.label));
        rng.shuffle(encoded.begin(), encoded.end());

        double loss_sum = 0.0;
        std::size_t batches = 0;
        const std::size_t bs = std::max<std::size_t>(cfg.batch_size, 1);
        for (std::size_t start = 0; start < encoded.size(); start += bs) {
            const std::size_t len = std::min(bs, encoded.size() - start);
            loss_sum += d.sgd_step(std::span(encoded).subspan(start, len), cfg.learning_rate, scratch);
            ++batches;
        }
        log.loss = loss_sum / static_cast<double>(std::max<std::size_t>(batches, 1));
        if (!std::isfinite(log.loss) || !d.params().all_finite()) throw DivergenceError(epoch);

        rho = validation_accuracy(d, tok, data.validation);
        log.rho = rho;
        result.log.push_back(log);
        result.positives_seen += log.positives;
        result.positives_augmented += log.augmented;
        result.epochs_run = epoch;
        if (rho >= cfg.rho_bar) {
            result.reached_threshold = true;
            break;
        }
    }
    result.rho = rho;
    return result;
}

StepResult step_episode(const Discriminator& d, const Tokenizer& tok, const std::optional<std::string>& perturbed,
                        std::string_view annotation) {
    if (!perturbed) return {0.0, true};
    const double score = d.score(tok, *perturbed, annotation);
    if (score < 0.5) return {-1.0, false};
    return {score, true};
}

double episodic_reward(const Translator& target, const Tokenizer& tok, std::string_view original,
                       std::string_view perturbed, std::string_view reference) {
    if (original == perturbed) return 0.0;
    const auto clean = target.translate(original);
    const auto attacked = target.translate(tok.retokenize(perturbed));
    return std::max(0.0, sentence_bleu(clean, reference) - sentence_bleu(attacked, reference));
}

Environment::Environment(std::span<const ParallelPair> data, std::shared_ptr<const Tokenizer> tok, CharDicts dicts,
                         EnvConfig cfg)
    : tok_(std::move(tok)),
      dicts_(std::move(dicts)),
      cfg_(cfg),
      data_(split_discriminator_data(data, cfg.validation_fraction, cfg.seed)),
      d_(Discriminator::create(data_.train, *tok_, cfg.shape, cfg.seed)),
      rng_(cfg.seed, "environment") {
    if (data.empty()) throw std::invalid_argument("environment needs parallel data");
    last_rho_ = validation_accuracy(d_, *tok_, data_.validation);
}

DiscriminatorTrainResult Environment::refresh() {
    auto result = train_discriminator(d_, data_, cfg_, *tok_, dicts_, last_rho_, rng_);
    for (auto log : result.log) {
        log.epoch += epochs_total_;
        history_.push_back(log);
    }
    epochs_total_ += result.epochs_run;
    last_rho_ = result.rho;
    return result;
}

std::string config_hash(const EnvConfig& cfg) {
    const json j{{"rho_bar", cfg.rho_bar},
                 {"n_e", cfg.n_e},
                 {"learning_rate", cfg.learning_rate},
                 {"batch_size", cfg.batch_size},
                 {"validation_fraction", cfg.validation_fraction},
                 {"augment_word_rate", cfg.augment_word_rate},
                 {"seed", cfg.seed},
                 {"dim", cfg.shape.dim},
                 {"hidden", cfg.shape.hidden}};
    return hex64(fnv1a(j.dump()));
}

void Environment::save(const std::filesystem::path& path) const {
    json j{{"format", "dex-discriminator"},
           {"version", 1},
           {"config_hash", config_hash(cfg_)},
           {"last_rho", last_rho_},
           {"epochs_total", epochs_total_},
           {"model", d_.to_json()}};
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump() << '\n';
}

void Environment::load(const std::filesystem::path& path) {
    const auto j = json::parse(read_file(path));
    if (j.at("format") != "dex-discriminator" || j.at("version") != 1) {
        throw std::runtime_error(path.string() + ": not a version 1 discriminator checkpoint");
    }
    if (j.at("config_hash") != config_hash(cfg_)) throw std::runtime_error(path.string() + ": config hash mismatch");
    d_ = Discriminator::from_json(j.at("model"));
    last_rho_ = j.at("last_rho").get<double>();
    epochs_total_ = j.at("epochs_total").get<int>();
}

Discriminator load_discriminator(const std::filesystem::path& path) {
    const auto j = json::parse(read_file(path));
    if (j.value("format", "") != "dex-discriminator" || j.value("version", 0) != 1) {
        throw std::runtime_error(path.string() + ": not a version 1 discriminator checkpoint");
    }
    return Discriminator::from_json(j.at("model"));
}

} // namespace dex
