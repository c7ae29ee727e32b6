// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 vulread contributors

#include "vulread/orpo/orpo.hpp"

#include <algorithm>
#include <cmath>
#include <cctype>
#include <cstdio>
#include <random>

#include "vulread/common.hpp"
#include "vulread/error.hpp"

namespace vulread::orpo {

void validate(const TokenLogProbs& seq) {
    if (seq.logprobs.empty()) throw Error(Errc::EmptySequence, "sequence has no tokens");
    if (seq.tokens.size() != seq.logprobs.size()) {
        throw Error(Errc::InvalidArgument, "token and logprob counts differ");
    }
    for (const double lp : seq.logprobs) {
        if (!std::isfinite(lp) || lp > 0.0) throw Error(Errc::InvalidArgument, "logprob must be finite and <= 0");
    }
}

double avg_logprob(const TokenLogProbs& seq) {
    validate(seq);
    double sum = 0.0;
    for (const double lp : seq.logprobs) sum += lp;
    return sum / static_cast<double>(seq.logprobs.size());
}

double sft_nll(const TokenLogProbs& seq) {
    validate(seq);
    double sum = 0.0;
    for (const double lp : seq.logprobs) sum += lp;
    return -sum;
}

namespace {

void check_avg(double avg_lp) {
    if (!std::isfinite(avg_lp) || avg_lp > 0.0) {
        throw Error(Errc::InvalidArgument, "average logprob must be finite and <= 0");
    }
    if (avg_lp > kMaxAvgLogprob) {
        throw Error(Errc::DegenerateProbability, "probability too close to 1 for finite odds");
    }
}

// log(1 + exp(x)) without overflow.
double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

// 1 / (1 + exp(x)), i.e. sigmoid(-x).
double sigmoid_neg(double x) {
    if (x >= 0.0) {
        const double e = std::exp(-x);
        return e / (1.0 + e);
    }
    return 1.0 / (1.0 + std::exp(x));
}

} // namespace

double log_odds(double avg_lp) {
    check_avg(avg_lp);
    return avg_lp - std::log(-std::expm1(avg_lp));
}

double or_loss(double chosen_avg_lp, double rejected_avg_lp) {
    return or_loss_grad(chosen_avg_lp, rejected_avg_lp).loss;
}

OrLossGrad or_loss_grad(double chosen_avg_lp, double rejected_avg_lp) {
    const double z = log_odds(chosen_avg_lp) - log_odds(rejected_avg_lp);
    const double s = sigmoid_neg(z);
    OrLossGrad g;
    g.loss = softplus(-z);
    // d log_odds / d a = 1 / (1 - e^a)
    g.d_chosen = -s / -std::expm1(chosen_avg_lp);
    g.d_rejected = s / -std::expm1(rejected_avg_lp);
    return g;
}

double clamp_avg_logprob(double avg_lp, std::size_t* clamped) noexcept {
    if (avg_lp > kMaxAvgLogprob) {
        if (clamped != nullptr) ++*clamped;
        return kMaxAvgLogprob;
    }
    return avg_lp;
}

double orpo_total(double sft, double or_term, const OrpoConfig& config) { return sft + config.lambda * or_term; }

// ---- toy model --------------------------------------------------------------

ToyLmParams::ToyLmParams(std::size_t vocab) : vocab_(vocab) {
    if (vocab == 0 || vocab > kMaxToyVocab) {
        throw Error(Errc::InvalidArgument, "toy vocabulary must be in [1, " + std::to_string(kMaxToyVocab) + "]");
    }
    theta_.assign(vocab * vocab, 0.0);
}

ToyLmParams ToyLmParams::random(std::size_t vocab, std::uint64_t seed, double scale) {
    ToyLmParams params(vocab);
    std::mt19937_64 rng(seed);
    for (auto& v : params.theta_) {
        // 53 random mantissa bits mapped onto [-scale, scale].
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        v = scale * (2.0 * u - 1.0);
    }
    return params;
}

std::vector<double> ToyLmParams::row_logprobs(std::size_t context) const {
    if (context >= vocab_) throw Error(Errc::TokenOutOfRange, "context token " + std::to_string(context));
    const auto row = flat().subspan(context * vocab_, vocab_);
    const double m = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (const double x : row) sum += std::exp(x - m);
    const double log_z = m + std::log(sum);
    std::vector<double> out(vocab_);
    for (std::size_t j = 0; j < vocab_; ++j) out[j] = row[j] - log_z;
    return out;
}

namespace {

void check_tokens(std::span<const int> tokens, std::size_t vocab, std::string_view what) {
    for (const int t : tokens) {
        if (t < 0 || static_cast<std::size_t>(t) >= vocab) {
            throw Error(Errc::TokenOutOfRange, std::string(what) + " token " + std::to_string(t) + " outside [0, " +
                                                   std::to_string(vocab) + ")");
        }
    }
}

} // namespace

TokenLogProbs toy_forward(const ToyLmParams& params, std::span<const int> prompt, std::span<const int> completion) {
    if (prompt.empty()) throw Error(Errc::EmptySequence, "prompt has no tokens");
    if (completion.empty()) throw Error(Errc::EmptySequence, "completion has no tokens");
    check_tokens(prompt, params.vocab(), "prompt");
    check_tokens(completion, params.vocab(), "completion");
    TokenLogProbs out;
    out.tokens.assign(completion.begin(), completion.end());
    out.logprobs.reserve(completion.size());
    int context = prompt.back();
    for (const int t : completion) {
        out.logprobs.push_back(params.row_logprobs(static_cast<std::size_t>(context))[static_cast<std::size_t>(t)]);
        context = t;
    }
    return out;
}

PairLoss evaluate_pair(const ToyLmParams& params, const ToyPair& pair, const OrpoConfig& config) {
    const auto chosen = toy_forward(params, pair.prompt, pair.chosen);
    const auto rejected = toy_forward(params, pair.prompt, pair.rejected);
    PairLoss loss;
    loss.sft_nll = sft_nll(chosen);
    loss.chosen_avg_lp = avg_logprob(chosen);
    loss.rejected_avg_lp = avg_logprob(rejected);
    loss.or_loss = or_loss(clamp_avg_logprob(loss.chosen_avg_lp, &loss.clamped),
                           clamp_avg_logprob(loss.rejected_avg_lp, &loss.clamped));
    loss.total = orpo_total(loss.sft_nll, loss.or_loss, config);
    return loss;
}

namespace {

// Adds scale * d(sum_t log p(y_t | y_{t-1})) / dtheta into grad.
void accumulate_sequence_grad(const ToyLmParams& params, int first_context, std::span<const int> tokens, double scale,
                              std::vector<double>& grad) {
    if (scale == 0.0) return;
    const auto v = params.vocab();
    int context = first_context;
    for (const int t : tokens) {
        const auto row = params.row_logprobs(static_cast<std::size_t>(context));
        double* g = grad.data() + static_cast<std::size_t>(context) * v;
        for (std::size_t k = 0; k < v; ++k) g[k] -= scale * std::exp(row[k]);
        g[static_cast<std::size_t>(t)] += scale;
        context = t;
    }
}

} // namespace

std::vector<double> loss_gradient(const ToyLmParams& params, const ToyPair& pair, const OrpoConfig& config,
                                  PairLoss* loss) {
    const auto l = evaluate_pair(params, pair, config);
    if (loss != nullptr) *loss = l;
    std::vector<double> grad(params.flat().size(), 0.0);
    const int context = pair.prompt.back();

    // SFT term: -sum log p(chosen).
    accumulate_sequence_grad(params, context, pair.chosen, -1.0, grad);

    if (config.lambda != 0.0) {
        const bool chosen_clamped = l.chosen_avg_lp > kMaxAvgLogprob;
        const bool rejected_clamped = l.rejected_avg_lp > kMaxAvgLogprob;
        const auto g = or_loss_grad(clamp_avg_logprob(l.chosen_avg_lp), clamp_avg_logprob(l.rejected_avg_lp));
        // avg_lp = (1/n) sum log p, so each token contributes d/da / n.
        if (!chosen_clamped) {
            accumulate_sequence_grad(params, context, pair.chosen,
                                     config.lambda * g.d_chosen / static_cast<double>(pair.chosen.size()), grad);
        }
        if (!rejected_clamped) {
            accumulate_sequence_grad(params, context, pair.rejected,
                                     config.lambda * g.d_rejected / static_cast<double>(pair.rejected.size()), grad);
        }
    }
    return grad;
}

namespace {

void check_step_args(double learning_rate, const OrpoConfig& config) {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        throw Error(Errc::InvalidArgument, "learning rate must be positive");
    }
    if (!(config.lambda >= 0.0) || !std::isfinite(config.lambda)) {
        throw Error(Errc::InvalidArgument, "lambda must be non-negative");
    }
}

} // namespace

StepResult toy_train_step(const ToyLmParams& params, const ToyPair& pair, double learning_rate,
                          const OrpoConfig& config) {
    check_step_args(learning_rate, config);
    PairLoss loss;
    const auto grad = loss_gradient(params, pair, config, &loss);
    StepResult out{params, loss.total};
    auto theta = out.params.flat();
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= learning_rate * grad[i];
    return out;
}

double toy_batch_step(ToyLmParams& params, const std::vector<ToyPair>& pairs, double learning_rate,
                      const OrpoConfig& config) {
    check_step_args(learning_rate, config);
    if (pairs.empty()) throw Error(Errc::EmptyInput, "no training pairs");
    std::vector<double> grad(params.flat().size(), 0.0);
    double loss_sum = 0.0;
    for (const auto& pair : pairs) {
        PairLoss loss;
        const auto g = loss_gradient(params, pair, config, &loss);
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += g[i];
        loss_sum += loss.total;
    }
    const double n = static_cast<double>(pairs.size());
    auto theta = params.flat();
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= learning_rate * grad[i] / n;
    return loss_sum / n;
}

double grad_check(const ToyLmParams& params, const ToyPair& pair, const OrpoConfig& config, double step) {
    const auto analytic = loss_gradient(params, pair, config);
    ToyLmParams probe = params;
    auto theta = probe.flat();
    double worst = 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double saved = theta[i];
        theta[i] = saved + step;
        const double up = evaluate_pair(probe, pair, config).total;
        theta[i] = saved - step;
        const double down = evaluate_pair(probe, pair, config).total;
        theta[i] = saved;
        const double numeric = (up - down) / (2.0 * step);
        const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
        worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
    }
    return worst;
}

// ---- training driver --------------------------------------------------------

TrainOptions train_options_from_config(const nlohmann::json& config, TrainOptions defaults) {
    if (!config.is_object()) throw Error(Errc::SchemaError, "config must be a JSON object");
    auto lookup = [&](const std::string& key) -> const nlohmann::json* {
        if (auto it = config.find("orpo"); it != config.end() && it->is_object()) {
            if (auto inner = it->find(key); inner != it->end()) return &*inner;
        }
        if (auto it = config.find("orpo." + key); it != config.end()) return &*it;
        return nullptr;
    };
    auto number = [&](const std::string& key, double& target) {
        if (const auto* v = lookup(key)) {
            if (!v->is_number()) throw Error(Errc::SchemaError, "orpo." + key + " must be a number");
            target = v->get<double>();
        }
    };
    auto integer = [&](const std::string& key, auto& target) {
        if (const auto* v = lookup(key)) {
            if (!v->is_number_integer() || v->get<std::int64_t>() < 0) {
                throw Error(Errc::SchemaError, "orpo." + key + " must be a non-negative integer");
            }
            target = v->get<std::uint64_t>();
        }
    };
    number("lambda", defaults.orpo.lambda);
    number("learning_rate", defaults.learning_rate);
    integer("steps", defaults.steps);
    integer("seed", defaults.seed);
    if (!(defaults.orpo.lambda >= 0.0)) throw Error(Errc::SchemaError, "orpo.lambda must be >= 0");
    if (!(defaults.learning_rate > 0.0)) throw Error(Errc::SchemaError, "orpo.learning_rate must be > 0");
    return defaults;
}

TrainReport toy_train(const std::vector<ToyPair>& pairs, std::size_t vocab, const TrainOptions& options) {
    if (pairs.empty()) throw Error(Errc::EmptyInput, "no training pairs");
    TrainReport report{ToyLmParams::random(vocab, options.seed, options.init_scale), {}, 0.0, 0, 0, {}};
    report.loss_trajectory.reserve(options.steps);
    for (std::size_t s = 0; s < options.steps; ++s) {
        report.loss_trajectory.push_back(toy_batch_step(report.params, pairs, options.learning_rate, options.orpo));
    }
    double total = 0.0;
    for (const auto& pair : pairs) {
        const auto loss = evaluate_pair(report.params, pair, options.orpo);
        total += loss.total;
        report.clamped += loss.clamped;
        if (loss.chosen_avg_lp > loss.rejected_avg_lp) ++report.separated;
        report.final_pair_losses.push_back(loss);
    }
    report.final_loss = total / static_cast<double>(pairs.size());
    return report;
}

std::vector<ToyPair> synthetic_pairs(std::size_t count, std::size_t vocab, std::uint64_t seed) {
    if (vocab < 4 || vocab > kMaxToyVocab) throw Error(Errc::InvalidArgument, "synthetic pairs need 4 <= V <= 32");
    std::mt19937_64 rng(seed);
    const auto half = vocab / 2;
    auto draw = [&](std::size_t lo, std::size_t hi) {
        return static_cast<int>(lo + bounded_draw(rng, hi - lo));
    };
    std::vector<ToyPair> pairs;
    for (std::size_t i = 0; i < count; ++i) {
        ToyPair p;
        char id[32];
        std::snprintf(id, sizeof id, "pair-%03zu", i);
        p.id = id;
        const auto prompt_len = 2 + bounded_draw(rng, 3);
        const auto chosen_len = 3 + bounded_draw(rng, 4);
        const auto rejected_len = 3 + bounded_draw(rng, 4);
        for (std::size_t t = 0; t < prompt_len; ++t) p.prompt.push_back(draw(0, vocab));
        for (std::size_t t = 0; t < chosen_len; ++t) p.chosen.push_back(draw(0, half));
        for (std::size_t t = 0; t < rejected_len; ++t) p.rejected.push_back(draw(half, vocab));
        pairs.push_back(std::move(p));
    }
    return pairs;
}

std::vector<int> toy_tokenize(std::string_view text, std::size_t vocab) {
    if (vocab == 0) throw Error(Errc::InvalidArgument, "vocabulary size must be positive");
    std::vector<int> tokens;
    std::size_t pos = 0;
    while (pos < text.size()) {
        while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos])) != 0) ++pos;
        const auto start = pos;
        while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos])) == 0) ++pos;
        if (pos > start) tokens.push_back(static_cast<int>(fnv1a64(to_lower(text.substr(start, pos - start))) % vocab));
    }
    return tokens;
}

nlohmann::json audit_record(const std::string& id, const PairLoss& loss) {
    return nlohmann::json{{"id", id},
                          {"sft_nll", loss.sft_nll},
                          {"chosen_avg_lp", loss.chosen_avg_lp},
                          {"rejected_avg_lp", loss.rejected_avg_lp},
                          {"or_loss", loss.or_loss},
                          {"total", loss.total}};
}

} // namespace vulread::orpo
