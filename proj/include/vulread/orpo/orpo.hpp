// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 vulread contributors

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace vulread::orpo {

/// Per-token natural-log probabilities of one completion.
struct TokenLogProbs {
    std::vector<int> tokens;
    std::vector<double> logprobs;
};

/// Errc::EmptySequence for an empty sequence; Errc::InvalidArgument for a length
/// mismatch or a logprob that is non-finite or positive.
void validate(const TokenLogProbs& seq);

double avg_logprob(const TokenLogProbs& seq);
double sft_nll(const TokenLogProbs& seq);

/// Mean logprobs above this value make the odds overflow.
inline constexpr double kMaxAvgLogprob = -1e-15;

/// log(P / (1 - P)) with P = exp(avg_lp), evaluated as avg_lp - log(-expm1(avg_lp)).
/// Errc::DegenerateProbability when avg_lp > kMaxAvgLogprob.
double log_odds(double avg_lp);

/// -log sigmoid(log_odds(chosen) - log_odds(rejected)), always >= 0.
/// Errc::InvalidArgument for non-finite or positive inputs.
double or_loss(double chosen_avg_lp, double rejected_avg_lp);

struct OrLossGrad {
    double loss = 0.0;
    double d_chosen = 0.0;   // d loss / d chosen_avg_lp
    double d_rejected = 0.0; // d loss / d rejected_avg_lp
};
OrLossGrad or_loss_grad(double chosen_avg_lp, double rejected_avg_lp);

/// min(avg_lp, kMaxAvgLogprob); increments *clamped when the value was changed.
double clamp_avg_logprob(double avg_lp, std::size_t* clamped = nullptr) noexcept;

struct OrpoConfig {
    double lambda = 0.1;
};

double orpo_total(double sft, double or_term, const OrpoConfig& config);

// ---- toy bigram model -------------------------------------------------------

inline constexpr std::size_t kMaxToyVocab = 32;

/// Bigram softmax LM: logits(i, j) scores token j following token i.
class ToyLmParams {
public:
    /// All logits zero. Errc::InvalidArgument unless 1 <= vocab <= kMaxToyVocab.
    explicit ToyLmParams(std::size_t vocab);
    /// Logits drawn uniformly from [-scale, scale].
    static ToyLmParams random(std::size_t vocab, std::uint64_t seed, double scale = 1.0);

    [[nodiscard]] std::size_t vocab() const noexcept { return vocab_; }
    [[nodiscard]] double logit(std::size_t context, std::size_t next) const { return theta_[context * vocab_ + next]; }
    double& logit(std::size_t context, std::size_t next) { return theta_[context * vocab_ + next]; }

    /// Row-major flat parameter view.
    [[nodiscard]] std::span<const double> flat() const noexcept { return theta_; }
    std::span<double> flat() noexcept { return theta_; }

    /// log softmax of one row.
    [[nodiscard]] std::vector<double> row_logprobs(std::size_t context) const;

    friend bool operator==(const ToyLmParams&, const ToyLmParams&) = default;

private:
    std::size_t vocab_;
    std::vector<double> theta_;
};

/// Logprobs of `completion` given `prompt`; each token is conditioned on its
/// predecessor and the first on the last prompt token. Errc::TokenOutOfRange for
/// ids outside [0, V); Errc::EmptySequence for an empty prompt or completion.
TokenLogProbs toy_forward(const ToyLmParams& params, std::span<const int> prompt, std::span<const int> completion);

/// A tokenized preference record.
struct ToyPair {
    std::string id;
    std::vector<int> prompt;
    std::vector<int> chosen;
    std::vector<int> rejected;
};

struct PairLoss {
    double sft_nll = 0.0;
    double chosen_avg_lp = 0.0;
    double rejected_avg_lp = 0.0;
    double or_loss = 0.0;
    double total = 0.0;
    std::size_t clamped = 0;
};

PairLoss evaluate_pair(const ToyLmParams& params, const ToyPair& pair, const OrpoConfig& config);

/// Analytic dL/dtheta of the pair's ORPO loss, in flat-parameter order.
std::vector<double> loss_gradient(const ToyLmParams& params, const ToyPair& pair, const OrpoConfig& config,
                                  PairLoss* loss = nullptr);

struct StepResult {
    ToyLmParams params;
    double loss; // before the update
};

/// One gradient-descent step on a single pair. Errc::InvalidArgument unless
/// learning_rate > 0 and lambda >= 0.
StepResult toy_train_step(const ToyLmParams& params, const ToyPair& pair, double learning_rate,
                          const OrpoConfig& config);

/// One full-batch step on the mean loss over `pairs`; returns the pre-update mean loss.
double toy_batch_step(ToyLmParams& params, const std::vector<ToyPair>& pairs, double learning_rate,
                      const OrpoConfig& config);

/// Max relative error between the analytic gradient and central finite differences.
/// Denominator is max(|analytic|, |numeric|, 1e-8).
double grad_check(const ToyLmParams& params, const ToyPair& pair, const OrpoConfig& config, double step = 1e-6);

// ---- training driver --------------------------------------------------------

struct TrainOptions {
    OrpoConfig orpo;
    double learning_rate = 0.05;
    std::size_t steps = 300;
    std::uint64_t seed = 42;
    double init_scale = 0.1;
};

/// Reads orpo.lambda, orpo.learning_rate, orpo.steps and orpo.seed from a config
/// object (either nested {"orpo": {...}} or flat dotted keys). Missing keys keep
/// their defaults. Errc::SchemaError for wrong types or invalid values.
TrainOptions train_options_from_config(const nlohmann::json& config, TrainOptions defaults = {});

struct TrainReport {
    ToyLmParams params;
    std::vector<double> loss_trajectory; // pre-update mean loss per step
    double final_loss = 0.0;
    std::size_t separated = 0;           // pairs with avg_lp(chosen) > avg_lp(rejected)
    std::size_t clamped = 0;
    std::vector<PairLoss> final_pair_losses;
};

/// Full-batch gradient descent from ToyLmParams::random(vocab, seed, init_scale).
TrainReport toy_train(const std::vector<ToyPair>& pairs, std::size_t vocab, const TrainOptions& options);

/// `count` pairs over vocabulary `vocab`; chosen tokens come from the lower half of
/// the vocabulary and rejected tokens from the upper half.
std::vector<ToyPair> synthetic_pairs(std::size_t count, std::size_t vocab, std::uint64_t seed);

/// Whitespace tokens hashed into [0, vocab).
std::vector<int> toy_tokenize(std::string_view text, std::size_t vocab);

/// {id, sft_nll, chosen_avg_lp, rejected_avg_lp, or_loss, total}
nlohmann::json audit_record(const std::string& id, const PairLoss& loss);

} // namespace vulread::orpo
