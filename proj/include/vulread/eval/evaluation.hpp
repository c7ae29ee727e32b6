// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 vulread contributors

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "vulread/distill/types.hpp"

namespace vulread::eval {

// ---- parsing model output ---------------------------------------------------

enum class Verdict { Vulnerable, Safe, Unparseable };

std::string_view to_string(Verdict v) noexcept;

/// First "VERDICT:" line wins; otherwise the first standalone word VULNERABLE or
/// SAFE (case-insensitive); otherwise Unparseable.
Verdict parse_verdict(std::string_view text);

/// CWE ids written as CWE-79, CWE 79, CWE79 or cwe-079, normalized to CWE-<n>.
/// Digits must be 1 to 5 long and not followed by another digit.
std::set<std::string> extract_cwe_ids(std::string_view text);

// ---- metrics ----------------------------------------------------------------

/// 2PR/(P+R), or 0 when P+R == 0.
double f1_score(double precision, double recall) noexcept;

struct BinaryMetrics {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    std::size_t unparseable = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Positive class is Vulnerable; Unparseable predictions count as Safe.
/// Errc::EmptyInput for no pairs; Errc::InvalidArgument for gold labels other than 0/1.
BinaryMetrics binary_metrics(const std::vector<std::pair<int, Verdict>>& pairs);

struct ClassMetrics {
    std::size_t tp = 0, fp = 0, fn = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;

    friend bool operator==(const ClassMetrics&, const ClassMetrics&) = default;
};

struct MultilabelMetrics {
    double micro_p = 0.0, micro_r = 0.0, micro_f1 = 0.0;
    double macro_p = 0.0, macro_r = 0.0, macro_f1 = 0.0;
    std::map<std::string, ClassMetrics> per_class; // universe = gold ∪ predicted ids
};

/// Errc::EmptyInput for no pairs.
MultilabelMetrics multilabel_metrics(const std::vector<std::pair<std::set<std::string>, std::set<std::string>>>& pairs);

struct Prediction {
    std::string id;
    std::string output_text;
};

std::vector<Prediction> parse_predictions(const std::vector<nlohmann::json>& records);

struct MetricsReport {
    BinaryMetrics binary;
    MultilabelMetrics multilabel;
    std::size_t samples = 0;
    std::size_t unparseable_count = 0;
    std::size_t missing_predictions = 0; // gold samples without a prediction, scored as Unparseable
    std::size_t unknown_predictions = 0; // predictions without a gold sample, ignored
};

/// Joins predictions to gold samples by id. Binary metrics use parse_verdict; the
/// multi-label metrics compare extract_cwe_ids(output) against each sample's gold
/// CWE set (empty for safe samples) over every gold sample.
MetricsReport evaluate(const std::vector<distill::FunctionSample>& gold, const std::vector<Prediction>& predictions);

nlohmann::json report_to_json(const MetricsReport& report);
/// Aligned plain-text table, 4 decimals; `per_class` appends the per-CWE rows.
std::string report_to_table(const MetricsReport& report, bool per_class);

// ---- dataset preparation ----------------------------------------------------

/// Smallest-numbered CWE id, or "" when the sample has none.
std::string primary_cwe(const distill::FunctionSample& sample);

struct SplitResult {
    std::vector<distill::FunctionSample> train;
    std::vector<distill::FunctionSample> val;
    std::vector<distill::FunctionSample> test;
};

/// Seeded shuffle, then val and test get floor(n * r / sum(r)) samples each and
/// train gets the rest. With `stratify`, each (label, primary CWE) stratum is
/// allocated proportionally (largest remainder) so that the split sizes are the
/// same as without stratification. Errc::InvalidArgument for a zero ratio.
SplitResult split(const std::vector<distill::FunctionSample>& samples, std::array<unsigned, 3> ratios,
                  std::uint64_t seed, bool stratify = false);

struct BalanceReport {
    std::size_t input = 0;
    std::size_t excluded_without_cwe = 0;
    std::size_t target = 0;
    std::size_t output = 0;
    std::size_t kept_vulnerable = 0;
    std::size_t kept_safe = 0;
    bool noop = false;
    std::string note;
    std::map<std::string, std::size_t> per_cwe_before; // vulnerable samples per CWE id
    std::map<std::string, std::size_t> per_cwe_after;
    std::vector<std::string> eliminated; // CWE ids present before but absent after
};

struct BalanceResult {
    std::vector<distill::FunctionSample> samples; // input order
    BalanceReport report;
};

/// Drops vulnerable samples without CWE ids, keeps every remaining vulnerable
/// sample and fills the rest of `target_total` with seeded uniformly sampled safe
/// samples. When the vulnerable samples alone exceed the target they are
/// downsampled per primary CWE in proportion to category size, keeping at least
/// one per category while the target allows it.
BalanceResult balance(const std::vector<distill::FunctionSample>& samples, std::size_t target_total,
                      std::uint64_t seed);

nlohmann::json balance_report_to_json(const BalanceReport& report);

} // namespace vulread::eval
