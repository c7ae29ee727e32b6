// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 vulread contributors

#include <algorithm>
#include <numeric>
#include <random>

#include "vulread/common.hpp"
#include "vulread/error.hpp"
#include "vulread/eval/evaluation.hpp"

namespace vulread::eval {

using distill::FunctionSample;

std::string primary_cwe(const FunctionSample& sample) {
    std::string best;
    for (const auto& id : sample.cwe_ids) {
        if (best.empty() || cwe_number(id) < cwe_number(best)) best = id;
    }
    return best;
}

namespace {

// Largest-remainder allocation of `total` units across groups in proportion to
// weights[i] * numerator / denominator, capped by capacity[i]. Ties go to the
// lower group index.
std::vector<std::size_t> allocate(const std::vector<std::size_t>& weights, std::size_t numerator,
                                  std::size_t denominator, std::size_t total, const std::vector<std::size_t>& capacity) {
    std::vector<std::size_t> out(weights.size());
    std::vector<std::size_t> remainder(weights.size());
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        out[i] = std::min(weights[i] * numerator / denominator, capacity[i]);
        remainder[i] = weights[i] * numerator % denominator;
        assigned += out[i];
    }
    std::vector<std::size_t> order(weights.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    while (assigned < total) {
        bool progress = false;
        for (const auto i : order) {
            if (assigned == total) break;
            if (out[i] < capacity[i]) {
                ++out[i];
                ++assigned;
                progress = true;
            }
        }
        if (!progress) break;
    }
    return out;
}

using Strata = std::map<std::pair<int, std::string>, std::vector<std::size_t>>;

Strata stratify_indices(const std::vector<FunctionSample>& samples) {
    Strata strata;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        strata[{samples[i].label, primary_cwe(samples[i])}].push_back(i);
    }
    return strata;
}

} // namespace

SplitResult split(const std::vector<FunctionSample>& samples, std::array<unsigned, 3> ratios, std::uint64_t seed,
                  bool stratify) {
    if (ratios[0] == 0 || ratios[1] == 0 || ratios[2] == 0) {
        throw Error(Errc::InvalidArgument, "split ratios must be positive");
    }
    const std::size_t sum = std::size_t{ratios[0]} + ratios[1] + ratios[2];
    const auto n = samples.size();
    const auto n_val = n * ratios[1] / sum;
    const auto n_test = n * ratios[2] / sum;
    std::mt19937_64 rng(seed);
    SplitResult out;

    if (!stratify) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        deterministic_shuffle(order, rng);
        const auto n_train = n - n_val - n_test;
        for (std::size_t i = 0; i < n; ++i) {
            auto& bucket = i < n_train ? out.train : i < n_train + n_val ? out.val : out.test;
            bucket.push_back(samples[order[i]]);
        }
        return out;
    }

    auto strata = stratify_indices(samples);
    std::vector<std::size_t> sizes;
    for (auto& [key, members] : strata) {
        deterministic_shuffle(members, rng);
        sizes.push_back(members.size());
    }
    const auto val = allocate(sizes, ratios[1], sum, n_val, sizes);
    std::vector<std::size_t> left(sizes.size());
    for (std::size_t g = 0; g < sizes.size(); ++g) left[g] = sizes[g] - val[g];
    const auto test = allocate(sizes, ratios[2], sum, n_test, left);
    std::size_t g = 0;
    for (const auto& [key, members] : strata) {
        const auto n_train = members.size() - val[g] - test[g];
        for (std::size_t i = 0; i < members.size(); ++i) {
            auto& bucket = i < n_train ? out.train : i < n_train + val[g] ? out.val : out.test;
            bucket.push_back(samples[members[i]]);
        }
        ++g;
    }
    return out;
}

BalanceResult balance(const std::vector<FunctionSample>& samples, std::size_t target_total, std::uint64_t seed) {
    BalanceResult result;
    auto& report = result.report;
    report.input = samples.size();
    report.target = target_total;

    std::vector<std::size_t> positives;
    std::vector<std::size_t> negatives;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        if (s.label == 1 && s.cwe_ids.empty()) {
            ++report.excluded_without_cwe;
            continue;
        }
        (s.label == 1 ? positives : negatives).push_back(i);
        if (s.label == 1) {
            for (const auto& id : s.cwe_ids) ++report.per_cwe_before[id];
        }
    }

    std::vector<std::size_t> keep;
    const auto eligible = positives.size() + negatives.size();
    std::mt19937_64 rng(seed);
    if (target_total >= eligible) {
        report.noop = true;
        report.note = "target " + std::to_string(target_total) + " >= " + std::to_string(eligible) +
                      " eligible samples; nothing downsampled";
        keep = positives;
        keep.insert(keep.end(), negatives.begin(), negatives.end());
    } else if (positives.size() <= target_total) {
        keep = positives;
        deterministic_shuffle(negatives, rng);
        keep.insert(keep.end(), negatives.begin(),
                    negatives.begin() + static_cast<std::ptrdiff_t>(target_total - positives.size()));
    } else {
        report.note = "vulnerable samples exceed the target; downsampled per primary CWE";
        std::map<std::string, std::vector<std::size_t>> categories;
        for (const auto i : positives) categories[primary_cwe(samples[i])].push_back(i);
        std::vector<std::vector<std::size_t>*> groups;
        for (auto& [id, members] : categories) {
            deterministic_shuffle(members, rng);
            groups.push_back(&members);
        }
        std::vector<std::size_t> quota(groups.size(), 0);
        if (groups.size() > target_total) {
            // Not every category fits: one sample each for the largest categories.
            std::vector<std::size_t> order(groups.size());
            std::iota(order.begin(), order.end(), 0);
            std::stable_sort(order.begin(), order.end(),
                             [&](std::size_t a, std::size_t b) { return groups[a]->size() > groups[b]->size(); });
            for (std::size_t k = 0; k < target_total; ++k) quota[order[k]] = 1;
        } else {
            std::vector<std::size_t> extra(groups.size());
            std::size_t extra_total = 0;
            for (std::size_t g = 0; g < groups.size(); ++g) {
                quota[g] = 1;
                extra[g] = groups[g]->size() - 1;
                extra_total += extra[g];
            }
            const auto budget = target_total - groups.size();
            if (extra_total > 0) {
                const auto add = allocate(extra, budget, extra_total, budget, extra);
                for (std::size_t g = 0; g < groups.size(); ++g) quota[g] += add[g];
            }
        }
        for (std::size_t g = 0; g < groups.size(); ++g) {
            keep.insert(keep.end(), groups[g]->begin(), groups[g]->begin() + static_cast<std::ptrdiff_t>(quota[g]));
        }
    }

    std::sort(keep.begin(), keep.end());
    for (const auto i : keep) {
        const auto& s = samples[i];
        result.samples.push_back(s);
        if (s.label == 1) {
            ++report.kept_vulnerable;
            for (const auto& id : s.cwe_ids) ++report.per_cwe_after[id];
        } else {
            ++report.kept_safe;
        }
    }
    for (const auto& [id, count] : report.per_cwe_before) {
        if (!report.per_cwe_after.count(id)) report.eliminated.push_back(id);
    }
    report.output = result.samples.size();
    return result;
}

nlohmann::json balance_report_to_json(const BalanceReport& report) {
    return nlohmann::json{{"input", report.input},
                          {"excluded_without_cwe", report.excluded_without_cwe},
                          {"target", report.target},
                          {"output", report.output},
                          {"kept_vulnerable", report.kept_vulnerable},
                          {"kept_safe", report.kept_safe},
                          {"noop", report.noop},
                          {"note", report.note},
                          {"per_cwe_before", report.per_cwe_before},
                          {"per_cwe_after", report.per_cwe_after},
                          {"eliminated", report.eliminated}};
}

} // namespace vulread::eval
