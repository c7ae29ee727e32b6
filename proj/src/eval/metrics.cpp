// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 vulread contributors

#include <cctype>
#include <cmath>
#include <cstdio>
#include <regex>

#include "vulread/common.hpp"
#include "vulread/error.hpp"
#include "vulread/eval/evaluation.hpp"

namespace vulread::eval {

std::string_view to_string(Verdict v) noexcept {
    switch (v) {
        case Verdict::Vulnerable: return "vulnerable";
        case Verdict::Safe: return "safe";
        case Verdict::Unparseable: return "unparseable";
    }
    return "unparseable";
}

namespace {

bool word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_'; }

// First standalone occurrence of VULNERABLE or SAFE in `text`.
Verdict scan_words(std::string_view text) {
    const auto lower = to_lower(text);
    for (std::size_t i = 0; i < lower.size(); ++i) {
        if (i > 0 && word_char(lower[i - 1])) continue;
        for (const auto& [word, verdict] : {std::pair<std::string_view, Verdict>{"vulnerable", Verdict::Vulnerable},
                                            std::pair<std::string_view, Verdict>{"safe", Verdict::Safe}}) {
            if (lower.compare(i, word.size(), word) == 0) {
                const auto end = i + word.size();
                if (end == lower.size() || !word_char(lower[end])) return verdict;
            }
        }
    }
    return Verdict::Unparseable;
}

} // namespace

Verdict parse_verdict(std::string_view text) {
    std::size_t pos = 0;
    while (pos < text.size()) {
        const auto eol = std::min(text.find('\n', pos), text.size());
        const auto line = trim(text.substr(pos, eol - pos));
        if (starts_with_icase(line, "VERDICT:")) {
            const auto v = scan_words(line.substr(8));
            if (v != Verdict::Unparseable) return v;
            break; // a malformed VERDICT line falls through to the word scan
        }
        pos = eol + 1;
    }
    return scan_words(text);
}

std::set<std::string> extract_cwe_ids(std::string_view text) {
    static const std::regex pattern("(^|[^A-Za-z0-9_])CWE[\\s-]?([0-9]{1,5})(?![0-9])",
                                    std::regex::icase | std::regex::optimize);
    std::set<std::string> ids;
    const std::string s(text);
    for (auto it = std::sregex_iterator(s.begin(), s.end(), pattern); it != std::sregex_iterator(); ++it) {
        auto digits = (*it)[2].str();
        const auto nz = digits.find_first_not_of('0');
        digits = nz == std::string::npos ? "0" : digits.substr(nz);
        ids.insert("CWE-" + digits);
    }
    return ids;
}

double f1_score(double precision, double recall) noexcept {
    const double sum = precision + recall;
    return sum > 0.0 ? 2.0 * precision * recall / sum : 0.0;
}

namespace {

double ratio(std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

void check_f1(double p, double r, double f1) {
    if (std::abs(f1 - f1_score(p, r)) > 1e-12) throw Error(Errc::InvalidArgument, "F1 identity violated");
}

} // namespace

BinaryMetrics binary_metrics(const std::vector<std::pair<int, Verdict>>& pairs) {
    if (pairs.empty()) throw Error(Errc::EmptyInput, "no prediction pairs");
    BinaryMetrics m;
    for (const auto& [gold, predicted] : pairs) {
        if (gold != 0 && gold != 1) throw Error(Errc::InvalidArgument, "gold label must be 0 or 1");
        if (predicted == Verdict::Unparseable) ++m.unparseable;
        const bool positive = predicted == Verdict::Vulnerable;
        if (gold == 1 && positive) ++m.tp;
        else if (gold == 0 && positive) ++m.fp;
        else if (gold == 1) ++m.fn;
        else ++m.tn;
    }
    m.precision = ratio(m.tp, m.tp + m.fp);
    m.recall = ratio(m.tp, m.tp + m.fn);
    m.f1 = f1_score(m.precision, m.recall);
    check_f1(m.precision, m.recall, m.f1);
    return m;
}

MultilabelMetrics multilabel_metrics(const std::vector<std::pair<std::set<std::string>, std::set<std::string>>>& pairs) {
    if (pairs.empty()) throw Error(Errc::EmptyInput, "no prediction pairs");
    MultilabelMetrics m;
    for (const auto& [gold, predicted] : pairs) {
        for (const auto& c : gold) {
            auto& cls = m.per_class[c];
            if (predicted.count(c)) ++cls.tp;
            else ++cls.fn;
        }
        for (const auto& c : predicted) {
            if (!gold.count(c)) ++m.per_class[c].fp;
        }
    }
    std::size_t tp = 0, fp = 0, fn = 0;
    for (auto& [id, cls] : m.per_class) {
        cls.precision = ratio(cls.tp, cls.tp + cls.fp);
        cls.recall = ratio(cls.tp, cls.tp + cls.fn);
        cls.f1 = f1_score(cls.precision, cls.recall);
        check_f1(cls.precision, cls.recall, cls.f1);
        tp += cls.tp;
        fp += cls.fp;
        fn += cls.fn;
        m.macro_p += cls.precision;
        m.macro_r += cls.recall;
        m.macro_f1 += cls.f1;
    }
    m.micro_p = ratio(tp, tp + fp);
    m.micro_r = ratio(tp, tp + fn);
    m.micro_f1 = f1_score(m.micro_p, m.micro_r);
    check_f1(m.micro_p, m.micro_r, m.micro_f1);
    if (!m.per_class.empty()) {
        const auto n = static_cast<double>(m.per_class.size());
        m.macro_p /= n;
        m.macro_r /= n;
        m.macro_f1 /= n;
    }
    return m;
}

std::vector<Prediction> parse_predictions(const std::vector<nlohmann::json>& records) {
    std::vector<Prediction> out;
    out.reserve(records.size());
    for (const auto& r : records) {
        try {
            Prediction p;
            p.id = r.at("id").is_string() ? r.at("id").get<std::string>() : r.at("id").dump();
            p.output_text = r.at("output_text").get<std::string>();
            out.push_back(std::move(p));
        } catch (const nlohmann::json::exception& e) {
            throw Error(Errc::SchemaError, std::string("prediction record: ") + e.what());
        }
    }
    return out;
}

MetricsReport evaluate(const std::vector<distill::FunctionSample>& gold, const std::vector<Prediction>& predictions) {
    std::map<std::string, const Prediction*> by_id;
    for (const auto& p : predictions) by_id.emplace(p.id, &p);
    std::set<std::string> gold_ids;

    MetricsReport report;
    std::vector<std::pair<int, Verdict>> binary;
    std::vector<std::pair<std::set<std::string>, std::set<std::string>>> multilabel;
    for (const auto& sample : gold) {
        gold_ids.insert(sample.id);
        const auto it = by_id.find(sample.id);
        Verdict verdict = Verdict::Unparseable;
        std::set<std::string> predicted;
        if (it == by_id.end()) {
            ++report.missing_predictions;
        } else {
            verdict = parse_verdict(it->second->output_text);
            predicted = extract_cwe_ids(it->second->output_text);
        }
        binary.emplace_back(sample.label, verdict);
        multilabel.emplace_back(sample.label == 1 ? sample.cwe_ids : std::set<std::string>{}, std::move(predicted));
    }
    for (const auto& [id, p] : by_id) {
        if (!gold_ids.count(id)) ++report.unknown_predictions;
    }
    report.samples = gold.size();
    report.binary = binary_metrics(binary);
    report.unparseable_count = report.binary.unparseable;
    report.multilabel = multilabel_metrics(multilabel);
    return report;
}

nlohmann::json report_to_json(const MetricsReport& report) {
    const auto& b = report.binary;
    const auto& m = report.multilabel;
    nlohmann::json per_class = nlohmann::json::object();
    for (const auto& [id, c] : m.per_class) {
        per_class[id] = {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn},
                         {"precision", c.precision}, {"recall", c.recall}, {"f1", c.f1}};
    }
    return nlohmann::json{
        {"samples", report.samples},
        {"unparseable_count", report.unparseable_count},
        {"missing_predictions", report.missing_predictions},
        {"unknown_predictions", report.unknown_predictions},
        {"binary",
         {{"precision", b.precision}, {"recall", b.recall}, {"f1", b.f1},
          {"tp", b.tp}, {"fp", b.fp}, {"fn", b.fn}, {"tn", b.tn}}},
        {"multilabel",
         {{"micro_p", m.micro_p}, {"micro_r", m.micro_r}, {"micro_f1", m.micro_f1},
          {"macro_p", m.macro_p}, {"macro_r", m.macro_r}, {"macro_f1", m.macro_f1}}},
        {"per_class", per_class}};
}

std::string report_to_table(const MetricsReport& report, bool per_class) {
    std::string out;
    char line[160];
    auto row = [&](const char* name, double p, double r, double f1) {
        std::snprintf(line, sizeof line, "%-12s %9.4f %9.4f %9.4f\n", name, p, r, f1);
        out += line;
    };
    std::snprintf(line, sizeof line, "%-12s %9s %9s %9s\n", "metric", "precision", "recall", "f1");
    out += line;
    row("binary", report.binary.precision, report.binary.recall, report.binary.f1);
    row("cwe-micro", report.multilabel.micro_p, report.multilabel.micro_r, report.multilabel.micro_f1);
    row("cwe-macro", report.multilabel.macro_p, report.multilabel.macro_r, report.multilabel.macro_f1);
    std::snprintf(line, sizeof line, "samples: %zu  unparseable: %zu  missing predictions: %zu\n", report.samples,
                  report.unparseable_count, report.missing_predictions);
    out += line;
    if (per_class) {
        std::snprintf(line, sizeof line, "\n%-12s %5s %5s %5s %9s %9s %9s\n", "cwe", "tp", "fp", "fn", "precision",
                      "recall", "f1");
        out += line;
        for (const auto& [id, c] : report.multilabel.per_class) {
            std::snprintf(line, sizeof line, "%-12s %5zu %5zu %5zu %9.4f %9.4f %9.4f\n", id.c_str(), c.tp, c.fp, c.fn,
                          c.precision, c.recall, c.f1);
            out += line;
        }
    }
    return out;
}

} // namespace vulread::eval
