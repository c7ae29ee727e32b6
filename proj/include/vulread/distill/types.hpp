// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 vulread contributors

#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace vulread::distill {

/// One labeled function. label = 1 requires at least one ground-truth CWE id.
struct FunctionSample {
    std::string id;
    std::string code;
    int label = 0;
    std::set<std::string> cwe_ids;
    std::string source;
    std::string language;

    friend bool operator==(const FunctionSample&, const FunctionSample&) = default;
};

/// Throws Errc::SchemaError on missing fields, bad labels, malformed CWE ids,
/// empty code, or a vulnerable sample without CWE ids (unless allow_unlabeled_cwe,
/// which dataset balancing needs in order to count and drop such samples itself).
FunctionSample sample_from_json(const nlohmann::json& record, bool allow_unlabeled_cwe = false);
nlohmann::json sample_to_json(const FunctionSample& sample);
std::vector<FunctionSample> read_samples(const std::filesystem::path& path, bool allow_unlabeled_cwe = false);
std::string write_samples(const std::vector<FunctionSample>& samples);

enum class VerdictLabel { Vulnerable, Safe };

inline int label_of(VerdictLabel v) noexcept { return v == VerdictLabel::Vulnerable ? 1 : 0; }
inline VerdictLabel verdict_of(int label) noexcept { return label == 1 ? VerdictLabel::Vulnerable : VerdictLabel::Safe; }

struct RationaleEntity {
    std::string name;
    std::string kind;

    friend bool operator==(const RationaleEntity&, const RationaleEntity&) = default;
};

struct ClassLink {
    std::size_t entity_index = 0;
    std::string class_id;

    friend bool operator==(const ClassLink&, const ClassLink&) = default;
};

/// Entity -> class -> CWE alignment extracted from one teacher response.
struct StructuredRationale {
    VerdictLabel verdict = VerdictLabel::Safe;
    std::vector<RationaleEntity> entities;
    std::vector<ClassLink> class_links;
    std::set<std::string> cwe_attribution; // empty for Safe
    std::string summary;

    friend bool operator==(const StructuredRationale&, const StructuredRationale&) = default;
};

/// Valid (true label) and flawed (flipped label) rationales for one sample.
struct RationalePair {
    std::string sample_id;
    StructuredRationale valid;
    StructuredRationale flawed;
    std::string teacher_model;
    std::string valid_raw; // CVE-masked teacher text
    std::string flawed_raw;
};

struct PreferenceRecord {
    std::string id;
    std::string prompt;
    std::string chosen;
    std::string rejected;

    friend bool operator==(const PreferenceRecord&, const PreferenceRecord&) = default;
};

} // namespace vulread::distill
