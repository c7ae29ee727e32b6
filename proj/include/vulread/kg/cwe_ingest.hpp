// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 vulread contributors

#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "vulread/kg/graph.hpp"

namespace vulread::kg {

enum class CorpusFormat { Xml, Csv };

struct CweRecord {
    std::string id; // canonical "CWE-<n>"
    std::string name;
    std::string description; // Description, plus " " + Extended Description when present
    std::string abstraction; // Base, Variant, Class, Pillar, ...
    std::vector<std::string> parents;

    friend bool operator==(const CweRecord&, const CweRecord&) = default;
};

struct IngestReport {
    std::size_t parsed = 0;
    std::size_t dropped_empty_description = 0;
    std::size_t dropped_deprecated = 0;
    std::size_t dangling_parent_links = 0;
    std::string corpus_version; // empty when the source does not carry one
};

struct ParsedCorpus {
    std::vector<CweRecord> records; // ordered by CWE number
    IngestReport report;
};

/// Exact header of the CSV fixture format.
inline constexpr std::string_view kCweCsvHeader =
    "CWE-ID,Name,Abstraction,Description,Extended Description,Related Weaknesses";

/// Parses a CWE corpus. Deprecated entries (Status=Deprecated, or a name starting
/// with "DEPRECATED:") are dropped, as are entries with an empty description.
/// Parent links to ids absent from the surviving records are removed and counted.
///
/// CSV input must contain every column of kCweCsvHeader (extra columns such as
/// MITRE's "Status" are accepted; MITRE's "Weakness Abstraction" is accepted as
/// the abstraction column). Related Weaknesses may use either `ChildOf:CWE-<n>`
/// tokens separated by ';' or MITRE's `::NATURE:ChildOf:CWE ID:<n>:...` form.
///
/// Errors: Errc::DecodeError when the bytes are not UTF-8; Errc::SchemaError when a
/// required column or element is missing.
ParsedCorpus parse_cwe_corpus(std::string_view source, CorpusFormat format);

/// Renders records in the CSV fixture format; parse_cwe_corpus(write_cwe_csv(r), Csv)
/// yields r back for any records whose parents are all present.
std::string write_cwe_csv(const std::vector<CweRecord>& records);

struct LoadReport {
    std::size_t added = 0; // Cwe nodes that did not exist before
    std::size_t child_edges = 0;
    std::size_t skipped_parent_links = 0;
};

/// One Cwe node per record (abstraction stored as an attribute), one ChildOf edge
/// per parent that resolves to a Cwe node. Idempotent.
LoadReport load_into_graph(const std::vector<CweRecord>& records, KnowledgeGraph& graph);

} // namespace vulread::kg
