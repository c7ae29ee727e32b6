// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 vulread contributors

#pragma once

#include <cstddef>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "vulread/distill/types.hpp"
#include "vulread/kg/embedding.hpp"
#include "vulread/kg/graph.hpp"

namespace vulread::retrieval {

enum class EntityKind { ApiCall, Identifier, Library, PathLiteral, Other };

std::string_view to_string(EntityKind kind) noexcept;

struct CodeEntity {
    std::string name;
    EntityKind kind = EntityKind::Identifier;
    std::size_t occurrences = 1;

    friend bool operator==(const CodeEntity&, const CodeEntity&) = default;
};

/// Token lists driving the lexical scanner.
struct Lexicon {
    std::set<std::string, std::less<>> stoplist;  // language keywords, never reported
    std::set<std::string, std::less<>> libraries; // reported as Library

    /// C/C++ keywords plus common libc/POSIX/OpenSSL library names.
    static const Lexicon& default_c();
};

/// One token per line; blank lines and lines starting with '#' are ignored.
std::set<std::string, std::less<>> parse_token_list(std::string_view text);

/// Lexical pass over source text. Identifiers followed by '(' are ApiCall,
/// quoted strings containing '/' or '\' are PathLiteral, library-list tokens
/// are Library, other identifiers are Identifier; stoplist tokens, numbers and
/// comments are skipped. `#include` targets are reported as Library when their
/// first path component is a known library, Other otherwise. Duplicates are
/// merged per (name, kind); the result is sorted by (occurrences desc, name asc).
std::vector<CodeEntity> extract_entities(std::string_view code, const Lexicon& lexicon = Lexicon::default_c());

/// Inverse of to_string; unknown or empty kinds map to Other.
EntityKind entity_kind_from_string(std::string_view kind) noexcept;

/// LLM-extraction mode: entities taken from the ENTITIES section of a parsed
/// model response instead of the lexical scanner. Each (name, kind) is counted
/// once per listing; ordering matches extract_entities.
std::vector<CodeEntity> entities_from_rationale(const distill::StructuredRationale& rationale);

/// KG node id used for a mined entity name ("entity:<name>", case-sensitive).
std::string entity_node_id(std::string_view name);

struct ScoredId {
    std::string id;
    double score = 0.0;

    friend bool operator==(const ScoredId&, const ScoredId&) = default;
};

struct RetrievalContext {
    std::vector<CodeEntity> entities; // the entities that were found in the KG
    std::vector<ScoredId> classes;    // normalized AssociatedWith mass, desc
    std::vector<ScoredId> candidate_cwes; // normalized IndicatorOf mass, desc, <= k
    std::string rendered;

    friend bool operator==(const RetrievalContext&, const RetrievalContext&) = default;
};

struct RetrievalOptions {
    std::size_t k = 5;
    std::size_t max_rendered_chars = 1200;
};

/// Rendered block when nothing matched.
inline constexpr std::string_view kNoMatchesBlock = "KG CLASSES: none\nKG CANDIDATE: none (no KG matches)";

/// Follows IndicatorOf edges of every entity present in the KG. A CWE's confidence
/// is its share of the total IndicatorOf weight over the matching entities; the top
/// k are kept. If the rendered block exceeds max_rendered_chars, lowest-confidence
/// candidates are dropped first (from both the block and candidate_cwes).
/// Requires a frozen graph (Errc::GraphNotFrozen).
RetrievalContext retrieve(const kg::KnowledgeGraph& graph, const std::vector<CodeEntity>& entities,
                          const RetrievalOptions& options = {});

std::string render_context(const std::vector<ScoredId>& classes, const std::vector<ScoredId>& candidates);

struct MinedRationale {
    const distill::StructuredRationale* rationale = nullptr;
    const distill::FunctionSample* sample = nullptr;
};

struct AugmentOptions {
    std::size_t min_count = 3;
    double min_similarity = 0.5;
    kg::EmbeddingProvider* embedder = nullptr; // optional similarity route
};

struct AugmentReport {
    std::size_t entities_added = 0;
    std::size_t edges_added = 0;
    std::size_t edges_updated = 0;
    std::size_t skipped_unknown_targets = 0;

    friend bool operator==(const AugmentReport&, const AugmentReport&) = default;
};

/// Mines entity -> CWE and entity -> class co-occurrences from valid vulnerable
/// rationales (verdict Vulnerable on a label-1 sample; CWE attributions are
/// restricted to the sample's ground truth). Pairs seen in >= min_count
/// rationales become Mined edges weighted by the count. With an embedder, pairs
/// seen fewer times are linked (EmbeddingMatch, weight = cosine) when the entity
/// name is at least min_similarity similar to the CWE or class description.
/// Existing edge weights are never decreased.
AugmentReport augment(kg::KnowledgeGraph& graph, const std::vector<MinedRationale>& rationales,
                      const AugmentOptions& options = {});

} // namespace vulread::retrieval
