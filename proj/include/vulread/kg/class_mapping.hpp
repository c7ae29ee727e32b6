// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 vulread contributors

#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "vulread/kg/cwe_ingest.hpp"
#include "vulread/kg/embedding.hpp"
#include "vulread/kg/graph.hpp"

namespace vulread::kg {

/// One abstraction class. Keywords are lowercase; a keyword containing whitespace
/// is a phrase (substring match), anything else is a single token matched on word
/// boundaries. A trailing '*' turns a single token into a prefix ("sanitiz*"
/// matches "sanitize" and "sanitization").
struct AbstractClassDef {
    std::string id;
    std::string name;
    std::string description;
    std::vector<std::string> keywords;

    friend bool operator==(const AbstractClassDef&, const AbstractClassDef&) = default;
};

/// The 13 built-in abstraction classes.
const std::vector<AbstractClassDef>& default_classes();

/// Reads a class config document: array of {id, name, description, keywords}.
/// Throws Errc::SchemaError on missing fields, duplicate ids or empty keyword lists.
std::vector<AbstractClassDef> parse_class_config(std::string_view json_text);
std::string write_class_config(const std::vector<AbstractClassDef>& classes);

/// True when `keyword` occurs in `lowercase_text` under the matching rules above.
bool keyword_matches(std::string_view lowercase_text, std::string_view keyword);

/// Every class with at least one keyword in the description, sorted by class id.
std::set<std::string> keyword_assign(std::string_view description, const std::vector<AbstractClassDef>& classes);
std::set<std::string> keyword_assign(const CweRecord& record, const std::vector<AbstractClassDef>& classes);

/// Class-description embeddings, computed once per run.
class ClassEmbeddingIndex {
public:
    ClassEmbeddingIndex(const std::vector<AbstractClassDef>& classes, EmbeddingProvider& embedder);

    struct Entry {
        std::string class_id;
        Embedding vector;
    };
    /// Sorted by class id.
    [[nodiscard]] const std::vector<Entry>& entries() const noexcept { return entries_; }

private:
    std::vector<Entry> entries_;
};

struct EmbeddingMatch {
    std::string class_id;
    double similarity = 0.0;
};

/// argmax over classes of cosine(embed(description), class embedding); ties go to
/// the smaller class id. Throws Errc::ZeroVector for degenerate embeddings.
EmbeddingMatch embedding_assign(std::string_view description, const ClassEmbeddingIndex& index,
                                EmbeddingProvider& embedder);
EmbeddingMatch embedding_assign(const CweRecord& record, const ClassEmbeddingIndex& index,
                                EmbeddingProvider& embedder);

enum class MappingMethod { Keyword, Embedding };

struct CweAssignment {
    std::vector<std::string> classes;
    MappingMethod method = MappingMethod::Keyword;
    std::optional<double> similarity; // set for embedding assignments

    friend bool operator==(const CweAssignment&, const CweAssignment&) = default;
};

struct MappingReport {
    std::size_t keyword_assigned = 0;
    std::size_t embedding_assigned = 0;
    std::map<std::string, CweAssignment> per_cwe;

    friend bool operator==(const MappingReport&, const MappingReport&) = default;
};

/// Upserts one AbstractClass node per definition (keywords kept as an attribute).
void add_class_nodes(KnowledgeGraph& graph, const std::vector<AbstractClassDef>& classes);

/// Keyword-first, embedding-fallback assignment of every Cwe node in the graph.
/// Keyword hits become MemberOf edges (KeywordMatch, weight 1.0); a CWE without
/// keyword hits gets exactly one MemberOf edge to the most similar class
/// (EmbeddingMatch, weight = cosine). The embedder is only consulted for CWEs
/// without keyword hits, and class embeddings are computed on first use.
///
/// `embedder` may be null when every CWE is expected to match keywords;
/// otherwise a CWE without hits raises Errc::InvalidArgument.
MappingReport map_corpus(KnowledgeGraph& graph, const std::vector<AbstractClassDef>& classes,
                         EmbeddingProvider* embedder);

/// Same, with class embeddings computed ahead of time. `embedder` then only sees
/// CWE descriptions. The index must have been built from `classes`.
MappingReport map_corpus(KnowledgeGraph& graph, const std::vector<AbstractClassDef>& classes,
                         const ClassEmbeddingIndex& index, EmbeddingProvider& embedder);

} // namespace vulread::kg
