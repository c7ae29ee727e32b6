// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 vulread contributors

#include "vulread/kg/class_mapping.hpp"

#include <algorithm>
#include <cctype>
#include <memory>

#include <nlohmann/json.hpp>

#include "vulread/common.hpp"
#include "vulread/error.hpp"

namespace vulread::kg {

const std::vector<AbstractClassDef>& default_classes() {
    static const std::vector<AbstractClassDef> classes = {
        {"FileAndPathHandling", "File and Path Handling",
         "Weaknesses in how files, directories and path names are resolved, opened, created or "
         "uploaded, including traversal outside a restricted directory and link following.",
         {"file", "files", "path", "pathname", "directory", "directories", "filename", "symlink",
          "symbolic link", "traversal", "upload", "link following"}},
        {"InputValidation", "Input Validation",
         "Weaknesses where externally supplied input is not validated, checked or sanitized before use.",
         {"input", "validat*", "sanitiz*", "untrusted", "malformed", "unchecked", "well-formed",
          "user-controlled", "externally-controlled"}},
        {"AccessControl", "Access Control",
         "Weaknesses in authorization and permission checks that let actors reach resources or "
         "functionality they should not have access to.",
         {"access control", "authoriz*", "unauthoriz*", "permission*", "privilege*", "ownership",
          "restricted", "role"}},
        {"MemoryManagement", "Memory Management",
         "Weaknesses in allocation, deallocation and bounds of memory buffers and pointers.",
         {"memory", "buffer", "pointer", "heap", "stack", "free", "freed", "alloc*", "out-of-bounds",
          "double free", "use after free", "dangling", "dereference*", "memcpy", "strcpy"}},
        {"Injection", "Injection",
         "Weaknesses where data is interpreted as code or commands: SQL, OS command, script, "
         "template and other injection into a downstream interpreter.",
         {"injection", "inject*", "sql", "command", "commands", "script", "scripting", "cross-site",
          "xss", "interpreter", "eval", "special elements", "neutraliz*", "query"}},
        {"Cryptography", "Cryptography",
         "Weaknesses in the use of cryptographic algorithms, keys, randomness, hashing and certificates.",
         {"crypto*", "encrypt*", "decrypt*", "cipher", "hash", "hashing", "random", "randomness",
          "entropy", "certificate*", "signature*", "key", "keys", "prng", "nonce", "salt"}},
        {"AuthenticationAndSession", "Authentication and Session",
         "Weaknesses in how identities are proven and sessions are established, maintained and ended.",
         {"authenticat*", "password*", "credential*", "session*", "login", "logon", "cookie*", "token*",
          "brute force", "identity"}},
        {"ConcurrencyAndRaceConditions", "Concurrency and Race Conditions",
         "Weaknesses arising from concurrent execution: races, missing synchronization, deadlocks and "
         "time-of-check/time-of-use gaps.",
         {"race", "concurren*", "thread*", "synchroniz*", "lock", "locking", "deadlock", "mutex",
          "toctou", "time-of-check", "signal handler", "parallel", "simultaneous*"}},
        {"ResourceLifecycle", "Resource Lifecycle",
         "Weaknesses in acquiring, limiting, releasing and expiring resources such as handles, "
         "connections and objects, including exhaustion and leaks.",
         {"resource", "resources", "leak", "exhaust*", "release*", "consumption", "expir*", "lifetime",
          "initializ*", "cleanup", "handle", "handles", "throttl*"}},
        {"InformationExposure", "Information Exposure",
         "Weaknesses that reveal sensitive information to unauthorized actors through output, logs, "
         "errors, storage or transmission.",
         {"sensitive", "exposure", "expose*", "disclos*", "leak*", "cleartext", "plaintext", "privacy",
          "private", "log", "logs", "logging", "error message*", "confidential*"}},
        {"NumericAndTypeErrors", "Numeric and Type Errors",
         "Weaknesses in arithmetic and type handling: overflow, wraparound, truncation, sign and "
         "conversion errors, division by zero and type confusion.",
         {"integer", "numeric", "overflow", "underflow", "wraparound", "wrap-around", "truncat*",
          "signed", "unsigned", "conversion", "cast", "casting", "divide", "division", "type confusion",
          "precision", "arithmetic"}},
        {"ConfigurationAndDeployment", "Configuration and Deployment",
         "Weaknesses in configuration, defaults, environment and deployment settings, including "
         "hard-coded values and debug features left enabled.",
         {"configur*", "default", "defaults", "deploy*", "debug", "environment", "setting", "settings",
          "hard-coded", "hardcoded", "installation", "dependency", "dependencies"}},
        {"LogicAndStateErrors", "Logic and State Errors",
         "Weaknesses in program logic and state management: incorrect calculations, comparisons, "
         "control flow, assumptions and unexpected states.",
         {"logic", "state", "states", "incorrect", "comparison", "calculation", "assumption*",
          "unexpected", "behavior", "workflow", "control flow", "condition", "loop"}},
    };
    return classes;
}

std::vector<AbstractClassDef> parse_class_config(std::string_view json_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::SchemaError, std::string("class config: ") + e.what());
    }
    if (!doc.is_array()) throw Error(Errc::SchemaError, "class config must be an array");
    std::vector<AbstractClassDef> classes;
    std::set<std::string> seen;
    for (const auto& item : doc) {
        AbstractClassDef def;
        try {
            def.id = item.at("id").get<std::string>();
            def.name = item.at("name").get<std::string>();
            def.description = item.at("description").get<std::string>();
            for (const auto& kw : item.at("keywords")) def.keywords.push_back(to_lower(trim(kw.get<std::string>())));
        } catch (const nlohmann::json::exception& e) {
            throw Error(Errc::SchemaError, std::string("class config entry: ") + e.what());
        }
        if (def.id.empty()) throw Error(Errc::SchemaError, "class id is empty");
        if (!seen.insert(def.id).second) throw Error(Errc::SchemaError, "duplicate class id '" + def.id + "'");
        def.keywords.erase(std::remove(def.keywords.begin(), def.keywords.end(), std::string()), def.keywords.end());
        if (def.keywords.empty()) throw Error(Errc::SchemaError, "class '" + def.id + "' has no keywords");
        classes.push_back(std::move(def));
    }
    return classes;
}

std::string write_class_config(const std::vector<AbstractClassDef>& classes) {
    nlohmann::json doc = nlohmann::json::array();
    for (const auto& c : classes) {
        doc.push_back({{"id", c.id}, {"name", c.name}, {"description", c.description}, {"keywords", c.keywords}});
    }
    return doc.dump(2) + "\n";
}

namespace {

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_'; }

} // namespace

bool keyword_matches(std::string_view text, std::string_view keyword) {
    if (keyword.empty()) return false;
    if (keyword.find_first_of(" \t") != std::string_view::npos) {
        return text.find(keyword) != std::string_view::npos;
    }
    const bool prefix = keyword.back() == '*';
    if (prefix) keyword.remove_suffix(1);
    if (keyword.empty()) return false;
    std::size_t pos = 0;
    while ((pos = text.find(keyword, pos)) != std::string_view::npos) {
        const bool left_ok = pos == 0 || !is_word_char(text[pos - 1]) || !is_word_char(keyword.front());
        const auto end = pos + keyword.size();
        const bool right_ok = prefix || end == text.size() || !is_word_char(text[end]) || !is_word_char(keyword.back());
        if (left_ok && right_ok) return true;
        ++pos;
    }
    return false;
}

std::set<std::string> keyword_assign(std::string_view description, const std::vector<AbstractClassDef>& classes) {
    const auto lowered = to_lower(description);
    std::set<std::string> hits;
    for (const auto& c : classes) {
        if (std::any_of(c.keywords.begin(), c.keywords.end(),
                        [&lowered](const std::string& kw) { return keyword_matches(lowered, kw); })) {
            hits.insert(c.id);
        }
    }
    return hits;
}

std::set<std::string> keyword_assign(const CweRecord& record, const std::vector<AbstractClassDef>& classes) {
    return keyword_assign(record.description, classes);
}

ClassEmbeddingIndex::ClassEmbeddingIndex(const std::vector<AbstractClassDef>& classes, EmbeddingProvider& embedder) {
    std::vector<const AbstractClassDef*> sorted;
    for (const auto& c : classes) sorted.push_back(&c);
    std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->id < b->id; });
    for (const auto* c : sorted) {
        auto vec = embedder.embed(c->description);
        if (vec.size() != embedder.dimension()) {
            throw Error(Errc::InvalidArgument, "embedder returned a vector of unexpected dimension");
        }
        entries_.push_back(Entry{c->id, std::move(vec)});
    }
}

EmbeddingMatch embedding_assign(std::string_view description, const ClassEmbeddingIndex& index,
                                EmbeddingProvider& embedder) {
    if (index.entries().empty()) throw Error(Errc::InvalidArgument, "no classes to assign to");
    const auto query = embedder.embed(description);
    std::optional<EmbeddingMatch> best;
    for (const auto& entry : index.entries()) {
        const double sim = cosine_similarity(query, entry.vector);
        if (!best || sim > best->similarity) best = EmbeddingMatch{entry.class_id, sim};
    }
    return *best;
}

EmbeddingMatch embedding_assign(const CweRecord& record, const ClassEmbeddingIndex& index,
                                EmbeddingProvider& embedder) {
    return embedding_assign(record.description, index, embedder);
}

void add_class_nodes(KnowledgeGraph& graph, const std::vector<AbstractClassDef>& classes) {
    for (const auto& c : classes) {
        GraphNode node;
        node.id = c.id;
        node.kind = NodeKind::AbstractClass;
        node.name = c.name;
        node.description = c.description;
        std::string keywords;
        for (const auto& kw : c.keywords) {
            if (!keywords.empty()) keywords += ", ";
            keywords += kw;
        }
        node.attributes["keywords"] = keywords;
        graph.upsert_node(std::move(node));
    }
}

namespace {

MappingReport map_corpus_impl(KnowledgeGraph& graph, const std::vector<AbstractClassDef>& classes,
                              const ClassEmbeddingIndex* precomputed, EmbeddingProvider* embedder) {
    if (graph.frozen()) throw Error(Errc::FrozenGraph, "cannot map a frozen graph");
    for (const auto& c : classes) {
        const auto* node = graph.find_node(c.id);
        if (node == nullptr || node->kind != NodeKind::AbstractClass) {
            throw Error(Errc::MissingClassNode, "class node '" + c.id + "' is not in the graph");
        }
    }
    const auto cwes = graph.nodes_of_kind(NodeKind::Cwe);
    if (cwes.empty()) throw Error(Errc::InvalidArgument, "graph has no Cwe nodes to map");

    // nodes_of_kind walks an ordered map, so assignment runs in CWE-id order
    MappingReport report;
    std::unique_ptr<ClassEmbeddingIndex> index;
    for (const auto* cwe : cwes) {
        CweAssignment assignment;
        const auto hits = keyword_assign(cwe->description, classes);
        if (!hits.empty()) {
            assignment.method = MappingMethod::Keyword;
            assignment.classes.assign(hits.begin(), hits.end());
            ++report.keyword_assigned;
        } else {
            if (embedder == nullptr) {
                throw Error(Errc::InvalidArgument, cwe->id + " has no keyword match and no embedder is configured");
            }
            if (precomputed == nullptr && !index) index = std::make_unique<ClassEmbeddingIndex>(classes, *embedder);
            const auto match =
                embedding_assign(cwe->description, precomputed != nullptr ? *precomputed : *index, *embedder);
            assignment.method = MappingMethod::Embedding;
            assignment.classes = {match.class_id};
            assignment.similarity = match.similarity;
            ++report.embedding_assigned;
        }
        report.per_cwe.emplace(cwe->id, std::move(assignment));
    }
    for (const auto& [cwe_id, assignment] : report.per_cwe) {
        for (const auto& class_id : assignment.classes) {
            if (assignment.method == MappingMethod::Keyword) {
                graph.link(cwe_id, EdgeKind::MemberOf, class_id, 1.0, Provenance::KeywordMatch);
            } else {
                // cosine can be negative; edge weights cannot
                graph.link(cwe_id, EdgeKind::MemberOf, class_id, std::max(0.0, *assignment.similarity),
                           Provenance::EmbeddingMatch);
            }
        }
    }
    return report;
}

} // namespace

MappingReport map_corpus(KnowledgeGraph& graph, const std::vector<AbstractClassDef>& classes,
                         EmbeddingProvider* embedder) {
    return map_corpus_impl(graph, classes, nullptr, embedder);
}

MappingReport map_corpus(KnowledgeGraph& graph, const std::vector<AbstractClassDef>& classes,
                         const ClassEmbeddingIndex& index, EmbeddingProvider& embedder) {
    if (index.entries().size() != classes.size()) {
        throw Error(Errc::InvalidArgument, "class embedding index does not match the class list");
    }
    return map_corpus_impl(graph, classes, &index, &embedder);
}

} // namespace vulread::kg
