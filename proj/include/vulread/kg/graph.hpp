// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 vulread contributors

#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

namespace vulread::kg {

enum class NodeKind { AbstractClass, Cwe, Entity };

/// Each edge kind fixes its endpoint kinds:
///   MemberOf       Cwe    -> AbstractClass
///   ChildOf        Cwe    -> Cwe
///   AssociatedWith Entity -> AbstractClass
///   IndicatorOf    Entity -> Cwe
enum class EdgeKind { MemberOf, ChildOf, AssociatedWith, IndicatorOf };

enum class Provenance { Curated, KeywordMatch, EmbeddingMatch, Mined };

enum class Direction { Out, In };

std::string_view to_string(NodeKind kind) noexcept;
std::string_view to_string(EdgeKind kind) noexcept;
std::string_view to_string(Provenance provenance) noexcept;

// Parsers throw Errc::CorruptInput on unknown names.
NodeKind parse_node_kind(std::string_view name);
EdgeKind parse_edge_kind(std::string_view name);
Provenance parse_provenance(std::string_view name);

NodeKind source_kind(EdgeKind kind) noexcept;
NodeKind target_kind(EdgeKind kind) noexcept;

struct GraphNode {
    std::string id;
    NodeKind kind = NodeKind::Entity;
    std::string name;
    std::string description;
    std::map<std::string, std::string> attributes;

    friend bool operator==(const GraphNode&, const GraphNode&) = default;
};

struct GraphEdge {
    std::string source;
    std::string target;
    EdgeKind kind = EdgeKind::MemberOf;
    double weight = 1.0;
    Provenance provenance = Provenance::Curated;

    friend bool operator==(const GraphEdge&, const GraphEdge&) = default;
};

struct Neighbor {
    GraphNode node;
    GraphEdge edge;
};

/// Typed property graph over abstraction classes, CWEs and mined code entities.
///
/// Built by a single writer, then frozen. Once frozen every mutator throws
/// Errc::FrozenGraph and the instance may be shared read-only across threads.
/// Copies carry the frozen flag with them; use unfrozen_copy() to start a new
/// build phase from a frozen graph.
class KnowledgeGraph {
public:
    using EdgeKey = std::tuple<std::string, std::string, EdgeKind>;

    /// Inserts or fully replaces a node. Replacing a node with a different kind
    /// is rejected while edges that depend on the old kind are attached.
    std::string upsert_node(GraphNode node);

    /// Adds or overwrites the (source, target, kind) edge.
    const GraphEdge& link(std::string_view source, EdgeKind kind, std::string_view target, double weight,
                          Provenance provenance);

    void set_attribute(std::string key, std::string value);

    void freeze() noexcept { frozen_ = true; }
    [[nodiscard]] bool frozen() const noexcept { return frozen_; }
    [[nodiscard]] KnowledgeGraph unfrozen_copy() const;

    [[nodiscard]] bool contains(std::string_view id) const;
    [[nodiscard]] const GraphNode& node(std::string_view id) const;
    [[nodiscard]] const GraphNode* find_node(std::string_view id) const;
    [[nodiscard]] const GraphEdge* find_edge(std::string_view source, std::string_view target, EdgeKind kind) const;

    /// Neighbor pairs sorted by (edge weight desc, neighbor id asc).
    [[nodiscard]] std::vector<Neighbor> neighbors(std::string_view id, std::optional<EdgeKind> edge_kind,
                                                  Direction direction) const;

    /// Number of edges of `kind` leaving (Out) or entering (In) `id`.
    [[nodiscard]] std::size_t degree(std::string_view id, EdgeKind kind, Direction direction) const;

    [[nodiscard]] std::vector<const GraphNode*> nodes_of_kind(NodeKind kind) const;

    [[nodiscard]] const std::map<std::string, GraphNode, std::less<>>& nodes() const noexcept { return nodes_; }
    [[nodiscard]] const std::map<EdgeKey, GraphEdge>& edges() const noexcept { return edges_; }
    [[nodiscard]] const std::map<std::string, std::string>& attributes() const noexcept { return attributes_; }

    /// Full scan for edges whose endpoints are missing. Nodes cannot be removed, so
    /// this only fails if an invariant was broken internally.
    [[nodiscard]] bool has_dangling_edges() const;

    [[nodiscard]] std::size_t node_count() const noexcept { return nodes_.size(); }
    [[nodiscard]] std::size_t edge_count() const noexcept { return edges_.size(); }

    /// Equality over nodes, edges and graph attributes; the frozen flag is ignored.
    friend bool operator==(const KnowledgeGraph& a, const KnowledgeGraph& b) {
        return a.nodes_ == b.nodes_ && a.edges_ == b.edges_ && a.attributes_ == b.attributes_;
    }

private:
    void require_mutable() const;

    std::map<std::string, GraphNode, std::less<>> nodes_;
    std::map<EdgeKey, GraphEdge> edges_;
    // adjacency indexes into edges_ keys
    std::map<std::string, std::set<EdgeKey>, std::less<>> out_index_;
    std::map<std::string, std::set<EdgeKey>, std::less<>> in_index_;
    std::map<std::string, std::string> attributes_;
    bool frozen_ = false;
};

/// KG file format version written by serialize().
inline constexpr int kGraphFormatVersion = 1;

/// Byte-deterministic JSON document: nodes ordered by id, edges by
/// (source, target, kind), object keys sorted.
std::string serialize(const KnowledgeGraph& graph);

/// Throws Errc::CorruptInput on malformed or truncated input. The result is unfrozen.
KnowledgeGraph deserialize(std::string_view bytes);

/// Graph-database statements, one per line: MERGE for every node, then a
/// MATCH ... MERGE per edge. Node labels are NodeKind names and relationship
/// types are EdgeKind names.
std::string export_statements(const KnowledgeGraph& graph);

} // namespace vulread::kg
