// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 vulread contributors

#include "vulread/kg/graph.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "vulread/common.hpp"
#include "vulread/error.hpp"

namespace vulread::kg {

std::string_view to_string(NodeKind kind) noexcept {
    switch (kind) {
        case NodeKind::AbstractClass: return "AbstractClass";
        case NodeKind::Cwe: return "Cwe";
        case NodeKind::Entity: return "Entity";
    }
    return "?";
}

std::string_view to_string(EdgeKind kind) noexcept {
    switch (kind) {
        case EdgeKind::MemberOf: return "MemberOf";
        case EdgeKind::ChildOf: return "ChildOf";
        case EdgeKind::AssociatedWith: return "AssociatedWith";
        case EdgeKind::IndicatorOf: return "IndicatorOf";
    }
    return "?";
}

std::string_view to_string(Provenance provenance) noexcept {
    switch (provenance) {
        case Provenance::Curated: return "Curated";
        case Provenance::KeywordMatch: return "KeywordMatch";
        case Provenance::EmbeddingMatch: return "EmbeddingMatch";
        case Provenance::Mined: return "Mined";
    }
    return "?";
}

NodeKind parse_node_kind(std::string_view name) {
    for (auto k : {NodeKind::AbstractClass, NodeKind::Cwe, NodeKind::Entity}) {
        if (to_string(k) == name) return k;
    }
    throw Error(Errc::CorruptInput, "unknown node kind '" + std::string(name) + "'");
}

EdgeKind parse_edge_kind(std::string_view name) {
    for (auto k : {EdgeKind::MemberOf, EdgeKind::ChildOf, EdgeKind::AssociatedWith, EdgeKind::IndicatorOf}) {
        if (to_string(k) == name) return k;
    }
    throw Error(Errc::CorruptInput, "unknown edge kind '" + std::string(name) + "'");
}

Provenance parse_provenance(std::string_view name) {
    for (auto p : {Provenance::Curated, Provenance::KeywordMatch, Provenance::EmbeddingMatch, Provenance::Mined}) {
        if (to_string(p) == name) return p;
    }
    throw Error(Errc::CorruptInput, "unknown provenance '" + std::string(name) + "'");
}

NodeKind source_kind(EdgeKind kind) noexcept {
    switch (kind) {
        case EdgeKind::MemberOf:
        case EdgeKind::ChildOf: return NodeKind::Cwe;
        case EdgeKind::AssociatedWith:
        case EdgeKind::IndicatorOf: return NodeKind::Entity;
    }
    return NodeKind::Entity;
}

NodeKind target_kind(EdgeKind kind) noexcept {
    switch (kind) {
        case EdgeKind::MemberOf:
        case EdgeKind::AssociatedWith: return NodeKind::AbstractClass;
        case EdgeKind::ChildOf:
        case EdgeKind::IndicatorOf: return NodeKind::Cwe;
    }
    return NodeKind::Cwe;
}

void KnowledgeGraph::require_mutable() const {
    if (frozen_) throw Error(Errc::FrozenGraph, "graph is frozen");
}

std::string KnowledgeGraph::upsert_node(GraphNode node) {
    require_mutable();
    if (node.id.empty()) throw Error(Errc::InvalidArgument, "node id is empty");
    if (node.kind == NodeKind::Cwe && !is_canonical_cwe_id(node.id)) {
        throw Error(Errc::MalformedCweId, "'" + node.id + "' is not of the form CWE-<digits>");
    }
    auto it = nodes_.find(node.id);
    if (it != nodes_.end() && it->second.kind != node.kind) {
        const auto out = out_index_.find(node.id);
        const auto in = in_index_.find(node.id);
        const bool attached = (out != out_index_.end() && !out->second.empty()) ||
                              (in != in_index_.end() && !in->second.empty());
        if (attached) {
            throw Error(Errc::KindMismatch, "cannot change kind of '" + node.id + "' while edges are attached");
        }
    }
    std::string id = node.id;
    if (it != nodes_.end()) {
        it->second = std::move(node);
    } else {
        nodes_.emplace(id, std::move(node));
    }
    return id;
}

const GraphEdge& KnowledgeGraph::link(std::string_view source, EdgeKind kind, std::string_view target,
                                      double weight, Provenance provenance) {
    require_mutable();
    const auto* src = find_node(source);
    if (src == nullptr) throw Error(Errc::UnknownNode, std::string(source));
    const auto* dst = find_node(target);
    if (dst == nullptr) throw Error(Errc::UnknownNode, std::string(target));
    if (src->kind != source_kind(kind) || dst->kind != target_kind(kind)) {
        throw Error(Errc::KindMismatch, std::string(to_string(kind)) + " requires " +
                                            std::string(to_string(source_kind(kind))) + " -> " +
                                            std::string(to_string(target_kind(kind))) + ", got " +
                                            std::string(to_string(src->kind)) + " -> " +
                                            std::string(to_string(dst->kind)));
    }
    if (!std::isfinite(weight) || weight < 0.0) {
        throw Error(Errc::InvalidArgument, "edge weight must be finite and non-negative");
    }
    EdgeKey key{std::string(source), std::string(target), kind};
    auto [it, inserted] = edges_.try_emplace(key);
    it->second = GraphEdge{std::string(source), std::string(target), kind, weight, provenance};
    if (inserted) {
        out_index_[std::string(source)].insert(key);
        in_index_[std::string(target)].insert(key);
    }
    return it->second;
}

void KnowledgeGraph::set_attribute(std::string key, std::string value) {
    require_mutable();
    attributes_[std::move(key)] = std::move(value);
}

KnowledgeGraph KnowledgeGraph::unfrozen_copy() const {
    KnowledgeGraph copy = *this;
    copy.frozen_ = false;
    return copy;
}

bool KnowledgeGraph::contains(std::string_view id) const { return nodes_.find(id) != nodes_.end(); }

const GraphNode& KnowledgeGraph::node(std::string_view id) const {
    const auto* n = find_node(id);
    if (n == nullptr) throw Error(Errc::UnknownNode, std::string(id));
    return *n;
}

const GraphNode* KnowledgeGraph::find_node(std::string_view id) const {
    auto it = nodes_.find(id);
    return it == nodes_.end() ? nullptr : &it->second;
}

const GraphEdge* KnowledgeGraph::find_edge(std::string_view source, std::string_view target, EdgeKind kind) const {
    auto it = edges_.find(EdgeKey{std::string(source), std::string(target), kind});
    return it == edges_.end() ? nullptr : &it->second;
}

std::vector<Neighbor> KnowledgeGraph::neighbors(std::string_view id, std::optional<EdgeKind> edge_kind,
                                                Direction direction) const {
    if (!contains(id)) throw Error(Errc::UnknownNode, std::string(id));
    std::vector<Neighbor> result;
    const auto& index = direction == Direction::Out ? out_index_ : in_index_;
    auto it = index.find(id);
    if (it == index.end()) return result;
    for (const auto& key : it->second) {
        if (edge_kind && std::get<2>(key) != *edge_kind) continue;
        const auto& edge = edges_.at(key);
        const auto& other = direction == Direction::Out ? edge.target : edge.source;
        result.push_back(Neighbor{nodes_.find(other)->second, edge});
    }
    std::sort(result.begin(), result.end(), [](const Neighbor& a, const Neighbor& b) {
        if (a.edge.weight != b.edge.weight) return a.edge.weight > b.edge.weight;
        if (a.node.id != b.node.id) return a.node.id < b.node.id;
        return a.edge.kind < b.edge.kind;
    });
    return result;
}

std::size_t KnowledgeGraph::degree(std::string_view id, EdgeKind kind, Direction direction) const {
    const auto& index = direction == Direction::Out ? out_index_ : in_index_;
    auto it = index.find(id);
    if (it == index.end()) return 0;
    return static_cast<std::size_t>(std::count_if(it->second.begin(), it->second.end(),
                                                  [kind](const EdgeKey& k) { return std::get<2>(k) == kind; }));
}

std::vector<const GraphNode*> KnowledgeGraph::nodes_of_kind(NodeKind kind) const {
    std::vector<const GraphNode*> out;
    for (const auto& [id, node] : nodes_) {
        if (node.kind == kind) out.push_back(&node);
    }
    return out;
}

bool KnowledgeGraph::has_dangling_edges() const {
    return std::any_of(edges_.begin(), edges_.end(), [this](const auto& entry) {
        return !contains(entry.second.source) || !contains(entry.second.target);
    });
}

// ---- serialization ----------------------------------------------------------

std::string serialize(const KnowledgeGraph& graph) {
    using nlohmann::json;
    json nodes = json::array();
    for (const auto& [id, node] : graph.nodes()) {
        nodes.push_back(json{{"id", node.id},
                             {"kind", to_string(node.kind)},
                             {"name", node.name},
                             {"description", node.description},
                             {"attributes", node.attributes}});
    }
    std::vector<const GraphEdge*> edges;
    edges.reserve(graph.edge_count());
    for (const auto& [key, edge] : graph.edges()) edges.push_back(&edge);
    std::sort(edges.begin(), edges.end(), [](const GraphEdge* a, const GraphEdge* b) {
        return std::tuple(std::string_view(a->source), std::string_view(a->target), to_string(a->kind)) <
               std::tuple(std::string_view(b->source), std::string_view(b->target), to_string(b->kind));
    });
    json edge_array = json::array();
    for (const auto* edge : edges) {
        edge_array.push_back(json{{"source", edge->source},
                                  {"target", edge->target},
                                  {"kind", to_string(edge->kind)},
                                  {"weight", edge->weight},
                                  {"provenance", to_string(edge->provenance)}});
    }
    json doc{{"version", kGraphFormatVersion}, {"nodes", std::move(nodes)}, {"edges", std::move(edge_array)}};
    if (!graph.attributes().empty()) doc["attributes"] = graph.attributes();
    return doc.dump(1, ' ', false, json::error_handler_t::replace) + "\n";
}

namespace {

const nlohmann::json& require_field(const nlohmann::json& object, const char* field) {
    if (!object.is_object() || !object.contains(field)) {
        throw Error(Errc::CorruptInput, std::string("missing field '") + field + "'");
    }
    return object.at(field);
}

std::string require_string(const nlohmann::json& object, const char* field) {
    const auto& value = require_field(object, field);
    if (!value.is_string()) throw Error(Errc::CorruptInput, std::string("field '") + field + "' is not a string");
    return value.get<std::string>();
}

} // namespace

KnowledgeGraph deserialize(std::string_view bytes) {
    using nlohmann::json;
    json doc;
    try {
        doc = json::parse(bytes);
    } catch (const json::exception& e) {
        throw Error(Errc::CorruptInput, e.what());
    }
    const auto& version = require_field(doc, "version");
    if (!version.is_number_integer() || version.get<int>() != kGraphFormatVersion) {
        throw Error(Errc::CorruptInput, "unsupported KG format version");
    }
    const auto& nodes = require_field(doc, "nodes");
    const auto& edges = require_field(doc, "edges");
    if (!nodes.is_array() || !edges.is_array()) throw Error(Errc::CorruptInput, "nodes/edges must be arrays");

    KnowledgeGraph graph;
    try {
        for (const auto& n : nodes) {
            GraphNode node;
            node.id = require_string(n, "id");
            if (graph.contains(node.id)) throw Error(Errc::CorruptInput, "duplicate node id '" + node.id + "'");
            node.kind = parse_node_kind(require_string(n, "kind"));
            node.name = require_string(n, "name");
            node.description = require_string(n, "description");
            const auto& attrs = require_field(n, "attributes");
            if (!attrs.is_object()) throw Error(Errc::CorruptInput, "attributes must be an object");
            for (const auto& [key, value] : attrs.items()) {
                if (!value.is_string()) throw Error(Errc::CorruptInput, "attribute values must be strings");
                node.attributes.emplace(key, value.get<std::string>());
            }
            graph.upsert_node(std::move(node));
        }
        for (const auto& e : edges) {
            const auto& weight = require_field(e, "weight");
            if (!weight.is_number()) throw Error(Errc::CorruptInput, "edge weight must be a number");
            graph.link(require_string(e, "source"), parse_edge_kind(require_string(e, "kind")),
                       require_string(e, "target"), weight.get<double>(),
                       parse_provenance(require_string(e, "provenance")));
        }
        if (doc.contains("attributes")) {
            const auto& attrs = doc.at("attributes");
            if (!attrs.is_object()) throw Error(Errc::CorruptInput, "graph attributes must be an object");
            for (const auto& [key, value] : attrs.items()) {
                if (!value.is_string()) throw Error(Errc::CorruptInput, "attribute values must be strings");
                graph.set_attribute(key, value.get<std::string>());
            }
        }
    } catch (const Error& e) {
        if (e.code() == Errc::CorruptInput) throw;
        throw Error(Errc::CorruptInput, e.what());
    }
    return graph;
}

namespace {

std::string quote(std::string_view text) {
    std::string out = "\"";
    for (char c : text) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default: out += c;
        }
    }
    out += '"';
    return out;
}

std::string format_weight(double weight) { return nlohmann::json(weight).dump(); }

} // namespace

std::string export_statements(const KnowledgeGraph& graph) {
    std::string out;
    for (const auto& [id, node] : graph.nodes()) {
        out += "MERGE (n:" + std::string(to_string(node.kind)) + " {id: " + quote(node.id) + "}) SET n.name = " +
               quote(node.name) + ", n.description = " + quote(node.description);
        for (const auto& [key, value] : node.attributes) {
            // attribute keys are free text; backtick-quote them as property names
            std::string escaped;
            for (char c : key) escaped += c == '`' ? std::string("``") : std::string(1, c);
            out += ", n.`" + escaped + "` = " + quote(value);
        }
        out += ";\n";
    }
    for (const auto& [key, edge] : graph.edges()) {
        const auto& src = graph.node(edge.source);
        const auto& dst = graph.node(edge.target);
        out += "MATCH (a:" + std::string(to_string(src.kind)) + " {id: " + quote(edge.source) + "}), (b:" +
               std::string(to_string(dst.kind)) + " {id: " + quote(edge.target) + "}) MERGE (a)-[r:" +
               std::string(to_string(edge.kind)) + "]->(b) SET r.weight = " + format_weight(edge.weight) +
               ", r.provenance = " + quote(to_string(edge.provenance)) + ";\n";
    }
    return out;
}

} // namespace vulread::kg
