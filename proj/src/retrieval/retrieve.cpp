// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 vulread contributors

#include <algorithm>
#include <cstdio>
#include <map>
#include <optional>

#include "vulread/common.hpp"
#include "vulread/error.hpp"
#include "vulread/retrieval/retrieval.hpp"

namespace vulread::retrieval {

using kg::Direction;
using kg::EdgeKind;
using kg::NodeKind;

std::string entity_node_id(std::string_view name) { return "entity:" + std::string(name); }

namespace {

std::vector<ScoredId> normalize(const std::map<std::string, double>& mass) {
    double total = 0.0;
    for (const auto& [id, w] : mass) total += w;
    std::vector<ScoredId> out;
    if (total <= 0.0) return out;
    for (const auto& [id, w] : mass) {
        if (w > 0.0) out.push_back(ScoredId{id, w / total});
    }
    std::sort(out.begin(), out.end(), [](const ScoredId& a, const ScoredId& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.id < b.id;
    });
    return out;
}

} // namespace

std::string render_context(const std::vector<ScoredId>& classes, const std::vector<ScoredId>& candidates) {
    if (classes.empty() && candidates.empty()) return std::string(kNoMatchesBlock);
    std::string out = "KG CLASSES: ";
    if (classes.empty()) out += "none";
    for (std::size_t i = 0; i < classes.size(); ++i) {
        if (i > 0) out += ',';
        out += classes[i].id;
    }
    for (const auto& c : candidates) {
        char confidence[32];
        std::snprintf(confidence, sizeof confidence, "%.2f", c.score);
        out += "\nKG CANDIDATE: " + c.id + " (confidence " + confidence + ")";
    }
    return out;
}

RetrievalContext retrieve(const kg::KnowledgeGraph& graph, const std::vector<CodeEntity>& entities,
                          const RetrievalOptions& options) {
    if (!graph.frozen()) throw Error(Errc::GraphNotFrozen, "retrieval requires a frozen graph");
    if (options.k == 0) throw Error(Errc::InvalidArgument, "k must be positive");

    RetrievalContext context;
    std::map<std::string, double> cwe_mass;
    std::map<std::string, double> class_mass;
    std::set<std::string> seen_names;
    for (const auto& entity : entities) {
        if (!seen_names.insert(entity.name).second) continue;
        const auto* node = graph.find_node(entity_node_id(entity.name));
        if (node == nullptr || node->kind != NodeKind::Entity) continue;
        context.entities.push_back(entity);
        for (const auto& n : graph.neighbors(node->id, EdgeKind::IndicatorOf, Direction::Out)) {
            cwe_mass[n.node.id] += n.edge.weight;
        }
        for (const auto& n : graph.neighbors(node->id, EdgeKind::AssociatedWith, Direction::Out)) {
            class_mass[n.node.id] += n.edge.weight;
        }
    }
    context.classes = normalize(class_mass);
    context.candidate_cwes = normalize(cwe_mass);
    if (context.candidate_cwes.size() > options.k) context.candidate_cwes.resize(options.k);

    context.rendered = render_context(context.classes, context.candidate_cwes);
    while (context.rendered.size() > options.max_rendered_chars && !context.candidate_cwes.empty()) {
        context.candidate_cwes.pop_back();
        context.rendered = render_context(context.classes, context.candidate_cwes);
    }
    while (context.rendered.size() > options.max_rendered_chars && !context.classes.empty()) {
        context.classes.pop_back();
        context.rendered = render_context(context.classes, context.candidate_cwes);
    }
    if (context.rendered.size() > options.max_rendered_chars) context.rendered.resize(options.max_rendered_chars);
    return context;
}

AugmentReport augment(kg::KnowledgeGraph& graph, const std::vector<MinedRationale>& rationales,
                      const AugmentOptions& options) {
    if (graph.frozen()) throw Error(Errc::FrozenGraph, "cannot augment a frozen graph");
    if (options.min_count == 0) throw Error(Errc::InvalidArgument, "min_count must be positive");

    struct EntityInfo {
        std::string kind;
        std::size_t mentions = 0;
    };
    std::map<std::string, EntityInfo> entity_info;
    std::map<std::pair<std::string, std::string>, std::size_t> cwe_pairs;
    std::map<std::pair<std::string, std::string>, std::size_t> class_pairs;

    for (const auto& item : rationales) {
        if (item.rationale == nullptr || item.sample == nullptr) {
            throw Error(Errc::InvalidArgument, "augment input without rationale or sample");
        }
        const auto& r = *item.rationale;
        const auto& sample = *item.sample;
        if (r.verdict != distill::VerdictLabel::Vulnerable || sample.label != 1) continue;

        std::set<std::string> names;
        for (const auto& e : r.entities) {
            if (e.name.empty()) continue;
            if (names.insert(e.name).second) {
                auto& info = entity_info[e.name];
                if (info.kind.empty()) info.kind = e.kind;
                ++info.mentions;
            }
        }
        std::set<std::string> cwes;
        for (const auto& c : r.cwe_attribution) {
            if (sample.cwe_ids.empty() || sample.cwe_ids.count(c)) cwes.insert(c);
        }
        for (const auto& name : names) {
            for (const auto& c : cwes) ++cwe_pairs[{name, c}];
        }
        std::set<std::pair<std::string, std::string>> links;
        for (const auto& link : r.class_links) {
            if (link.entity_index < r.entities.size()) links.emplace(r.entities[link.entity_index].name, link.class_id);
        }
        for (const auto& key : links) ++class_pairs[key];
    }

    AugmentReport report;
    std::map<std::string, kg::Embedding> embedding_cache;
    auto embed_cached = [&](const std::string& text) -> const kg::Embedding& {
        auto it = embedding_cache.find(text);
        if (it == embedding_cache.end()) it = embedding_cache.emplace(text, options.embedder->embed(text)).first;
        return it->second;
    };
    auto similarity = [&](const std::string& entity, const std::string& target_id) -> std::optional<double> {
        if (options.embedder == nullptr) return std::nullopt;
        const auto& node = graph.node(target_id);
        const auto& description = node.description.empty() ? node.name : node.description;
        try {
            return kg::cosine_similarity(embed_cached(entity), embed_cached(description));
        } catch (const Error& e) {
            if (e.code() == Errc::ZeroVector) return std::nullopt;
            throw;
        }
    };
    auto ensure_entity = [&](const std::string& name) {
        const auto id = entity_node_id(name);
        const auto& info = entity_info.at(name);
        const auto* existing = graph.find_node(id);
        kg::GraphNode node;
        if (existing != nullptr) {
            node = *existing;
        } else {
            node.id = id;
            node.kind = NodeKind::Entity;
            node.name = name;
            ++report.entities_added;
        }
        if (!info.kind.empty() && !node.attributes.count("entity_kind")) node.attributes["entity_kind"] = info.kind;
        const auto old = node.attributes.count("mentions") ? std::stoull(node.attributes["mentions"]) : 0ULL;
        node.attributes["mentions"] = std::to_string(std::max<unsigned long long>(old, info.mentions));
        graph.upsert_node(std::move(node));
        return id;
    };
    auto upsert_edge = [&](const std::string& source, EdgeKind kind, const std::string& target, double weight,
                           kg::Provenance provenance) {
        if (const auto* edge = graph.find_edge(source, target, kind)) {
            ++report.edges_updated;
            if (weight > edge->weight) graph.link(source, kind, target, weight, provenance);
            return;
        }
        graph.link(source, kind, target, weight, provenance);
        ++report.edges_added;
    };
    auto mine = [&](const auto& pairs, EdgeKind kind, NodeKind target_kind) {
        for (const auto& [key, count] : pairs) {
            const auto& [name, target] = key;
            const auto* target_node = graph.find_node(target);
            if (target_node == nullptr || target_node->kind != target_kind) {
                ++report.skipped_unknown_targets;
                continue;
            }
            if (count >= options.min_count) {
                upsert_edge(ensure_entity(name), kind, target, static_cast<double>(count), kg::Provenance::Mined);
            } else if (const auto sim = similarity(name, target); sim && *sim >= options.min_similarity) {
                upsert_edge(ensure_entity(name), kind, target, *sim, kg::Provenance::EmbeddingMatch);
            }
        }
    };
    mine(cwe_pairs, EdgeKind::IndicatorOf, NodeKind::Cwe);
    mine(class_pairs, EdgeKind::AssociatedWith, NodeKind::AbstractClass);
    return report;
}

} // namespace vulread::retrieval
