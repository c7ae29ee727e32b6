// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 vulread contributors

#include <gtest/gtest.h>

#include <functional>
#include <random>

#include "vulread/error.hpp"
#include "vulread/kg/graph.hpp"

namespace vulread::kg {
namespace {

GraphNode make(std::string id, NodeKind kind, std::string description = "") {
    GraphNode n;
    n.id = std::move(id);
    n.kind = kind;
    n.name = n.id;
    n.description = std::move(description);
    return n;
}

Errc code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected an Error";
    return Errc::Io;
}

TEST(Graph, UpsertIntoEmptyGraph) {
    KnowledgeGraph g;
    EXPECT_EQ(g.upsert_node(make("CWE-401", NodeKind::Cwe)), "CWE-401");
    EXPECT_EQ(g.node_count(), 1u);
}

TEST(Graph, UpsertReplacesNode) {
    KnowledgeGraph g;
    g.upsert_node(make("CWE-401", NodeKind::Cwe, "first"));
    g.upsert_node(make("CWE-401", NodeKind::Cwe, "second"));
    EXPECT_EQ(g.node_count(), 1u);
    EXPECT_EQ(g.node("CWE-401").description, "second");
}

TEST(Graph, RejectsMalformedCweId) {
    KnowledgeGraph g;
    EXPECT_EQ(code_of([&] { g.upsert_node(make("401", NodeKind::Cwe)); }), Errc::MalformedCweId);
    EXPECT_EQ(code_of([&] { g.upsert_node(make("CWE-", NodeKind::Cwe)); }), Errc::MalformedCweId);
    EXPECT_EQ(code_of([&] { g.upsert_node(make("", NodeKind::Entity)); }), Errc::InvalidArgument);
}

TEST(Graph, LinkValidEdge) {
    KnowledgeGraph g;
    g.upsert_node(make("CWE-401", NodeKind::Cwe));
    g.upsert_node(make("MemoryManagement", NodeKind::AbstractClass));
    g.link("CWE-401", EdgeKind::MemberOf, "MemoryManagement", 1.0, Provenance::KeywordMatch);
    const auto* e = g.find_edge("CWE-401", "MemoryManagement", EdgeKind::MemberOf);
    ASSERT_NE(e, nullptr);
    EXPECT_EQ(e->provenance, Provenance::KeywordMatch);
}

TEST(Graph, LinkKindMismatchAndUnknownNode) {
    KnowledgeGraph g;
    g.upsert_node(make("entity:malloc", NodeKind::Entity));
    g.upsert_node(make("MemoryManagement", NodeKind::AbstractClass));
    EXPECT_EQ(code_of([&] {
                  g.link("entity:malloc", EdgeKind::MemberOf, "MemoryManagement", 1.0, Provenance::Mined);
              }),
              Errc::KindMismatch);
    EXPECT_EQ(code_of([&] { g.link("entity:malloc", EdgeKind::IndicatorOf, "CWE-1", 1.0, Provenance::Mined); }),
              Errc::UnknownNode);
    EXPECT_EQ(code_of([&] {
                  g.link("entity:malloc", EdgeKind::AssociatedWith, "MemoryManagement", -1.0, Provenance::Mined);
              }),
              Errc::InvalidArgument);
    EXPECT_FALSE(g.has_dangling_edges());
}

TEST(Graph, LinkOverwrites) {
    KnowledgeGraph g;
    g.upsert_node(make("entity:malloc", NodeKind::Entity));
    g.upsert_node(make("CWE-401", NodeKind::Cwe));
    g.link("entity:malloc", EdgeKind::IndicatorOf, "CWE-401", 1.0, Provenance::Mined);
    g.link("entity:malloc", EdgeKind::IndicatorOf, "CWE-401", 3.0, Provenance::Mined);
    EXPECT_EQ(g.edge_count(), 1u);
    EXPECT_EQ(g.find_edge("entity:malloc", "CWE-401", EdgeKind::IndicatorOf)->weight, 3.0);
}

TEST(Graph, NeighborsOrdering) {
    KnowledgeGraph g;
    g.upsert_node(make("CWE-1", NodeKind::Cwe));
    g.upsert_node(make("CWE-2", NodeKind::Cwe));
    for (const auto* c : {"B", "A", "C"}) g.upsert_node(make(c, NodeKind::AbstractClass));
    g.link("CWE-1", EdgeKind::MemberOf, "B", 0.5, Provenance::EmbeddingMatch);
    g.link("CWE-1", EdgeKind::MemberOf, "A", 0.5, Provenance::EmbeddingMatch);
    g.link("CWE-1", EdgeKind::MemberOf, "C", 0.9, Provenance::EmbeddingMatch);
    const auto n = g.neighbors("CWE-1", EdgeKind::MemberOf, Direction::Out);
    ASSERT_EQ(n.size(), 3u);
    EXPECT_EQ(n[0].node.id, "C");
    EXPECT_EQ(n[1].node.id, "A");
    EXPECT_EQ(n[2].node.id, "B");
    EXPECT_TRUE(g.neighbors("CWE-2", std::nullopt, Direction::Out).empty());
    const auto in = g.neighbors("A", std::nullopt, Direction::In);
    ASSERT_EQ(in.size(), 1u);
    EXPECT_EQ(in[0].node.id, "CWE-1");
    EXPECT_EQ(code_of([&] { (void)g.neighbors("missing", std::nullopt, Direction::Out); }), Errc::UnknownNode);
}

TEST(Graph, FrozenRejectsMutation) {
    KnowledgeGraph g;
    g.upsert_node(make("CWE-1", NodeKind::Cwe));
    g.freeze();
    EXPECT_EQ(code_of([&] { g.upsert_node(make("CWE-2", NodeKind::Cwe)); }), Errc::FrozenGraph);
    EXPECT_EQ(code_of([&] { g.set_attribute("k", "v"); }), Errc::FrozenGraph);
    EXPECT_TRUE(g.contains("CWE-1"));
    auto copy = g.unfrozen_copy();
    EXPECT_FALSE(copy.frozen());
    copy.upsert_node(make("CWE-2", NodeKind::Cwe));
}

TEST(Graph, KindChangeWithEdgesIsRejected) {
    KnowledgeGraph g;
    g.upsert_node(make("x", NodeKind::Entity));
    g.upsert_node(make("C", NodeKind::AbstractClass));
    g.link("x", EdgeKind::AssociatedWith, "C", 1.0, Provenance::Mined);
    EXPECT_EQ(code_of([&] { g.upsert_node(make("x", NodeKind::AbstractClass)); }), Errc::KindMismatch);
}

TEST(Serialization, EmptyAndSmallRoundTrip) {
    KnowledgeGraph empty;
    EXPECT_EQ(deserialize(serialize(empty)), empty);

    KnowledgeGraph g;
    g.upsert_node(make("CWE-401", NodeKind::Cwe, "leak"));
    g.upsert_node(make("MemoryManagement", NodeKind::AbstractClass));
    g.upsert_node(make("entity:malloc", NodeKind::Entity));
    g.link("CWE-401", EdgeKind::MemberOf, "MemoryManagement", 1.0, Provenance::KeywordMatch);
    g.link("entity:malloc", EdgeKind::IndicatorOf, "CWE-401", 4.0, Provenance::Mined);
    g.set_attribute("cwe_version", "4.14");
    const auto bytes = serialize(g);
    EXPECT_EQ(deserialize(bytes), g);
    EXPECT_EQ(serialize(deserialize(bytes)), bytes);
}

TEST(Serialization, TruncatedIsCorrupt) {
    KnowledgeGraph g;
    g.upsert_node(make("CWE-401", NodeKind::Cwe, "leak"));
    const auto bytes = serialize(g);
    EXPECT_EQ(code_of([&] { (void)deserialize(bytes.substr(0, bytes.size() / 2)); }), Errc::CorruptInput);
    EXPECT_EQ(code_of([&] { (void)deserialize(R"({"version":2,"nodes":[],"edges":[]})"); }), Errc::CorruptInput);
    EXPECT_EQ(code_of([&] {
                  (void)deserialize(R"({"version":1,"nodes":[{"id":"x","kind":"Bogus","name":"","description":"",
                                     "attributes":{}}],"edges":[]})");
              }),
              Errc::CorruptInput);
    EXPECT_EQ(code_of([&] {
                  (void)deserialize(R"({"version":1,"nodes":[],"edges":[{"source":"a","target":"b","kind":"ChildOf",
                                     "weight":1,"provenance":"Curated"}]})");
              }),
              Errc::CorruptInput);
}

TEST(Serialization, StatementExport) {
    KnowledgeGraph g;
    g.upsert_node(make("CWE-401", NodeKind::Cwe, "it's a leak"));
    g.upsert_node(make("MemoryManagement", NodeKind::AbstractClass));
    g.link("CWE-401", EdgeKind::MemberOf, "MemoryManagement", 1.0, Provenance::KeywordMatch);
    const auto text = export_statements(g);
    EXPECT_NE(text.find("MERGE (n:Cwe {id: "), std::string::npos);
    EXPECT_NE(text.find("[r:MemberOf]"), std::string::npos);
    std::size_t lines = 0;
    for (char c : text) lines += c == '\n';
    EXPECT_EQ(lines, 3u);
}

// Random valid graph: a mix of node kinds, edges only between compatible kinds.
KnowledgeGraph random_graph(std::mt19937_64& rng) {
    KnowledgeGraph g;
    std::uniform_int_distribution<int> count(0, 12);
    std::vector<std::string> classes, cwes, entities;
    const auto text = [&](int len) {
        static const std::vector<std::string> alphabet{"a", "b", "c", " ", "x", "\"", "\\", "/", "\n", "\t",
                                                       "\xc3\xa9", "-", "_", ",", "{", "}"};
        std::string s;
        for (int i = 0; i < len; ++i) s += alphabet[rng() % alphabet.size()];
        return s;
    };
    const auto n_classes = count(rng) % 5;
    for (int i = 0; i < n_classes; ++i) {
        auto n = make("class" + std::to_string(i), NodeKind::AbstractClass, text(8));
        if (rng() % 2) n.attributes["keywords"] = text(5);
        classes.push_back(g.upsert_node(n));
    }
    const auto n_cwes = count(rng);
    for (int i = 0; i < n_cwes; ++i) {
        cwes.push_back(g.upsert_node(make("CWE-" + std::to_string(rng() % 2000), NodeKind::Cwe, text(12))));
    }
    const auto n_entities = count(rng) % 6;
    for (int i = 0; i < n_entities; ++i) {
        auto n = make("entity:" + text(4), NodeKind::Entity);
        n.attributes["mentions"] = std::to_string(rng() % 9);
        entities.push_back(g.upsert_node(n));
    }
    const auto pick = [&](const std::vector<std::string>& v) { return v[rng() % v.size()]; };
    std::uniform_real_distribution<double> weight(0.0, 10.0);
    const Provenance provenances[] = {Provenance::Curated, Provenance::KeywordMatch, Provenance::EmbeddingMatch,
                                      Provenance::Mined};
    const auto n_edges = count(rng) * 2;
    for (int i = 0; i < n_edges; ++i) {
        const auto prov = provenances[rng() % 4];
        switch (rng() % 4) {
            case 0:
                if (!cwes.empty() && !classes.empty()) g.link(pick(cwes), EdgeKind::MemberOf, pick(classes), weight(rng), prov);
                break;
            case 1:
                if (!cwes.empty()) g.link(pick(cwes), EdgeKind::ChildOf, pick(cwes), weight(rng), prov);
                break;
            case 2:
                if (!entities.empty() && !classes.empty()) {
                    g.link(pick(entities), EdgeKind::AssociatedWith, pick(classes), weight(rng), prov);
                }
                break;
            default:
                if (!entities.empty() && !cwes.empty()) {
                    g.link(pick(entities), EdgeKind::IndicatorOf, pick(cwes), weight(rng), prov);
                }
        }
    }
    if (rng() % 3 == 0) g.set_attribute("cwe_version", text(4));
    return g;
}

TEST(Serialization, RoundTripProperty) {
    std::mt19937_64 rng(20260101);
    for (int i = 0; i < 1000; ++i) {
        const auto g = random_graph(rng);
        ASSERT_FALSE(g.has_dangling_edges());
        const auto bytes = serialize(g);
        const auto back = deserialize(bytes);
        ASSERT_EQ(back, g) << "case " << i;
        ASSERT_EQ(serialize(back), bytes) << "case " << i;
        for (const auto& [id, node] : g.nodes()) {
            const auto out = back.neighbors(id, std::nullopt, Direction::Out);
            for (std::size_t k = 1; k < out.size(); ++k) {
                const auto& a = out[k - 1];
                const auto& b = out[k];
                ASSERT_TRUE(a.edge.weight > b.edge.weight ||
                            (a.edge.weight == b.edge.weight && a.node.id <= b.node.id));
            }
        }
    }
}

} // namespace
} // namespace vulread::kg
