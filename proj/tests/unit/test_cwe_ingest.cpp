// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 vulread contributors

#include <gtest/gtest.h>

#include <random>
#include <regex>

#include "support/synthetic.hpp"
#include "vulread/error.hpp"
#include "vulread/kg/cwe_ingest.hpp"

namespace vulread::kg {
namespace {

using testing::fixture;

const CweRecord* find(const ParsedCorpus& c, const std::string& id) {
    for (const auto& r : c.records) {
        if (r.id == id) return &r;
    }
    return nullptr;
}

TEST(CweCsv, TwoEntriesWithParent) {
    const std::string csv = std::string(kCweCsvHeader) +
                            "\nCWE-79,XSS,Base,Bad output,,\n"
                            "CWE-89,SQL Injection,Base,Bad query,,ChildOf:CWE-79\n";
    const auto c = parse_cwe_corpus(csv, CorpusFormat::Csv);
    ASSERT_EQ(c.records.size(), 2u);
    EXPECT_EQ(find(c, "CWE-89")->parents, std::vector<std::string>{"CWE-79"});
    EXPECT_EQ(c.report.parsed, 2u);
}

TEST(CweCsv, SmallFixtureCounts) {
    const auto c = parse_cwe_corpus(read_file(fixture("cwe_small.csv")), CorpusFormat::Csv);
    EXPECT_EQ(c.report.parsed, 5u);
    EXPECT_EQ(c.report.dropped_deprecated, 1u);
    EXPECT_EQ(c.report.dropped_empty_description, 1u);
    EXPECT_EQ(c.report.dangling_parent_links, 1u);
    ASSERT_NE(find(c, "CWE-79"), nullptr);
    EXPECT_EQ(find(c, "CWE-79")->parents, std::vector<std::string>{"CWE-74"});
    EXPECT_TRUE(find(c, "CWE-401")->parents.empty());
    EXPECT_EQ(find(c, "CWE-119")->description,
              "The product performs operations on a memory buffer outside its intended boundary. "
              "Out-of-bounds reads and writes follow.");
    EXPECT_EQ(find(c, "CWE-416")->abstraction, "Variant");
    // ordered by number
    EXPECT_EQ(c.records.front().id, "CWE-74");
    EXPECT_EQ(c.records.back().id, "CWE-416");
}

TEST(CweXml, SmallFixtureMatchesCsv) {
    const auto xml = parse_cwe_corpus(read_file(fixture("cwe_small.xml")), CorpusFormat::Xml);
    const auto csv = parse_cwe_corpus(read_file(fixture("cwe_small.csv")), CorpusFormat::Csv);
    EXPECT_EQ(xml.report.corpus_version, "4.14");
    EXPECT_EQ(xml.report.dropped_deprecated, 1u);
    EXPECT_EQ(xml.report.dangling_parent_links, 1u);
    ASSERT_EQ(xml.records.size(), csv.records.size());
    for (std::size_t i = 0; i < xml.records.size(); ++i) {
        EXPECT_EQ(xml.records[i].id, csv.records[i].id);
        EXPECT_EQ(xml.records[i].description, csv.records[i].description);
        EXPECT_EQ(xml.records[i].parents, csv.records[i].parents);
    }
}

TEST(CweXml, ParsedCountMatchesElementScan) {
    // Independent count: Weakness elements minus those flagged Deprecated.
    const auto text = read_file(fixture("cwe_small.xml"));
    const std::regex weakness(R"(<Weakness\s[^>]*>)");
    std::size_t total = 0, deprecated = 0;
    for (auto it = std::sregex_iterator(text.begin(), text.end(), weakness); it != std::sregex_iterator(); ++it) {
        ++total;
        if (it->str().find("Status=\"Deprecated\"") != std::string::npos) ++deprecated;
    }
    const auto c = parse_cwe_corpus(text, CorpusFormat::Xml);
    EXPECT_EQ(c.report.parsed, total - deprecated);
}

TEST(CweCorpus, FiftyFixtureCount) {
    const auto text = read_file(fixture("cwe_50.csv"));
    std::size_t lines = 0;
    for (char ch : text) lines += ch == '\n';
    const auto c = parse_cwe_corpus(text, CorpusFormat::Csv);
    EXPECT_EQ(c.report.parsed, lines - 1);
    EXPECT_EQ(c.report.parsed, 50u);
}

TEST(CweCorpus, Errors) {
    const auto code = [](std::string_view src, CorpusFormat f) {
        try {
            (void)parse_cwe_corpus(src, f);
        } catch (const Error& e) {
            return e.code();
        }
        return Errc::Io;
    };
    EXPECT_EQ(code("CWE-ID,Name\n1,x\n", CorpusFormat::Csv), Errc::SchemaError);
    EXPECT_EQ(code(std::string(kCweCsvHeader) + "\nCWE-1,\xff\xfe,Base,d,,\n", CorpusFormat::Csv),
              Errc::DecodeError);
    EXPECT_EQ(code("<Other/>", CorpusFormat::Xml), Errc::SchemaError);
    EXPECT_EQ(code("<Weakness_Catalog><Weaknesses>", CorpusFormat::Xml), Errc::DecodeError);
    EXPECT_EQ(code(std::string(kCweCsvHeader) + "\nbogus,x,Base,d,,\n", CorpusFormat::Csv), Errc::SchemaError);
}

TEST(CweLoad, NodesAndEdges) {
    const std::vector<CweRecord> records{{"CWE-79", "XSS", "output", "Base", {}},
                                         {"CWE-89", "SQLi", "query", "Base", {"CWE-79"}}};
    KnowledgeGraph g;
    const auto r = load_into_graph(records, g);
    EXPECT_EQ(r.added, 2u);
    EXPECT_EQ(r.child_edges, 1u);
    EXPECT_EQ(g.node_count(), 2u);
    EXPECT_EQ(g.edge_count(), 1u);
    EXPECT_EQ(g.node("CWE-89").attributes.at("abstraction"), "Base");

    // idempotent
    const auto again = load_into_graph(records, g);
    EXPECT_EQ(again.added, 0u);
    EXPECT_EQ(g.node_count(), 2u);
    EXPECT_EQ(g.edge_count(), 1u);

    KnowledgeGraph empty;
    EXPECT_EQ(load_into_graph({}, empty).added, 0u);
}

TEST(CweLoad, DanglingParentAndFrozen) {
    KnowledgeGraph g;
    const auto r = load_into_graph({{"CWE-401", "Leak", "leak", "Variant", {"CWE-772"}}}, g);
    EXPECT_EQ(r.added, 1u);
    EXPECT_EQ(r.skipped_parent_links, 1u);
    EXPECT_EQ(g.edge_count(), 0u);
    g.freeze();
    try {
        load_into_graph({}, g);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::FrozenGraph);
    }
}

TEST(CweCsv, WriteParseRoundTripProperty) {
    std::mt19937_64 rng(77);
    const std::vector<std::string> alphabet{"a", "b", "c", "X", "Y", "Z", " ", "0", "1", "9", ",", ";",
                                            "\"", "'", "\n", ":", "-", "\xc3\xa9"};
    const auto text = [&](std::size_t len) {
        std::string s;
        for (std::size_t i = 0; i < len; ++i) s += alphabet[rng() % alphabet.size()];
        s = std::string(trim(s));
        return s.empty() ? std::string("x") : s;
    };
    for (int round = 0; round < 1000; ++round) {
        std::set<std::uint64_t> numbers;
        const auto n = 1 + rng() % 8;
        while (numbers.size() < n) numbers.insert(1 + rng() % 1500);
        std::vector<CweRecord> records;
        for (auto num : numbers) {
            CweRecord r;
            r.id = "CWE-" + std::to_string(num);
            r.name = text(1 + rng() % 12);
            r.description = text(1 + rng() % 40);
            r.abstraction = rng() % 2 ? "Base" : "Class";
            records.push_back(r);
        }
        for (auto& r : records) {
            for (const auto& p : records) {
                if (p.id != r.id && rng() % 4 == 0) r.parents.push_back(p.id);
            }
        }
        const auto back = parse_cwe_corpus(write_cwe_csv(records), CorpusFormat::Csv);
        ASSERT_EQ(back.records, records) << "round " << round;
    }
}

} // namespace
} // namespace vulread::kg
