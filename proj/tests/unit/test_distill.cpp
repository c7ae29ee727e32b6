// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 vulread contributors

#include <gtest/gtest.h>

#include <random>
#include <regex>

#include "support/synthetic.hpp"
#include "vulread/distill/distill.hpp"
#include "vulread/error.hpp"

namespace vulread::distill {
namespace {

Errc code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected an Error";
    return Errc::Io;
}

FunctionSample leak_sample() {
    FunctionSample s;
    s.id = "leak-1";
    s.code = "int f(int fd) {\n    char *p = malloc(64);\n    return read(fd, p, 64);\n}\n";
    s.label = 1;
    s.cwe_ids = {"CWE-401", "CWE-772"};
    return s;
}

// --- prompts -----------------------------------------------------------------

TEST(Prompt, AssertedVulnerableCarriesTargets) {
    const auto s = leak_sample();
    const auto p = build_prompt(s, {}, 1, PromptTemplate::default_teacher());
    EXPECT_NE(p.find(s.code), std::string::npos);
    EXPECT_NE(p.find("CWE-401, CWE-772"), std::string::npos);
    EXPECT_NE(p.find("VULNERABLE"), std::string::npos);
}

TEST(Prompt, AssertedSafeHasNoCweTarget) {
    const auto s = leak_sample();
    const auto p = build_prompt(s, {}, 0, PromptTemplate::default_teacher());
    EXPECT_NE(p.find("the function is SAFE"), std::string::npos);
    EXPECT_FALSE(std::regex_search(p, std::regex("CWE-[0-9]")));
    EXPECT_NE(p.find(s.code), std::string::npos);
}

TEST(Prompt, TemplateValidation) {
    EXPECT_EQ(code_of([] { PromptTemplate("{{kg_context}} {{asserted_label}}", TemplateRole::Teacher); }),
              Errc::TemplateMissingPlaceholder);
    EXPECT_EQ(code_of([] { PromptTemplate("{{code}} {{mystery}} {{asserted_label}}", TemplateRole::Teacher); }),
              Errc::UnknownPlaceholder);
    EXPECT_EQ(code_of([] { PromptTemplate("{{code}} {{asserted_label}}", TemplateRole::Inference); }),
              Errc::UnknownPlaceholder);
    EXPECT_EQ(code_of([] { PromptTemplate("{{code}}", TemplateRole::Teacher); }), Errc::TemplateMissingPlaceholder);
    EXPECT_NO_THROW(PromptTemplate("{{ code }}", TemplateRole::Inference));
}

TEST(Prompt, SinglePassRendering) {
    const PromptTemplate t("<{{code}}|{{kg_context}}>", TemplateRole::Inference);
    EXPECT_EQ(t.render({{"code", "{{kg_context}}"}, {"kg_context", "ctx"}}), "<{{kg_context}}|ctx>");
}

TEST(Prompt, InferencePromptAndRoleChecks) {
    const auto s = leak_sample();
    const auto p = build_prompt(s, {}, std::nullopt, PromptTemplate::default_inference());
    EXPECT_NE(p.find(s.code), std::string::npos);
    EXPECT_EQ(p.find("CWE-401"), std::string::npos);
    EXPECT_NE(p.find(std::string(retrieval::kNoMatchesBlock)), std::string::npos);
    EXPECT_EQ(code_of([&] { (void)build_prompt(s, {}, 1, PromptTemplate::default_inference()); }),
              Errc::InvalidArgument);
    EXPECT_EQ(code_of([&] { (void)build_prompt(s, {}, std::nullopt, PromptTemplate::default_teacher()); }),
              Errc::InvalidArgument);
}

TEST(Prompt, BudgetExceeded) {
    auto s = leak_sample();
    s.code = std::string(20000, 'x');
    EXPECT_EQ(code_of([&] { (void)build_prompt(s, {}, 1, PromptTemplate::default_teacher()); }),
              Errc::BudgetExceeded);
    llm::TokenBudget generous{100000, 4};
    EXPECT_NO_THROW((void)build_prompt(s, {}, 1, PromptTemplate::default_teacher(), generous));
}

TEST(Prompt, KgContextIsInserted) {
    retrieval::RetrievalContext ctx;
    ctx.rendered = "KG CLASSES: MemoryManagement\nKG CANDIDATE: CWE-401 (confidence 1.00)";
    const auto p = build_prompt(leak_sample(), ctx, 0, PromptTemplate::default_teacher());
    EXPECT_NE(p.find(ctx.rendered), std::string::npos);
}

// --- masking -----------------------------------------------------------------

TEST(Mask, Examples) {
    EXPECT_EQ(mask_cve("fixed in CVE-2018-1234 upstream"), "fixed in [CVE-MASKED] upstream");
    EXPECT_EQ(mask_cve("CWE-79 is unaffected"), "CWE-79 is unaffected");
    EXPECT_EQ(mask_cve("cve-2021-44228 and CVE-2014-0160"), "[CVE-MASKED] and [CVE-MASKED]");
    EXPECT_TRUE(contains_cve("see Cve-2019-1234567"));
    EXPECT_FALSE(contains_cve("CVE-20-1234"));
    EXPECT_FALSE(contains_cve(mask_cve("CVE-2019-1234567 CVE-2019-12345678")));
}

TEST(Mask, PropertyNoCveSurvivesAndOtherTextIsKept) {
    std::mt19937_64 rng(3);
    const std::vector<std::string> pieces{"a", " ", "CWE-79", "cve", "-", "2020", "12345", "CVE-2021-0001",
                                          "cve-1999-1234567", "x", "\n"};
    for (int round = 0; round < 1000; ++round) {
        std::string text;
        const auto n = rng() % 15;
        for (std::size_t i = 0; i < n; ++i) text += pieces[rng() % pieces.size()];
        const auto masked = mask_cve(text);
        ASSERT_FALSE(contains_cve(masked)) << text;
        if (!contains_cve(text)) {
            ASSERT_EQ(masked, text);
        }
        ASSERT_EQ(mask_cve(masked), masked);
    }
}

// --- rationale parsing ----------------------------------------------------------

const char* kVulnerable =
    "VERDICT: VULNERABLE\n"
    "ENTITIES:\n"
    "- strcpy (api-call)\n"
    "- buf (identifier)\n"
    "CLASSES:\n"
    "- strcpy -> MemoryManagement\n"
    "CWE: CWE-401\n"
    "SUMMARY: The buffer is never released.\n";

TEST(Rationale, ParseWellFormed) {
    const auto r = parse_rationale(kVulnerable);
    EXPECT_EQ(r.verdict, VerdictLabel::Vulnerable);
    EXPECT_EQ(r.cwe_attribution, std::set<std::string>{"CWE-401"});
    ASSERT_EQ(r.entities.size(), 2u);
    EXPECT_EQ(r.entities[0], (RationaleEntity{"strcpy", "api-call"}));
    ASSERT_EQ(r.class_links.size(), 1u);
    EXPECT_EQ(r.class_links[0], (ClassLink{0, "MemoryManagement"}));
    EXPECT_EQ(r.summary, "The buffer is never released.");
}

TEST(Rationale, SafeWithCweIsRejected) {
    const std::string raw =
        "VERDICT: SAFE\nENTITIES:\nCLASSES:\nCWE: CWE-79\nSUMMARY: No known vulnerabilities here.\n";
    EXPECT_EQ(code_of([&] { (void)parse_rationale(raw); }), Errc::ParseError);
}

TEST(Rationale, MissingSectionIsNamed) {
    const std::string raw = "VERDICT: VULNERABLE\nENTITIES:\n- a (x)\nCWE: CWE-1\nSUMMARY: s\n";
    try {
        (void)parse_rationale(raw);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::ParseError);
        EXPECT_NE(std::string(e.what()).find("CLASSES"), std::string::npos);
    }
    EXPECT_EQ(code_of([] { (void)parse_rationale("I think it is fine."); }), Errc::ParseError);
}

TEST(Rationale, InvariantViolations) {
    // link to an unknown entity
    EXPECT_EQ(code_of([] {
                  (void)parse_rationale("VERDICT: VULNERABLE\nENTITIES:\n- a (x)\nCLASSES:\n- b -> Mem\nCWE: CWE-1\n"
                                        "SUMMARY: s\n");
              }),
              Errc::ParseError);
    // class not in the KG
    const std::set<std::string> known{"InputValidation"};
    EXPECT_EQ(code_of([&] { (void)parse_rationale(kVulnerable, &known); }), Errc::ParseError);
    // CVE left in the summary
    EXPECT_EQ(code_of([] {
                  (void)parse_rationale("VERDICT: VULNERABLE\nENTITIES:\nCLASSES:\nCWE: CWE-1\nSUMMARY: see CVE-2020-1234\n");
              }),
              Errc::ParseError);
    // safe summary must speak to absence
    EXPECT_EQ(code_of([] {
                  (void)parse_rationale("VERDICT: SAFE\nENTITIES:\nCLASSES:\nCWE: NONE\nSUMMARY: Looks great.\n");
              }),
              Errc::ParseError);
    EXPECT_NO_THROW((void)parse_rationale(
        "VERDICT: SAFE\nENTITIES:\nCLASSES:\nCWE: NONE\nSUMMARY: No known vulnerabilities are present.\n"));
}

TEST(Rationale, CweTokensAreCanonicalized) {
    const auto r = parse_rationale("VERDICT: VULNERABLE\nENTITIES:\nCLASSES:\nCWE: cwe-079, CWE 401\nSUMMARY: s\n");
    EXPECT_EQ(r.cwe_attribution, (std::set<std::string>{"CWE-401", "CWE-79"}));
}

StructuredRationale random_rationale(std::mt19937_64& rng) {
    static const std::vector<std::string> names{"strcpy", "buf", "fd", "malloc", "/etc/passwd", "len", "ctx"};
    static const std::vector<std::string> kinds{"api-call", "identifier", "path", "library"};
    static const std::vector<std::string> classes{"MemoryManagement", "InputValidation", "Injection"};
    StructuredRationale r;
    r.verdict = rng() % 2 ? VerdictLabel::Vulnerable : VerdictLabel::Safe;
    std::set<std::string> used;
    const auto n = rng() % 5;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& name = names[rng() % names.size()];
        if (!used.insert(name).second) continue;
        r.entities.push_back({name, kinds[rng() % kinds.size()]});
    }
    for (std::size_t i = 0; i < r.entities.size(); ++i) {
        if (rng() % 2) r.class_links.push_back({i, classes[rng() % classes.size()]});
    }
    if (r.verdict == VerdictLabel::Vulnerable) {
        const auto m = 1 + rng() % 3;
        for (std::size_t i = 0; i < m; ++i) r.cwe_attribution.insert("CWE-" + std::to_string(1 + rng() % 1400));
        r.summary = "The handling of data is unchecked in case " + std::to_string(rng() % 100) + ".";
    } else {
        r.summary = "No known vulnerabilities in case " + std::to_string(rng() % 100) + ".";
    }
    return r;
}

TEST(Rationale, RenderParseRoundTripProperty) {
    std::mt19937_64 rng(19);
    for (int round = 0; round < 1000; ++round) {
        const auto r = random_rationale(rng);
        const auto text = render_rationale(r);
        ASSERT_EQ(parse_rationale(text), r) << text;
        ASSERT_EQ(render_rationale(parse_rationale(text)), text);
    }
}

// --- teacher calls ----------------------------------------------------------------

struct Fixture {
    kg::KnowledgeGraph graph = testing::fixture_graph();
    std::set<std::string> classes = class_ids(graph);
};

TEST(DistillSample, LabelFlipWithScriptedTeacher) {
    Fixture f;
    llm::MockChatBackend backend(ScriptedTeacher(f.classes));
    const auto s = leak_sample();
    const auto pair = distill_sample(s, backend, f.graph);
    EXPECT_EQ(pair.valid.verdict, VerdictLabel::Vulnerable);
    EXPECT_EQ(pair.flawed.verdict, VerdictLabel::Safe);
    EXPECT_EQ(backend.calls(), 2u);
    EXPECT_EQ(pair.sample_id, s.id);
    for (const auto& c : pair.valid.cwe_attribution) EXPECT_TRUE(s.cwe_ids.count(c)) << c;
    EXPECT_EQ(parse_rationale(pair.valid_raw, &f.classes), pair.valid);

    auto safe = s;
    safe.label = 0;
    safe.cwe_ids.clear();
    const auto flipped = distill_sample(safe, backend, f.graph);
    EXPECT_EQ(flipped.valid.verdict, VerdictLabel::Safe);
    EXPECT_EQ(flipped.flawed.verdict, VerdictLabel::Vulnerable);
}

TEST(DistillSample, RequestsAreGreedy) {
    Fixture f;
    std::vector<llm::ChatRequest> seen;
    ScriptedTeacher teacher(f.classes);
    llm::MockChatBackend backend([&](const llm::ChatRequest& r) {
        seen.push_back(r);
        return teacher(r);
    });
    DistillOptions opts;
    opts.seed = 42;
    (void)distill_sample(leak_sample(), backend, f.graph, opts);
    ASSERT_EQ(seen.size(), 2u);
    for (const auto& r : seen) {
        EXPECT_EQ(r.temperature, 0.0);
        EXPECT_EQ(r.model, opts.teacher_model);
        EXPECT_EQ(r.seed, std::optional<std::int64_t>(42));
    }
    EXPECT_NE(seen[0].messages.back().content.find("the function is VULNERABLE"), std::string::npos);
    EXPECT_NE(seen[1].messages.back().content.find("the function is SAFE"), std::string::npos);
}

TEST(DistillSample, MalformedFlippedCallIsQuarantined) {
    Fixture f;
    ScriptedTeacher teacher(f.classes);
    llm::MockChatBackend backend([&](const llm::ChatRequest& r) -> std::string {
        const auto& prompt = r.messages.back().content;
        const bool flipped_for_target = prompt.find("load_record_2(") != std::string::npos &&
                                        prompt.find("the function is SAFE") != std::string::npos;
        return flipped_for_target ? "I refuse to use the format." : teacher(r);
    });
    const auto samples = testing::synthetic_samples(6);
    const auto result = distill_corpus(samples, backend, f.graph);
    ASSERT_EQ(result.quarantine.size(), 1u);
    EXPECT_EQ(result.quarantine[0].sample_id, "s002");
    EXPECT_EQ(result.quarantine[0].error, "ParseError");
    EXPECT_EQ(result.pairs.size(), 5u);
    for (const auto& p : result.pairs) EXPECT_NE(p.sample_id, "s002");
}

TEST(DistillSample, LabelContractViolation) {
    Fixture f;
    // teacher that always answers vulnerable
    ScriptedTeacher teacher(f.classes);
    llm::MockChatBackend backend([&](const llm::ChatRequest& r) {
        auto copy = r;
        auto& content = copy.messages.back().content;
        const auto pos = content.find("the function is SAFE");
        if (pos != std::string::npos) content.replace(pos, 20, "the function is VULNERABLE");
        return teacher(copy);
    });
    EXPECT_EQ(code_of([&] { (void)distill_sample(leak_sample(), backend, f.graph); }), Errc::LabelContract);
}

TEST(DistillSample, InjectedCveIsMasked) {
    Fixture f;
    llm::MockChatBackend backend(ScriptedTeacher(f.classes, true));
    const auto pair = distill_sample(leak_sample(), backend, f.graph);
    EXPECT_NE(pair.valid_raw.find("[CVE-MASKED]"), std::string::npos);
    EXPECT_FALSE(contains_cve(pair.valid_raw));
    EXPECT_FALSE(contains_cve(pair.flawed_raw));
    EXPECT_FALSE(contains_cve(pair.valid.summary));
    EXPECT_FALSE(contains_cve(pair_to_json(pair).dump()));
}

TEST(DistillSample, BackendFailuresAndAuth) {
    Fixture f;
    llm::MockChatBackend empty;
    EXPECT_EQ(code_of([&] { (void)distill_sample(leak_sample(), empty, f.graph); }), Errc::BackendError);

    llm::MockChatBackend auth([](const llm::ChatRequest&) -> std::string {
        throw Error(Errc::AuthError, "HTTP 401");
    });
    EXPECT_EQ(code_of([&] { (void)distill_corpus(testing::synthetic_samples(3), auth, f.graph); }),
              Errc::AuthError);

    auto unfrozen = f.graph.unfrozen_copy();
    llm::MockChatBackend ok(ScriptedTeacher(f.classes));
    EXPECT_EQ(code_of([&] { (void)distill_corpus({leak_sample()}, ok, unfrozen); }), Errc::GraphNotFrozen);
}

// --- preference records ----------------------------------------------------------

TEST(Preferences, SortedByIdAndMasked) {
    Fixture f;
    llm::MockChatBackend backend(ScriptedTeacher(f.classes));
    const auto samples = testing::synthetic_samples(4);
    auto result = distill_corpus(samples, backend, f.graph);
    std::reverse(result.pairs.begin(), result.pairs.end());
    const auto exported = to_preference_records({result.pairs[0], result.pairs[1]}, samples, f.graph);
    ASSERT_EQ(exported.records.size(), 2u);
    EXPECT_LT(exported.records[0].id, exported.records[1].id);
    for (const auto& r : exported.records) {
        EXPECT_NE(r.chosen, r.rejected);
        EXPECT_FALSE(r.prompt.empty());
        EXPECT_FALSE(contains_cve(r.prompt));
        EXPECT_EQ(r.prompt.find("Asserted verdict"), std::string::npos);
        EXPECT_EQ(preference_from_json(preference_to_json(r)), r);
    }
    // s000 carries a CVE comment in its code
    const auto all = to_preference_records(result.pairs, samples, f.graph);
    EXPECT_EQ(all.records.front().id, "s000");
    EXPECT_NE(all.records.front().prompt.find("[CVE-MASKED]"), std::string::npos);
}

TEST(Preferences, ContrastCollapseAndMissingSample) {
    Fixture f;
    const auto samples = testing::synthetic_samples(2);
    RationalePair collapsed;
    collapsed.sample_id = "s000";
    collapsed.valid = parse_rationale(kVulnerable);
    collapsed.flawed = collapsed.valid;
    const auto exported = to_preference_records({collapsed}, samples, f.graph);
    EXPECT_TRUE(exported.records.empty());
    EXPECT_EQ(exported.contrast_collapse, 1u);
    ASSERT_EQ(exported.rejected.size(), 1u);
    EXPECT_EQ(exported.rejected[0].error, "ContrastCollapse");

    RationalePair orphan = collapsed;
    orphan.sample_id = "nope";
    EXPECT_EQ(code_of([&] { (void)to_preference_records({orphan}, samples, f.graph); }), Errc::MissingSample);
}

TEST(Preferences, RecordCountMatchesFileScan) {
    Fixture f;
    ScriptedTeacher teacher(f.classes);
    // every seventh sample gets a malformed valid-label answer
    llm::MockChatBackend backend([&](const llm::ChatRequest& r) -> std::string {
        const auto& prompt = r.messages.back().content;
        for (int i = 0; i < 50; i += 7) {
            if (prompt.find("_" + std::to_string(i) + "(") != std::string::npos) return "garbage";
        }
        return teacher(r);
    });
    const auto samples = testing::synthetic_samples(50);
    const auto result = distill_corpus(samples, backend, f.graph);
    const auto exported = to_preference_records(result.pairs, samples, f.graph);
    std::vector<nlohmann::json> lines;
    for (const auto& r : exported.records) lines.push_back(preference_to_json(r));
    const auto dir = testing::temp_dir("prefs");
    write_file(dir / "prefs.jsonl", dump_jsonl(lines));

    std::ifstream in(dir / "prefs.jsonl");
    std::size_t count = 0;
    for (std::string line; std::getline(in, line);) count += !line.empty();
    EXPECT_EQ(result.quarantine.size(), 8u);
    EXPECT_EQ(count, samples.size() - result.quarantine.size());
    EXPECT_EQ(count, result.pairs.size() - exported.rejected.size());
    std::filesystem::remove_all(dir);
}

TEST(Preferences, DeterministicAcrossRuns) {
    const auto run = [] {
        Fixture f;
        llm::MockChatBackend backend(ScriptedTeacher(f.classes, true));
        const auto samples = testing::synthetic_samples(20);
        DistillOptions opts;
        opts.parallel = 4;
        const auto result = distill_corpus(samples, backend, f.graph, opts);
        std::vector<nlohmann::json> lines;
        for (const auto& r : to_preference_records(result.pairs, samples, f.graph).records) {
            lines.push_back(preference_to_json(r));
        }
        return dump_jsonl(lines);
    };
    EXPECT_EQ(run(), run());
}

TEST(Files, PairJsonRoundTrip) {
    Fixture f;
    llm::MockChatBackend backend(ScriptedTeacher(f.classes));
    const auto pair = distill_sample(leak_sample(), backend, f.graph);
    const auto back = pair_from_json(pair_to_json(pair), &f.classes);
    EXPECT_EQ(back.valid, pair.valid);
    EXPECT_EQ(back.flawed, pair.flawed);
    EXPECT_EQ(back.valid_raw, pair.valid_raw);
    EXPECT_EQ(code_of([] { (void)preference_from_json({{"id", "a"}, {"prompt", "p"}, {"chosen", "x"}, {"rejected", "x"}}); }),
              Errc::SchemaError);
}

} // namespace
} // namespace vulread::distill
