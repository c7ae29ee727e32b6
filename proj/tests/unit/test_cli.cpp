// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 vulread contributors

#include <gtest/gtest.h>

#include <sstream>

#include "support/synthetic.hpp"
#include "vulread/cli/cli.hpp"
#include "vulread/common.hpp"
#include "vulread/distill/types.hpp"

namespace vulread::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Invocation {
    int code = -1;
    std::string out;
    std::string err;
};

Invocation invoke(std::vector<std::string> args) {
    std::ostringstream out, err;
    Invocation r;
    r.code = run(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override { dir_ = testing::temp_dir("cli"); }
    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    std::string write_samples(const std::string& name, std::size_t n) const {
        write_file(path(name), distill::write_samples(testing::synthetic_samples(n)));
        return path(name);
    }

    fs::path dir_;
};

// --- exit codes ----------------------------------------------------------------------

TEST(ExitCodes, Mapping) {
    EXPECT_EQ(exit_code_for(Errc::SchemaError), kExitValidation);
    EXPECT_EQ(exit_code_for(Errc::MalformedCweId), kExitValidation);
    EXPECT_EQ(exit_code_for(Errc::Io), kExitValidation);
    EXPECT_EQ(exit_code_for(Errc::BackendError), kExitRuntime);
    EXPECT_EQ(exit_code_for(Errc::AuthError), kExitRuntime);
    EXPECT_EQ(exit_code_for(Errc::TransportError), kExitRuntime);
}

TEST_F(CliTest, UsageErrorsAreValidationFailures) {
    EXPECT_EQ(invoke({"kg", "build"}).code, kExitValidation);
    EXPECT_EQ(invoke({"frobnicate"}).code, kExitValidation);
    EXPECT_EQ(invoke({"eval", "--gold", path("nope.jsonl"), "--pred", path("nope.jsonl")}).code, kExitValidation);
    EXPECT_EQ(invoke({"--help"}).code, kExitOk);
}

TEST_F(CliTest, MalformedCorpusIsValidationFailure) {
    write_file(path("bad.csv"), "CWE-ID,Name,Description\nnot-an-id,x,y\n");
    const auto r = invoke({"kg", "build", "--cwe", path("bad.csv"), "-o", path("kg.bin")});
    EXPECT_EQ(r.code, kExitValidation) << r.err;
    EXPECT_FALSE(r.err.empty());
    EXPECT_FALSE(fs::exists(path("kg.bin")));
}

TEST_F(CliTest, HttpBackendWithoutEndpointFails) {
    const auto samples = write_samples("s.jsonl", 4);
    ASSERT_EQ(invoke({"kg", "build", "--cwe", testing::fixture("cwe_small.csv").string(), "-o", path("kg.bin")}).code, kExitOk);
    ::unsetenv("VULREAD_API_BASE");
    const auto r = invoke({"--backend", "http", "distill", "--kg", path("kg.bin"), "--samples", samples, "-o",
                           path("pairs.jsonl")});
    EXPECT_NE(r.code, kExitOk);
}

// --- config ------------------------------------------------------------------------

TEST(Config, ShippedConfigLoads) {
    const auto text = read_file(testing::config_file("vulread.json").string());
    const auto cfg = load_config(json::parse(text), VULREAD_CONFIG_DIR);
    EXPECT_EQ(cfg.seed, 42u);
    EXPECT_EQ(cfg.backend, "mock");
    ASSERT_TRUE(cfg.classes_path.has_value());
    EXPECT_TRUE(fs::exists(*cfg.classes_path));
    EXPECT_EQ(cfg.orpo.orpo.lambda, 0.1);
}

TEST(Config, SchemaErrors) {
    auto expect_code = [](const json& doc, Errc code) {
        try {
            (void)load_config(doc, ".");
            FAIL() << doc.dump();
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), code) << doc.dump();
        }
    };
    expect_code(json::array(), Errc::SchemaError);
    expect_code(json{{"seed", "x"}}, Errc::SchemaError);
    expect_code(json{{"backend", "carrier-pigeon"}}, Errc::SchemaError);
    expect_code(json{{"parallel", 0}}, Errc::SchemaError);
    expect_code(json{{"paths", {{"classes", "/definitely/missing.json"}}}}, Errc::Io);
}

// --- subcommands --------------------------------------------------------------------

TEST_F(CliTest, KgBuildWritesGraphReportAndManifest) {
    const auto r = invoke({"--config", testing::config_file("vulread.json").string(), "kg", "build", "--cwe",
                           testing::fixture("cwe_50.csv").string(), "-o", path("kg.bin"), "--report", path("map.json")});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    EXPECT_NE(r.out.find("cwe nodes: 50"), std::string::npos) << r.out;
    const auto graph = kg::deserialize(read_file(path("kg.bin")));
    EXPECT_EQ(graph.nodes_of_kind(kg::NodeKind::Cwe).size(), 50u);
    const auto report = json::parse(read_file(path("map.json")));
    EXPECT_EQ(report["mapping"]["per_cwe"].size(), 50u);
    EXPECT_EQ(report["ingest"]["parsed"], 50);

    const auto manifest = json::parse(read_file(path("kg.bin") + ".manifest.json"));
    for (const char* key : {"tool", "version", "command", "seed", "config_hash", "inputs", "outputs"}) {
        EXPECT_TRUE(manifest.contains(key)) << key;
    }
    EXPECT_EQ(manifest["command"], "kg build");
    EXPECT_EQ(manifest["outputs"][path("kg.bin")], sha256_hex(read_file(path("kg.bin"))));
}

TEST_F(CliTest, ExplicitManifestPathAndConfigHash) {
    const auto cwe = testing::fixture("cwe_small.csv").string();
    ASSERT_EQ(invoke({"--manifest", path("a.json"), "kg", "build", "--cwe", cwe, "-o", path("a.bin")}).code, kExitOk);
    ASSERT_EQ(invoke({"--manifest", path("b.json"), "kg", "build", "--cwe", cwe, "-o", path("b.bin")}).code, kExitOk);
    ASSERT_EQ(invoke({"--manifest", path("c.json"), "--seed", "7", "kg", "build", "--cwe", cwe, "-o", path("c.bin")})
                  .code,
              kExitOk);
    const auto a = json::parse(read_file(path("a.json")));
    const auto b = json::parse(read_file(path("b.json")));
    const auto c = json::parse(read_file(path("c.json")));
    EXPECT_EQ(a["config_hash"], b["config_hash"]);
    EXPECT_NE(a["config_hash"], c["config_hash"]);
    EXPECT_EQ(c["seed"], 7);
    EXPECT_EQ(read_file(path("a.bin")), read_file(path("b.bin")));
}

TEST_F(CliTest, EvalPerfectPredictionsScoreOne) {
    const auto samples = testing::synthetic_samples(12);
    write_file(path("gold.jsonl"), distill::write_samples(samples));
    std::vector<json> preds;
    for (const auto& s : samples) {
        std::string text = s.label == 1 ? "VERDICT: VULNERABLE\nCWE: " + *s.cwe_ids.begin() : "VERDICT: SAFE\nCWE: NONE";
        preds.push_back({{"id", s.id}, {"output_text", text}});
    }
    write_file(path("pred.jsonl"), dump_jsonl(preds));
    const auto r = invoke({"eval", "--gold", path("gold.jsonl"), "--pred", path("pred.jsonl"), "--json",
                           path("metrics.json"), "--per-class"});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    const auto m = json::parse(read_file(path("metrics.json")));
    EXPECT_EQ(m["binary"]["f1"], 1.0);
    EXPECT_EQ(m["multilabel"]["micro_f1"], 1.0);
    EXPECT_EQ(m["multilabel"]["macro_f1"], 1.0);
    EXPECT_NE(r.out.find("CWE-"), std::string::npos);
}

TEST_F(CliTest, OrpoVerifyPasses) {
    const auto r = invoke({"--manifest", path("m.json"), "orpo", "verify", "--seeds", "10"});
    EXPECT_EQ(r.code, kExitOk) << r.out << r.err;
    EXPECT_EQ(r.out.find("FAIL"), std::string::npos);
}

TEST_F(CliTest, OrpoToyTrainSeparates) {
    const auto r = invoke({"--manifest", path("m.json"), "orpo", "toy-train", "--pairs", "20", "--audit",
                           path("audit.jsonl")});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    EXPECT_NE(r.out.find("separated: 20/20"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("increases: 0"), std::string::npos) << r.out;
    EXPECT_EQ(parse_jsonl(read_file(path("audit.jsonl"))).size(), 20u);
}

TEST_F(CliTest, RetrieveFromResponseEntities) {
    const auto samples = write_samples("s.jsonl", 12);
    const std::string cfg = testing::config_file("vulread.json").string();
    ASSERT_EQ(invoke({"--config", cfg, "kg", "build", "--cwe", testing::fixture("cwe_50.csv").string(), "-o",
                      path("kg.bin")})
                  .code,
              kExitOk);
    ASSERT_EQ(invoke({"--config", cfg, "distill", "--kg", path("kg.bin"), "--samples", samples, "-o",
                      path("pairs.jsonl")})
                  .code,
              kExitOk);
    ASSERT_EQ(invoke({"--config", cfg, "kg", "augment", "--kg", path("kg.bin"), "--pairs", path("pairs.jsonl"),
                      "--samples", samples, "--min-count", "1", "-o", path("kg2.bin")})
                  .code,
              kExitOk);
    const auto pair = parse_jsonl(read_file(path("pairs.jsonl"))).front();
    write_file(path("response.txt"), pair["valid_raw"].get<std::string>());
    const auto r = invoke({"--config", cfg, "retrieve", "--kg", path("kg2.bin"), "--entities-from",
                           path("response.txt"), "--json", path("ctx.json")});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    const auto doc = json::parse(read_file(path("ctx.json")));
    EXPECT_FALSE(doc["entities"].empty());
    EXPECT_FALSE(doc["candidate_cwes"].empty());

    write_file(path("garbage.txt"), "no sections here");
    EXPECT_EQ(invoke({"retrieve", "--kg", path("kg2.bin"), "--entities-from", path("garbage.txt")}).code,
              kExitRuntime);
}

TEST_F(CliTest, SplitAndBalance) {
    const auto samples = write_samples("s.jsonl", 11);
    ASSERT_EQ(invoke({"split", "--samples", samples, "--out-dir", path("split")}).code, kExitOk);
    EXPECT_EQ(parse_jsonl(read_file(path("split/train.jsonl"))).size(), 9u);
    EXPECT_EQ(parse_jsonl(read_file(path("split/val.jsonl"))).size(), 1u);
    EXPECT_EQ(parse_jsonl(read_file(path("split/test.jsonl"))).size(), 1u);
    EXPECT_EQ(invoke({"split", "--samples", samples, "--ratios", "8:0:1", "--out-dir", path("x")}).code,
              kExitValidation);

    const auto b = invoke({"balance", "--samples", samples, "--target", "8", "-o", path("bal.jsonl"), "--report",
                           path("bal.json")});
    ASSERT_EQ(b.code, kExitOk) << b.err;
    EXPECT_EQ(parse_jsonl(read_file(path("bal.jsonl"))).size(), 8u);
    EXPECT_EQ(json::parse(read_file(path("bal.json")))["kept_vulnerable"], 6);
}

// Full mock pipeline: build, distill, augment, prefs, retrieve, export.
void pipeline(const fs::path& dir, const std::string& samples) {
    auto p = [&](const char* name) { return (dir / name).string(); };
    const std::string cfg = testing::config_file("vulread.json").string();
    auto step = [&](std::vector<std::string> args) {
        args.insert(args.begin(), {"--config", cfg, "--manifest", p("manifest.json")});
        const auto r = invoke(args);
        ASSERT_EQ(r.code, kExitOk) << args[4] << ": " << r.err;
    };
    step({"kg", "build", "--cwe", testing::fixture("cwe_50.csv").string(), "-o", p("kg.bin")});
    step({"distill", "--kg", p("kg.bin"), "--samples", samples, "-o", p("pairs.jsonl")});
    step({"kg", "augment", "--kg", p("kg.bin"), "--pairs", p("pairs.jsonl"), "--samples", samples, "-o",
          p("kg2.bin")});
    step({"prefs", "export", "--pairs", p("pairs.jsonl"), "--samples", samples, "--kg", p("kg2.bin"), "-o",
          p("prefs.jsonl")});
    step({"retrieve", "--kg", p("kg2.bin"), "--samples", samples, "--id", "s000", "--json", p("ctx.json")});
    step({"kg", "export", "--kg", p("kg2.bin"), "-o", p("kg.cypher")});
}

TEST_F(CliTest, MockPipelineIsByteIdenticalAcrossRuns) {
    const auto samples = write_samples("s.jsonl", 30);
    fs::create_directories(dir_ / "a");
    fs::create_directories(dir_ / "b");
    pipeline(dir_ / "a", samples);
    pipeline(dir_ / "b", samples);
    for (const char* name : {"kg.bin", "pairs.jsonl", "pairs.jsonl.quarantine.jsonl", "kg2.bin", "prefs.jsonl",
                             "ctx.json", "kg.cypher"}) {
        const auto a = read_file(dir_ / "a" / name);
        if (std::string(name).find("quarantine") == std::string::npos) {
            EXPECT_FALSE(a.empty()) << name;
        }
        EXPECT_EQ(a, read_file(dir_ / "b" / name)) << name;
    }
    const auto prefs = parse_jsonl(read_file(dir_ / "a" / "prefs.jsonl"));
    EXPECT_FALSE(prefs.empty());
    for (const auto& rec : prefs) {
        EXPECT_EQ(rec["prompt"].get<std::string>().find("CVE-20"), std::string::npos);
        EXPECT_NE(rec["chosen"], rec["rejected"]);
    }
}

} // namespace
} // namespace vulread::cli
