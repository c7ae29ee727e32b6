// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 vulread contributors

#include "vulread/cli/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <memory>
#include <ostream>

#include <CLI11.hpp>

#include "vulread/common.hpp"
#include "vulread/distill/distill.hpp"
#include "vulread/error.hpp"
#include "vulread/eval/evaluation.hpp"
#include "vulread/kg/class_mapping.hpp"
#include "vulread/kg/cwe_ingest.hpp"
#include "vulread/kg/embedding.hpp"
#include "vulread/kg/graph.hpp"

namespace vulread::cli {

namespace fs = std::filesystem;
using nlohmann::json;

// ---- config -----------------------------------------------------------------

nlohmann::json PipelineConfig::to_json() const {
    auto path = [](const std::optional<fs::path>& p) { return p ? json(p->generic_string()) : json(nullptr); };
    return json{{"seed", seed},
                {"parallel", parallel},
                {"backend", backend},
                {"llm",
                 {{"model", chat_model},
                  {"embedding_model", embedding_model},
                  {"max_input_tokens", budget.max_input_tokens},
                  {"chars_per_token", budget.chars_per_token},
                  {"max_tokens", max_tokens}}},
                {"retrieval",
                 {{"k", retrieval.k},
                  {"max_rendered_chars", retrieval.max_rendered_chars},
                  {"min_count", augment_min_count},
                  {"min_similarity", augment_min_similarity}}},
                {"orpo",
                 {{"lambda", orpo.orpo.lambda},
                  {"learning_rate", orpo.learning_rate},
                  {"steps", orpo.steps},
                  {"seed", orpo.seed}}},
                {"paths",
                 {{"classes", path(classes_path)},
                  {"stoplist", path(stoplist_path)},
                  {"libraries", path(libraries_path)},
                  {"teacher_template", path(teacher_template_path)},
                  {"inference_template", path(inference_template_path)}}}};
}

namespace {

template <typename T>
void read_key(const json& object, const char* key, T& target, const std::string& where) {
    const auto it = object.find(key);
    if (it == object.end() || it->is_null()) return;
    try {
        target = it->get<T>();
    } catch (const json::exception&) {
        throw Error(Errc::SchemaError, "config key " + where + key + " has the wrong type");
    }
}

const json& section(const json& document, const char* name) {
    static const json empty = json::object();
    const auto it = document.find(name);
    if (it == document.end() || it->is_null()) return empty;
    if (!it->is_object()) throw Error(Errc::SchemaError, std::string("config section ") + name + " must be an object");
    return *it;
}

} // namespace

PipelineConfig load_config(const json& document, const fs::path& base_dir) {
    if (!document.is_object()) throw Error(Errc::SchemaError, "config must be a JSON object");
    PipelineConfig cfg;
    read_key(document, "seed", cfg.seed, "");
    read_key(document, "parallel", cfg.parallel, "");
    read_key(document, "backend", cfg.backend, "");

    const auto& llm_section = section(document, "llm");
    read_key(llm_section, "model", cfg.chat_model, "llm.");
    read_key(llm_section, "embedding_model", cfg.embedding_model, "llm.");
    read_key(llm_section, "max_input_tokens", cfg.budget.max_input_tokens, "llm.");
    read_key(llm_section, "chars_per_token", cfg.budget.chars_per_token, "llm.");
    read_key(llm_section, "max_tokens", cfg.max_tokens, "llm.");

    const auto& retrieval_section = section(document, "retrieval");
    read_key(retrieval_section, "k", cfg.retrieval.k, "retrieval.");
    read_key(retrieval_section, "max_rendered_chars", cfg.retrieval.max_rendered_chars, "retrieval.");
    read_key(retrieval_section, "min_count", cfg.augment_min_count, "retrieval.");
    read_key(retrieval_section, "min_similarity", cfg.augment_min_similarity, "retrieval.");

    cfg.orpo = orpo::train_options_from_config(document, cfg.orpo);

    const auto& paths = section(document, "paths");
    auto path_key = [&](const char* key, std::optional<fs::path>& target) {
        std::string value;
        read_key(paths, key, value, "paths.");
        if (value.empty()) return;
        fs::path p(value);
        if (p.is_relative()) p = base_dir / p;
        if (!fs::exists(p)) throw Error(Errc::Io, std::string("paths.") + key + " does not exist: " + p.string());
        target = p;
    };
    path_key("classes", cfg.classes_path);
    path_key("stoplist", cfg.stoplist_path);
    path_key("libraries", cfg.libraries_path);
    path_key("teacher_template", cfg.teacher_template_path);
    path_key("inference_template", cfg.inference_template_path);

    if (cfg.backend != "mock" && cfg.backend != "http") throw Error(Errc::SchemaError, "backend must be mock or http");
    if (cfg.parallel == 0) throw Error(Errc::SchemaError, "parallel must be positive");
    if (cfg.retrieval.k == 0) throw Error(Errc::SchemaError, "retrieval.k must be positive");
    return cfg;
}

nlohmann::json Manifest::to_json() const {
    return json{{"tool", "vulread"},
                {"version", std::string(kToolVersion)},
                {"command", command},
                {"seed", seed},
                {"config_hash", config_hash},
                {"inputs", inputs},
                {"outputs", outputs}};
}

int exit_code_for(Errc code) noexcept {
    switch (code) {
        case Errc::InvalidArgument:
        case Errc::CorruptInput:
        case Errc::DecodeError:
        case Errc::SchemaError:
        case Errc::MalformedCweId:
        case Errc::TemplateMissingPlaceholder:
        case Errc::UnknownPlaceholder:
        case Errc::MissingSample:
        case Errc::MissingClassNode:
        case Errc::TokenOutOfRange:
        case Errc::EmptyInput:
        case Errc::Io:
            return kExitValidation;
        default:
            return kExitRuntime;
    }
}

// ---- run context ------------------------------------------------------------

namespace {

struct Context {
    PipelineConfig cfg;
    Manifest manifest;
    std::optional<fs::path> manifest_path;
    std::ostream& out;
    std::ostream& err;

    std::string input(const fs::path& path) {
        if (!fs::exists(path)) throw Error(Errc::Io, "input does not exist: " + path.string());
        auto bytes = read_file(path);
        manifest.inputs[path.generic_string()] = sha256_hex(bytes);
        return bytes;
    }

    void output(const fs::path& path, std::string_view bytes) {
        if (path.has_parent_path()) fs::create_directories(path.parent_path());
        write_file(path, bytes);
        manifest.outputs[path.generic_string()] = sha256_hex(bytes);
        if (!manifest_path) manifest_path = fs::path(path.string() + ".manifest.json");
    }

    void log(const std::string& line) { err << line << '\n'; }

    void write_manifest() {
        const auto path = manifest_path.value_or(fs::path("vulread.manifest.json"));
        write_file(path, manifest.to_json().dump(1) + "\n");
    }
};

kg::KnowledgeGraph load_graph(Context& ctx, const fs::path& path) {
    auto graph = kg::deserialize(ctx.input(path));
    graph.freeze();
    return graph;
}

std::vector<kg::AbstractClassDef> load_classes(Context& ctx) {
    if (!ctx.cfg.classes_path) return kg::default_classes();
    return kg::parse_class_config(ctx.input(*ctx.cfg.classes_path));
}

retrieval::Lexicon load_lexicon(Context& ctx) {
    auto lexicon = retrieval::Lexicon::default_c();
    if (ctx.cfg.stoplist_path) lexicon.stoplist = retrieval::parse_token_list(ctx.input(*ctx.cfg.stoplist_path));
    if (ctx.cfg.libraries_path) lexicon.libraries = retrieval::parse_token_list(ctx.input(*ctx.cfg.libraries_path));
    return lexicon;
}

std::vector<distill::FunctionSample> load_samples(Context& ctx, const fs::path& path, bool allow_unlabeled = false) {
    std::vector<distill::FunctionSample> samples;
    for (const auto& record : parse_jsonl(ctx.input(path))) {
        samples.push_back(distill::sample_from_json(record, allow_unlabeled));
    }
    return samples;
}

llm::BackendConfig http_config(const PipelineConfig& cfg) {
    auto config = llm::BackendConfig::from_env();
    if (config.base_url.empty()) throw Error(Errc::InvalidArgument, "VULREAD_API_BASE must be set for --backend http");
    config.max_in_flight = cfg.parallel;
    config.budget = cfg.budget;
    config.retry.jitter_seed = cfg.seed;
    return config;
}

/// Owns the embedder chain selected by the backend setting.
struct Embedders {
    std::unique_ptr<kg::EmbeddingProvider> base;
    std::unique_ptr<kg::CachedEmbedder> cached;

    kg::EmbeddingProvider* get() { return cached ? static_cast<kg::EmbeddingProvider*>(cached.get()) : base.get(); }
};

Embedders make_embedder(const PipelineConfig& cfg, const std::optional<fs::path>& cache) {
    Embedders e;
    if (cfg.backend == "http") {
        e.base = std::make_unique<llm::HttpEmbeddingProvider>(http_config(cfg), cfg.embedding_model);
    } else {
        e.base = std::make_unique<kg::HashEmbedder>();
    }
    if (cache) e.cached = std::make_unique<kg::CachedEmbedder>(*e.base, *cache);
    return e;
}

distill::PromptTemplate load_template(Context& ctx, const std::optional<fs::path>& path, distill::TemplateRole role) {
    if (!path) {
        return role == distill::TemplateRole::Teacher ? distill::PromptTemplate::default_teacher()
                                                      : distill::PromptTemplate::default_inference();
    }
    return distill::PromptTemplate(ctx.input(*path), role);
}

json mapping_report_json(const kg::MappingReport& report) {
    json per_cwe = json::object();
    for (const auto& [id, a] : report.per_cwe) {
        json entry{{"classes", a.classes}, {"method", a.method == kg::MappingMethod::Keyword ? "keyword" : "embedding"}};
        if (a.similarity) entry["similarity"] = *a.similarity;
        per_cwe[id] = entry;
    }
    return json{{"keyword_assigned", report.keyword_assigned},
                {"embedding_assigned", report.embedding_assigned},
                {"per_cwe", per_cwe}};
}

std::size_t uncovered_cwes(const kg::KnowledgeGraph& graph) {
    std::size_t n = 0;
    for (const auto* node : graph.nodes_of_kind(kg::NodeKind::Cwe)) {
        if (graph.degree(node->id, kg::EdgeKind::MemberOf, kg::Direction::Out) == 0) ++n;
    }
    return n;
}

std::string fixed(double v, int decimals = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

std::string jsonl(const std::vector<json>& records) { return dump_jsonl(records); }

// ---- subcommands ------------------------------------------------------------

struct KgBuildArgs {
    std::string cwe;
    std::string format;
    std::string out;
    std::string report;
    std::string embed_cache;
};

int kg_build(Context& ctx, const KgBuildArgs& a) {
    auto format = kg::CorpusFormat::Csv;
    if (a.format == "xml" || (a.format.empty() && fs::path(a.cwe).extension() == ".xml")) format = kg::CorpusFormat::Xml;
    const auto corpus = kg::parse_cwe_corpus(ctx.input(a.cwe), format);
    const auto classes = load_classes(ctx);

    kg::KnowledgeGraph graph;
    const auto load = kg::load_into_graph(corpus.records, graph);
    if (!corpus.report.corpus_version.empty()) graph.set_attribute("cwe_version", corpus.report.corpus_version);
    kg::add_class_nodes(graph, classes);
    auto embedders = make_embedder(ctx.cfg, a.embed_cache.empty() ? std::nullopt : std::optional<fs::path>(a.embed_cache));
    const auto mapping = kg::map_corpus(graph, classes, embedders.get());
    graph.freeze();

    ctx.output(a.out, kg::serialize(graph));
    if (!a.report.empty()) {
        json report{{"ingest",
                     {{"parsed", corpus.report.parsed},
                      {"dropped_empty_description", corpus.report.dropped_empty_description},
                      {"dropped_deprecated", corpus.report.dropped_deprecated},
                      {"dangling_parent_links", corpus.report.dangling_parent_links},
                      {"corpus_version", corpus.report.corpus_version}}},
                    {"load", {{"added", load.added}, {"child_edges", load.child_edges}}},
                    {"mapping", mapping_report_json(mapping)}};
        ctx.output(a.report, report.dump(1) + "\n");
    }
    ctx.out << "cwe nodes: " << corpus.records.size() << "  keyword-mapped: " << mapping.keyword_assigned
            << "  embedding-mapped: " << mapping.embedding_assigned << "  uncovered: " << uncovered_cwes(graph) << '\n';
    return kExitOk;
}

struct KgMapArgs {
    std::string kg;
    std::string out;
    std::string report;
    std::string embed_cache;
};

int kg_map(Context& ctx, const KgMapArgs& a) {
    auto graph = load_graph(ctx, a.kg).unfrozen_copy();
    const auto classes = load_classes(ctx);
    kg::add_class_nodes(graph, classes);
    auto embedders = make_embedder(ctx.cfg, a.embed_cache.empty() ? std::nullopt : std::optional<fs::path>(a.embed_cache));
    const auto mapping = kg::map_corpus(graph, classes, embedders.get());
    graph.freeze();
    ctx.output(a.out, kg::serialize(graph));
    if (!a.report.empty()) ctx.output(a.report, mapping_report_json(mapping).dump(1) + "\n");
    ctx.out << "keyword-mapped: " << mapping.keyword_assigned << "  embedding-mapped: " << mapping.embedding_assigned
            << "  uncovered: " << uncovered_cwes(graph) << '\n';
    return kExitOk;
}

struct KgAugmentArgs {
    std::string kg;
    std::string pairs;
    std::string samples;
    std::string out;
    bool use_embeddings = false;
};

int kg_augment(Context& ctx, const KgAugmentArgs& a) {
    auto graph = load_graph(ctx, a.kg).unfrozen_copy();
    const auto known = distill::class_ids(graph);
    std::vector<distill::RationalePair> pairs;
    for (const auto& record : parse_jsonl(ctx.input(a.pairs))) pairs.push_back(distill::pair_from_json(record, &known));
    const auto samples = load_samples(ctx, a.samples);
    std::map<std::string, const distill::FunctionSample*> by_id;
    for (const auto& s : samples) by_id.emplace(s.id, &s);

    std::vector<retrieval::MinedRationale> mined;
    for (const auto& p : pairs) {
        const auto it = by_id.find(p.sample_id);
        if (it == by_id.end()) throw Error(Errc::MissingSample, "no sample for pair " + p.sample_id);
        mined.push_back(retrieval::MinedRationale{&p.valid, it->second});
    }
    retrieval::AugmentOptions options;
    options.min_count = ctx.cfg.augment_min_count;
    options.min_similarity = ctx.cfg.augment_min_similarity;
    Embedders embedders;
    if (a.use_embeddings) {
        embedders = make_embedder(ctx.cfg, std::nullopt);
        options.embedder = embedders.get();
    }
    const auto report = retrieval::augment(graph, mined, options);
    graph.freeze();
    ctx.output(a.out, kg::serialize(graph));
    ctx.out << "entities added: " << report.entities_added << "  edges added: " << report.edges_added
            << "  edges updated: " << report.edges_updated << "  skipped: " << report.skipped_unknown_targets << '\n';
    return kExitOk;
}

int kg_export(Context& ctx, const std::string& kg_path, const std::string& out) {
    const auto graph = load_graph(ctx, kg_path);
    ctx.output(out, kg::export_statements(graph));
    ctx.out << "nodes: " << graph.node_count() << "  edges: " << graph.edge_count() << '\n';
    return kExitOk;
}

struct DistillArgs {
    std::string kg;
    std::string samples;
    std::string out;
    std::string quarantine;
    std::string canned;
    std::string teacher_model;
};

int distill_cmd(Context& ctx, const DistillArgs& a) {
    const auto graph = load_graph(ctx, a.kg);
    const auto samples = load_samples(ctx, a.samples);
    const auto lexicon = load_lexicon(ctx);

    distill::DistillOptions options;
    options.teacher_model = a.teacher_model.empty() ? ctx.cfg.chat_model : a.teacher_model;
    options.teacher_template = load_template(ctx, ctx.cfg.teacher_template_path, distill::TemplateRole::Teacher);
    options.retrieval = ctx.cfg.retrieval;
    options.lexicon = &lexicon;
    options.budget = ctx.cfg.budget;
    options.max_tokens = ctx.cfg.max_tokens;
    options.seed = static_cast<std::int64_t>(ctx.cfg.seed);
    options.parallel = ctx.cfg.parallel;

    std::unique_ptr<llm::ChatBackend> backend;
    if (ctx.cfg.backend == "http") {
        backend = std::make_unique<llm::HttpChatBackend>(http_config(ctx.cfg));
    } else {
        auto mock = std::make_unique<llm::MockChatBackend>(distill::ScriptedTeacher(distill::class_ids(graph)));
        if (!a.canned.empty()) mock->load_canned(ctx.input(a.canned));
        backend = std::move(mock);
    }

    const auto result = distill::distill_corpus(samples, *backend, graph, options);
    std::vector<json> pair_records;
    for (const auto& p : result.pairs) pair_records.push_back(distill::pair_to_json(p));
    std::vector<json> quarantine_records;
    for (const auto& q : result.quarantine) quarantine_records.push_back(distill::quarantine_to_json(q));
    ctx.output(a.out, jsonl(pair_records));
    ctx.output(a.quarantine.empty() ? a.out + ".quarantine.jsonl" : a.quarantine, jsonl(quarantine_records));
    ctx.out << "pairs: " << result.pairs.size() << "  quarantined: " << result.quarantine.size() << '\n';
    for (const auto& q : result.quarantine) ctx.log("quarantined " + q.sample_id + ": " + q.message);
    return kExitOk;
}

struct PrefsArgs {
    std::string pairs;
    std::string samples;
    std::string kg;
    std::string out;
    std::string rejected;
};

int prefs_export(Context& ctx, const PrefsArgs& a) {
    const auto graph = load_graph(ctx, a.kg);
    const auto known = distill::class_ids(graph);
    std::vector<distill::RationalePair> pairs;
    for (const auto& record : parse_jsonl(ctx.input(a.pairs))) pairs.push_back(distill::pair_from_json(record, &known));
    const auto samples = load_samples(ctx, a.samples);
    const auto lexicon = load_lexicon(ctx);

    distill::PreferenceOptions options;
    options.inference_template = load_template(ctx, ctx.cfg.inference_template_path, distill::TemplateRole::Inference);
    options.retrieval = ctx.cfg.retrieval;
    options.lexicon = &lexicon;
    options.budget = ctx.cfg.budget;
    const auto exported = distill::to_preference_records(pairs, samples, graph, options);

    std::vector<json> records;
    for (const auto& r : exported.records) records.push_back(distill::preference_to_json(r));
    ctx.output(a.out, jsonl(records));
    if (!a.rejected.empty()) {
        std::vector<json> rejected;
        for (const auto& q : exported.rejected) rejected.push_back(distill::quarantine_to_json(q));
        ctx.output(a.rejected, jsonl(rejected));
    }
    ctx.out << "records: " << exported.records.size() << "  contrast-collapse: " << exported.contrast_collapse
            << "  rejected: " << exported.rejected.size() << '\n';
    return kExitOk;
}

int orpo_verify(Context& ctx, std::size_t seeds, std::size_t vocab) {
    const auto start = std::chrono::steady_clock::now();
    double worst = 0.0;
    for (std::size_t s = 0; s < seeds; ++s) {
        const auto seed = ctx.cfg.seed + s;
        const auto params = orpo::ToyLmParams::random(vocab, seed);
        const auto pair = orpo::synthetic_pairs(1, vocab, seed).front();
        worst = std::max(worst, orpo::grad_check(params, pair, ctx.cfg.orpo.orpo));
    }
    const double equal = orpo::or_loss(std::log(0.6), std::log(0.6));
    const double anchor = orpo::or_loss(std::log(0.8), std::log(0.5));
    const bool grad_ok = worst < 1e-4;
    const bool equal_ok = std::abs(equal - std::log(2.0)) <= 1e-12;
    const bool anchor_ok = std::abs(anchor + std::log(0.8)) <= 1e-12;
    const auto ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
    char line[200];
    std::snprintf(line, sizeof line, "grad_check max relative error: %.3e over %zu seeds (V=%zu) %s\n", worst, seeds,
                  vocab, grad_ok ? "ok" : "FAIL");
    ctx.out << line;
    std::snprintf(line, sizeof line, "or_loss(equal) = %.15f (ln 2) %s\n", equal, equal_ok ? "ok" : "FAIL");
    ctx.out << line;
    std::snprintf(line, sizeof line, "or_loss(0.8, 0.5) = %.15f (-ln 0.8) %s\n", anchor, anchor_ok ? "ok" : "FAIL");
    ctx.out << line;
    ctx.out << "elapsed: " << ms << " ms\n";
    return grad_ok && equal_ok && anchor_ok ? kExitOk : kExitRuntime;
}

struct ToyTrainArgs {
    std::string prefs;
    std::string audit;
    std::size_t vocab = 16;
    std::size_t pairs = 20;
};

int orpo_toy_train(Context& ctx, const ToyTrainArgs& a) {
    std::vector<orpo::ToyPair> pairs;
    if (!a.prefs.empty()) {
        for (const auto& record : parse_jsonl(ctx.input(a.prefs))) {
            const auto pref = distill::preference_from_json(record);
            pairs.push_back(orpo::ToyPair{pref.id, orpo::toy_tokenize(pref.prompt, a.vocab),
                                          orpo::toy_tokenize(pref.chosen, a.vocab),
                                          orpo::toy_tokenize(pref.rejected, a.vocab)});
        }
    } else {
        pairs = orpo::synthetic_pairs(a.pairs, a.vocab, ctx.cfg.orpo.seed);
    }
    const auto report = orpo::toy_train(pairs, a.vocab, ctx.cfg.orpo);
    std::size_t increases = 0;
    for (std::size_t i = 1; i < report.loss_trajectory.size(); ++i) {
        if (report.loss_trajectory[i] > report.loss_trajectory[i - 1] + 1e-12) ++increases;
    }
    if (!a.audit.empty()) {
        std::vector<json> records;
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            records.push_back(orpo::audit_record(pairs[i].id, report.final_pair_losses[i]));
        }
        ctx.output(a.audit, jsonl(records));
    }
    ctx.out << "pairs: " << pairs.size() << "  steps: " << ctx.cfg.orpo.steps << "  lambda: " << ctx.cfg.orpo.orpo.lambda
            << '\n';
    ctx.out << "loss: " << fixed(report.loss_trajectory.empty() ? report.final_loss : report.loss_trajectory.front(), 6)
            << " -> " << fixed(report.final_loss, 6) << "  increases: " << increases << '\n';
    ctx.out << "separated: " << report.separated << "/" << pairs.size() << "  clamped: " << report.clamped << '\n';
    return kExitOk;
}

struct RetrieveArgs {
    std::string kg;
    std::string code;
    std::string samples;
    std::string id;
    std::string json_out;
    std::string entities_from;
};

std::string context_json(const retrieval::RetrievalContext& context) {
    json entities = json::array();
    for (const auto& e : context.entities) {
        entities.push_back({{"name", e.name}, {"kind", retrieval::to_string(e.kind)}, {"occurrences", e.occurrences}});
    }
    auto scored = [](const std::vector<retrieval::ScoredId>& items) {
        json arr = json::array();
        for (const auto& s : items) arr.push_back({{"id", s.id}, {"score", s.score}});
        return arr;
    };
    json doc{{"entities", entities},
             {"classes", scored(context.classes)},
             {"candidate_cwes", scored(context.candidate_cwes)},
             {"rendered", context.rendered}};
    return doc.dump(1) + "\n";
}

int retrieve_cmd(Context& ctx, const RetrieveArgs& a) {
    const auto graph = load_graph(ctx, a.kg);
    std::vector<retrieval::CodeEntity> entities;
    if (!a.entities_from.empty()) {
        const auto known = distill::class_ids(graph);
        entities = retrieval::entities_from_rationale(distill::parse_rationale(ctx.input(a.entities_from), &known));
    } else {
        std::string code;
        if (!a.code.empty()) {
            code = ctx.input(a.code);
        } else {
            if (a.samples.empty() || a.id.empty()) {
                throw Error(Errc::InvalidArgument, "give --code, --entities-from, or --samples with --id");
            }
            for (const auto& s : load_samples(ctx, a.samples)) {
                if (s.id == a.id) code = s.code;
            }
            if (code.empty()) throw Error(Errc::MissingSample, "no sample with id " + a.id);
        }
        entities = retrieval::extract_entities(code, load_lexicon(ctx));
    }
    const auto context = retrieval::retrieve(graph, entities, ctx.cfg.retrieval);
    ctx.out << context.rendered << '\n';
    if (!a.json_out.empty()) ctx.output(a.json_out, context_json(context));
    return kExitOk;
}

struct EvalArgs {
    std::string gold;
    std::string pred;
    std::string json_out;
    std::string table_out;
    bool per_class = false;
};

int eval_cmd(Context& ctx, const EvalArgs& a) {
    const auto gold = load_samples(ctx, a.gold);
    const auto predictions = eval::parse_predictions(parse_jsonl(ctx.input(a.pred)));
    const auto report = eval::evaluate(gold, predictions);
    const auto table = eval::report_to_table(report, a.per_class);
    ctx.out << table;
    if (!a.json_out.empty()) ctx.output(a.json_out, eval::report_to_json(report).dump(1) + "\n");
    if (!a.table_out.empty()) ctx.output(a.table_out, table);
    if (report.unknown_predictions > 0) {
        ctx.log(std::to_string(report.unknown_predictions) + " predictions have no gold sample and were ignored");
    }
    return kExitOk;
}

struct SplitArgs {
    std::string samples;
    std::string ratios = "8:1:1";
    std::string out_dir;
    bool stratify = false;
};

int split_cmd(Context& ctx, const SplitArgs& a) {
    const auto parts = split(a.ratios, ':');
    std::array<unsigned, 3> ratios{};
    if (parts.size() != 3) throw Error(Errc::InvalidArgument, "--ratios must look like 8:1:1");
    for (std::size_t i = 0; i < 3; ++i) {
        try {
            const auto v = std::stoul(parts[i]);
            if (v == 0) throw std::invalid_argument("zero");
            ratios[i] = static_cast<unsigned>(v);
        } catch (const std::exception&) {
            throw Error(Errc::InvalidArgument, "--ratios must be three positive integers");
        }
    }
    const auto samples = load_samples(ctx, a.samples, true);
    const auto result = eval::split(samples, ratios, ctx.cfg.seed, a.stratify);
    const fs::path dir(a.out_dir);
    ctx.output(dir / "train.jsonl", distill::write_samples(result.train));
    ctx.output(dir / "val.jsonl", distill::write_samples(result.val));
    ctx.output(dir / "test.jsonl", distill::write_samples(result.test));
    ctx.out << "train: " << result.train.size() << "  val: " << result.val.size() << "  test: " << result.test.size()
            << '\n';
    return kExitOk;
}

struct BalanceArgs {
    std::string samples;
    std::size_t target = 0;
    std::string out;
    std::string report;
};

int balance_cmd(Context& ctx, const BalanceArgs& a) {
    if (a.target == 0) throw Error(Errc::InvalidArgument, "--target must be positive");
    const auto samples = load_samples(ctx, a.samples, true);
    const auto result = eval::balance(samples, a.target, ctx.cfg.seed);
    ctx.output(a.out, distill::write_samples(result.samples));
    if (!a.report.empty()) ctx.output(a.report, eval::balance_report_to_json(result.report).dump(1) + "\n");
    const auto& r = result.report;
    ctx.out << "input: " << r.input << "  excluded without CWE: " << r.excluded_without_cwe << "  output: " << r.output
            << "  vulnerable: " << r.kept_vulnerable << "  safe: " << r.kept_safe << '\n';
    if (!r.note.empty()) ctx.out << "note: " << r.note << '\n';
    if (!r.eliminated.empty()) ctx.log("warning: " + std::to_string(r.eliminated.size()) + " CWE categories eliminated");
    return kExitOk;
}

} // namespace

// ---- entry point ------------------------------------------------------------

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Knowledge-graph guided vulnerability reasoning toolkit", "vulread"};
    app.set_version_flag("--version", std::string(kToolVersion));
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> parallel;
    std::string backend;
    std::string manifest_path;
    app.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "seed for all randomness (default 42)");
    app.add_option("--parallel", parallel, "max concurrent backend requests")->check(CLI::PositiveNumber);
    app.add_option("--backend", backend, "mock or http")->check(CLI::IsMember({"mock", "http"}));
    app.add_option("--manifest", manifest_path, "where to write the run manifest");

    auto* kg_cmd = app.add_subcommand("kg", "knowledge graph stages");
    kg_cmd->require_subcommand(1);

    KgBuildArgs build;
    auto* build_cmd = kg_cmd->add_subcommand("build", "ingest a CWE corpus, map it to abstraction classes");
    build_cmd->add_option("--cwe", build.cwe, "CWE corpus (CSV or XML)")->required()->check(CLI::ExistingFile);
    build_cmd->add_option("--format", build.format, "csv or xml (default: by extension)")
        ->check(CLI::IsMember({"csv", "xml"}));
    std::string classes_flag;
    build_cmd->add_option("--classes", classes_flag, "abstraction class config")->check(CLI::ExistingFile);
    build_cmd->add_option("-o,--out", build.out, "output KG file")->required();
    build_cmd->add_option("--report", build.report, "mapping report (JSON)");
    build_cmd->add_option("--embed-cache", build.embed_cache, "embedding cache file");

    KgMapArgs map;
    auto* map_cmd = kg_cmd->add_subcommand("map", "re-map the CWE nodes of a KG");
    map_cmd->add_option("--kg", map.kg, "input KG file")->required()->check(CLI::ExistingFile);
    map_cmd->add_option("--classes", classes_flag, "abstraction class config")->check(CLI::ExistingFile);
    map_cmd->add_option("-o,--out", map.out, "output KG file")->required();
    map_cmd->add_option("--report", map.report, "mapping report (JSON)");
    map_cmd->add_option("--embed-cache", map.embed_cache, "embedding cache file");

    KgAugmentArgs augment;
    std::optional<std::size_t> min_count;
    std::optional<double> min_similarity;
    auto* augment_cmd = kg_cmd->add_subcommand("augment", "mine entity edges from distilled rationales");
    augment_cmd->add_option("--kg", augment.kg, "input KG file")->required()->check(CLI::ExistingFile);
    augment_cmd->add_option("--pairs", augment.pairs, "rationale pairs (JSONL)")->required()->check(CLI::ExistingFile);
    augment_cmd->add_option("--samples", augment.samples, "samples (JSONL)")->required()->check(CLI::ExistingFile);
    augment_cmd->add_option("-o,--out", augment.out, "output KG file")->required();
    augment_cmd->add_option("--min-count", min_count, "co-occurrence threshold");
    augment_cmd->add_option("--min-similarity", min_similarity, "embedding similarity threshold");
    augment_cmd->add_flag("--embeddings", augment.use_embeddings, "link rarer pairs by embedding similarity");

    std::string export_kg;
    std::string export_out;
    auto* export_cmd = kg_cmd->add_subcommand("export", "write graph-database MERGE statements");
    export_cmd->add_option("--kg", export_kg, "input KG file")->required()->check(CLI::ExistingFile);
    export_cmd->add_option("-o,--out", export_out, "statement file")->required();

    DistillArgs dist;
    auto* distill_sub = app.add_subcommand("distill", "generate valid/flawed rationale pairs");
    distill_sub->add_option("--kg", dist.kg, "KG file")->required()->check(CLI::ExistingFile);
    distill_sub->add_option("--samples", dist.samples, "samples (JSONL)")->required()->check(CLI::ExistingFile);
    distill_sub->add_option("-o,--out", dist.out, "rationale pairs (JSONL)")->required();
    distill_sub->add_option("--quarantine", dist.quarantine, "quarantine report (JSONL)");
    distill_sub->add_option("--canned", dist.canned, "mock responses keyed by prompt hash (JSON)")
        ->check(CLI::ExistingFile);
    distill_sub->add_option("--teacher-model", dist.teacher_model, "teacher model name");

    auto* prefs_cmd = app.add_subcommand("prefs", "preference datasets");
    prefs_cmd->require_subcommand(1);
    PrefsArgs prefs;
    auto* prefs_export_cmd = prefs_cmd->add_subcommand("export", "build {id, prompt, chosen, rejected} records");
    prefs_export_cmd->add_option("--pairs", prefs.pairs, "rationale pairs (JSONL)")->required()->check(CLI::ExistingFile);
    prefs_export_cmd->add_option("--samples", prefs.samples, "samples (JSONL)")->required()->check(CLI::ExistingFile);
    prefs_export_cmd->add_option("--kg", prefs.kg, "KG file")->required()->check(CLI::ExistingFile);
    prefs_export_cmd->add_option("-o,--out", prefs.out, "preference file (JSONL)")->required();
    prefs_export_cmd->add_option("--rejected", prefs.rejected, "rejected pair report (JSONL)");

    auto* orpo_cmd = app.add_subcommand("orpo", "ORPO objective checks");
    orpo_cmd->require_subcommand(1);
    std::size_t verify_seeds = 10;
    std::size_t verify_vocab = 8;
    auto* verify_cmd = orpo_cmd->add_subcommand("verify", "finite-difference gradient check and loss anchors");
    verify_cmd->add_option("--seeds", verify_seeds, "number of random seeds")->check(CLI::PositiveNumber);
    verify_cmd->add_option("--vocab", verify_vocab, "toy vocabulary size")->check(CLI::Range(4, 32));

    ToyTrainArgs toy;
    std::optional<double> lambda;
    std::optional<double> learning_rate;
    std::optional<std::size_t> steps;
    auto* toy_cmd = orpo_cmd->add_subcommand("toy-train", "train the toy bigram model on preference pairs");
    toy_cmd->add_option("--prefs", toy.prefs, "preference file (default: synthetic pairs)")->check(CLI::ExistingFile);
    toy_cmd->add_option("--audit", toy.audit, "per-pair loss audit (JSONL)");
    toy_cmd->add_option("--vocab", toy.vocab, "toy vocabulary size")->check(CLI::Range(4, 32));
    toy_cmd->add_option("--pairs", toy.pairs, "synthetic pair count")->check(CLI::PositiveNumber);
    toy_cmd->add_option("--lambda", lambda, "odds-ratio weight")->check(CLI::NonNegativeNumber);
    toy_cmd->add_option("--lr", learning_rate, "learning rate")->check(CLI::PositiveNumber);
    toy_cmd->add_option("--steps", steps, "training steps");

    RetrieveArgs ret;
    std::optional<std::size_t> top_k;
    auto* retrieve_sub = app.add_subcommand("retrieve", "preview the KG context for a function");
    retrieve_sub->add_option("--kg", ret.kg, "KG file")->required()->check(CLI::ExistingFile);
    retrieve_sub->add_option("--code", ret.code, "source file")->check(CLI::ExistingFile);
    retrieve_sub->add_option("--samples", ret.samples, "samples (JSONL)")->check(CLI::ExistingFile);
    retrieve_sub->add_option("--id", ret.id, "sample id");
    retrieve_sub->add_option("-k", top_k, "candidate CWEs to keep")->check(CLI::PositiveNumber);
    retrieve_sub->add_option("--json", ret.json_out, "write the context as JSON");
    retrieve_sub->add_option("--entities-from", ret.entities_from,
                             "take entities from the ENTITIES section of a model response")
        ->check(CLI::ExistingFile);

    EvalArgs ev;
    auto* eval_sub = app.add_subcommand("eval", "score predictions against gold samples");
    eval_sub->add_option("--gold", ev.gold, "gold samples (JSONL)")->required()->check(CLI::ExistingFile);
    eval_sub->add_option("--pred", ev.pred, "predictions {id, output_text} (JSONL)")->required()->check(CLI::ExistingFile);
    eval_sub->add_option("--json", ev.json_out, "metrics report (JSON)");
    eval_sub->add_option("-o,--out", ev.table_out, "metrics table (text)");
    eval_sub->add_flag("--per-class", ev.per_class, "add the per-CWE table");

    SplitArgs sp;
    auto* split_sub = app.add_subcommand("split", "seeded train/val/test split");
    split_sub->add_option("--samples", sp.samples, "samples (JSONL)")->required()->check(CLI::ExistingFile);
    split_sub->add_option("--ratios", sp.ratios, "train:val:test (default 8:1:1)");
    split_sub->add_option("--out-dir", sp.out_dir, "directory for train/val/test.jsonl")->required();
    split_sub->add_flag("--stratify", sp.stratify, "stratify by (label, primary CWE)");

    BalanceArgs bal;
    auto* balance_sub = app.add_subcommand("balance", "downsample safe samples to a target size");
    balance_sub->add_option("--samples", bal.samples, "samples (JSONL)")->required()->check(CLI::ExistingFile);
    balance_sub->add_option("--target", bal.target, "target sample count")->required()->check(CLI::PositiveNumber);
    balance_sub->add_option("-o,--out", bal.out, "balanced samples (JSONL)")->required();
    balance_sub->add_option("--report", bal.report, "balance report (JSON)");

    std::vector<std::string> argv_storage{"vulread"};
    argv_storage.insert(argv_storage.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& s : argv_storage) argv.push_back(s.data());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitValidation;
    }

    std::string command;
    for (const auto* sub : app.get_subcommands()) {
        command = sub->get_name();
        for (const auto* inner : sub->get_subcommands()) command += " " + inner->get_name();
    }

    Context ctx{PipelineConfig{}, Manifest{}, std::nullopt, out, err};
    try {
        if (!config_path.empty()) {
            const auto text = read_file(config_path);
            json document;
            try {
                document = json::parse(text);
            } catch (const json::exception& e) {
                throw Error(Errc::SchemaError, std::string("config: ") + e.what());
            }
            ctx.cfg = load_config(document, fs::path(config_path).parent_path());
            ctx.manifest.inputs[fs::path(config_path).generic_string()] = sha256_hex(text);
        }
        if (seed) {
            ctx.cfg.seed = *seed;
            ctx.cfg.orpo.seed = *seed;
        }
        if (parallel) ctx.cfg.parallel = *parallel;
        if (!backend.empty()) ctx.cfg.backend = backend;
        if (!classes_flag.empty()) ctx.cfg.classes_path = classes_flag;
        if (min_count) ctx.cfg.augment_min_count = *min_count;
        if (min_similarity) ctx.cfg.augment_min_similarity = *min_similarity;
        if (lambda) ctx.cfg.orpo.orpo.lambda = *lambda;
        if (learning_rate) ctx.cfg.orpo.learning_rate = *learning_rate;
        if (steps) ctx.cfg.orpo.steps = *steps;
        if (top_k) ctx.cfg.retrieval.k = *top_k;
        if (!manifest_path.empty()) ctx.manifest_path = fs::path(manifest_path);

        ctx.manifest.command = command;
        ctx.manifest.seed = ctx.cfg.seed;
        ctx.manifest.config_hash = sha256_hex(ctx.cfg.to_json().dump());

        int code = kExitOk;
        if (build_cmd->parsed()) code = kg_build(ctx, build);
        else if (map_cmd->parsed()) code = kg_map(ctx, map);
        else if (augment_cmd->parsed()) code = kg_augment(ctx, augment);
        else if (export_cmd->parsed()) code = kg_export(ctx, export_kg, export_out);
        else if (distill_sub->parsed()) code = distill_cmd(ctx, dist);
        else if (prefs_export_cmd->parsed()) code = prefs_export(ctx, prefs);
        else if (verify_cmd->parsed()) code = orpo_verify(ctx, verify_seeds, verify_vocab);
        else if (toy_cmd->parsed()) code = orpo_toy_train(ctx, toy);
        else if (retrieve_sub->parsed()) code = retrieve_cmd(ctx, ret);
        else if (eval_sub->parsed()) code = eval_cmd(ctx, ev);
        else if (split_sub->parsed()) code = split_cmd(ctx, sp);
        else if (balance_sub->parsed()) code = balance_cmd(ctx, bal);
        ctx.write_manifest();
        return code;
    } catch (const Error& e) {
        err << "vulread " << command << ": " << e.what() << '\n';
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        err << "vulread " << command << ": " << e.what() << '\n';
        return kExitRuntime;
    }
}

} // namespace vulread::cli
