// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 vulread contributors

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <optional>
#include <thread>

#include "vulread/common.hpp"
#include "vulread/distill/distill.hpp"
#include "vulread/error.hpp"
#include "vulread/kg/class_mapping.hpp"

namespace vulread::distill {

namespace {

constexpr std::string_view kSections[] = {"VERDICT:", "ENTITIES:", "CLASSES:", "CWE:", "SUMMARY:"};

// Words that mark a summary as describing an absence of vulnerabilities.
constexpr std::string_view kAbsenceMarkers[] = {"no ", "not ", "absence", "without", "safe", "none", "free of"};

[[noreturn]] void parse_fail(const std::string& message) { throw Error(Errc::ParseError, message); }

bool is_marker(std::string_view line, std::string_view marker) { return starts_with_icase(trim(line), marker); }

std::string_view after_marker(std::string_view line, std::string_view marker) {
    return trim(trim(line).substr(marker.size()));
}

std::string_view bullet_body(std::string_view line) {
    auto t = trim(line);
    if (t.empty() || (t.front() != '-' && t.front() != '*')) return {};
    return trim(t.substr(1));
}

bool is_none_line(std::string_view body) {
    const auto lower = to_lower(body);
    return lower == "none" || lower == "(none)" || lower == "n/a";
}

std::vector<std::string> sorted_cwes(const std::set<std::string>& ids) {
    std::vector<std::string> out(ids.begin(), ids.end());
    std::sort(out.begin(), out.end(), [](const std::string& a, const std::string& b) {
        const auto na = cwe_number(a);
        const auto nb = cwe_number(b);
        return na != nb ? na < nb : a < b;
    });
    return out;
}

} // namespace

StructuredRationale parse_rationale(std::string_view raw, const std::set<std::string>* known_classes) {
    const auto lines = split(raw, '\n');
    std::size_t section_line[std::size(kSections)];
    std::size_t cursor = 0;
    for (std::size_t s = 0; s < std::size(kSections); ++s) {
        while (cursor < lines.size() && !is_marker(lines[cursor], kSections[s])) ++cursor;
        if (cursor == lines.size()) {
            parse_fail("missing section " + std::string(kSections[s].substr(0, kSections[s].size() - 1)));
        }
        section_line[s] = cursor++;
    }

    StructuredRationale r;
    const auto verdict_text = to_lower(after_marker(lines[section_line[0]], kSections[0]));
    if (verdict_text.rfind("vulnerable", 0) == 0) {
        r.verdict = VerdictLabel::Vulnerable;
    } else if (verdict_text.rfind("safe", 0) == 0) {
        r.verdict = VerdictLabel::Safe;
    } else {
        parse_fail("VERDICT must be VULNERABLE or SAFE, got '" + verdict_text + "'");
    }
    for (std::size_t i = section_line[0] + 1; i < section_line[1]; ++i) {
        if (!trim(lines[i]).empty()) parse_fail("unexpected text between VERDICT and ENTITIES");
    }

    for (std::size_t i = section_line[1] + 1; i < section_line[2]; ++i) {
        if (trim(lines[i]).empty()) continue;
        const auto body = bullet_body(lines[i]);
        if (body.empty()) parse_fail("ENTITIES line is not a '- name (kind)' bullet: " + lines[i]);
        if (is_none_line(body)) continue;
        RationaleEntity entity;
        const auto open = body.rfind('(');
        if (body.back() == ')' && open != std::string_view::npos && open > 0) {
            entity.name = std::string(trim(body.substr(0, open)));
            entity.kind = std::string(trim(body.substr(open + 1, body.size() - open - 2)));
        } else {
            entity.name = std::string(body);
        }
        if (entity.name.empty()) parse_fail("ENTITIES line without a name");
        if (entity.kind.empty()) entity.kind = "other";
        r.entities.push_back(std::move(entity));
    }

    for (std::size_t i = section_line[2] + 1; i < section_line[3]; ++i) {
        if (trim(lines[i]).empty()) continue;
        const auto body = bullet_body(lines[i]);
        if (body.empty()) parse_fail("CLASSES line is not a '- entity -> class' bullet: " + lines[i]);
        if (is_none_line(body)) continue;
        const auto arrow = body.rfind("->");
        if (arrow == std::string_view::npos) parse_fail("CLASSES line without '->': " + lines[i]);
        const auto name = trim(body.substr(0, arrow));
        const auto class_id = std::string(trim(body.substr(arrow + 2)));
        const auto it = std::find_if(r.entities.begin(), r.entities.end(),
                                     [&](const RationaleEntity& e) { return e.name == name; });
        if (it == r.entities.end()) parse_fail("CLASSES links unknown entity '" + std::string(name) + "'");
        if (class_id.empty()) parse_fail("CLASSES line without a class id");
        if (known_classes != nullptr && !known_classes->count(class_id)) {
            parse_fail("CLASSES names class '" + class_id + "' which is not in the knowledge graph");
        }
        r.class_links.push_back(ClassLink{static_cast<std::size_t>(it - r.entities.begin()), class_id});
    }

    const auto cwe_text = after_marker(lines[section_line[3]], kSections[3]);
    if (!is_none_line(cwe_text) && !cwe_text.empty()) {
        for (const auto& token : split(cwe_text, ',')) {
            const auto t = trim(token);
            if (t.empty()) continue;
            const auto id = canonicalize_cwe_id(t);
            if (!id) parse_fail("CWE section has a malformed id '" + std::string(t) + "'");
            r.cwe_attribution.insert(*id);
        }
    }
    for (std::size_t i = section_line[3] + 1; i < section_line[4]; ++i) {
        if (!trim(lines[i]).empty()) parse_fail("unexpected text between CWE and SUMMARY");
    }

    std::string summary(after_marker(lines[section_line[4]], kSections[4]));
    for (std::size_t i = section_line[4] + 1; i < lines.size(); ++i) {
        summary += '\n';
        summary += lines[i];
    }
    r.summary = std::string(trim(summary));
    if (r.summary.empty()) parse_fail("SUMMARY is empty");
    if (contains_cve(r.summary)) parse_fail("SUMMARY contains a CVE identifier");

    if (r.verdict == VerdictLabel::Safe) {
        if (!r.cwe_attribution.empty()) parse_fail("SAFE verdict with a non-empty CWE section");
        const auto lower = to_lower(r.summary) + ' ';
        const bool highlights_absence = std::any_of(std::begin(kAbsenceMarkers), std::end(kAbsenceMarkers),
                                                    [&](std::string_view m) { return lower.find(m) != std::string::npos; });
        if (!highlights_absence) parse_fail("SAFE summary does not state the absence of vulnerabilities");
    }
    return r;
}

std::string render_rationale(const StructuredRationale& r) {
    std::string out = "VERDICT: ";
    out += r.verdict == VerdictLabel::Vulnerable ? "VULNERABLE" : "SAFE";
    out += "\nENTITIES:\n";
    for (const auto& e : r.entities) out += "- " + e.name + " (" + e.kind + ")\n";
    out += "CLASSES:\n";
    for (const auto& link : r.class_links) {
        if (link.entity_index >= r.entities.size()) {
            throw Error(Errc::InvalidArgument, "class link references entity " + std::to_string(link.entity_index));
        }
        out += "- " + r.entities[link.entity_index].name + " -> " + link.class_id + "\n";
    }
    out += "CWE: ";
    if (r.cwe_attribution.empty()) {
        out += "NONE";
    } else {
        const auto ids = sorted_cwes(r.cwe_attribution);
        for (std::size_t i = 0; i < ids.size(); ++i) out += (i > 0 ? ", " : "") + ids[i];
    }
    out += "\nSUMMARY: " + r.summary + "\n";
    return out;
}

std::set<std::string> class_ids(const kg::KnowledgeGraph& graph) {
    std::set<std::string> ids;
    for (const auto* node : graph.nodes_of_kind(kg::NodeKind::AbstractClass)) ids.insert(node->id);
    return ids;
}

namespace {

std::string ask_teacher(llm::ChatBackend& backend, const std::string& prompt, const DistillOptions& options) {
    llm::ChatRequest request;
    request.model = options.teacher_model;
    request.messages.push_back(llm::ChatMessage{llm::Role::User, prompt});
    request.temperature = 0.0;
    request.max_tokens = options.max_tokens;
    request.seed = options.seed;
    try {
        return backend.chat(request).content;
    } catch (const Error& e) {
        if (e.code() == Errc::AuthError || e.code() == Errc::BackendError) throw;
        throw Error(Errc::BackendError, e.what());
    }
}

StructuredRationale one_side(const FunctionSample& sample, int asserted, llm::ChatBackend& backend,
                             const retrieval::RetrievalContext& context, const std::set<std::string>& known,
                             const DistillOptions& options, std::string& raw_out) {
    const auto prompt = build_prompt(sample, context, asserted, options.teacher_template, options.budget);
    raw_out = mask_cve(ask_teacher(backend, prompt, options));
    const auto side = asserted == sample.label ? "valid" : "flawed";
    StructuredRationale r;
    try {
        r = parse_rationale(raw_out, &known);
    } catch (const Error& e) {
        throw Error(Errc::ParseError, std::string(side) + " rationale: " + e.what());
    }
    if (label_of(r.verdict) != asserted) {
        throw Error(Errc::LabelContract, std::string(side) + " rationale verdict disagrees with asserted label " +
                                             std::to_string(asserted));
    }
    return r;
}

} // namespace

RationalePair distill_sample(const FunctionSample& sample, llm::ChatBackend& backend, const kg::KnowledgeGraph& graph,
                             const DistillOptions& options) {
    if (sample.label != 0 && sample.label != 1) throw Error(Errc::InvalidArgument, "label must be 0 or 1");
    const auto& lexicon = options.lexicon != nullptr ? *options.lexicon : retrieval::Lexicon::default_c();
    const auto context = retrieval::retrieve(graph, retrieval::extract_entities(sample.code, lexicon), options.retrieval);
    const auto known = class_ids(graph);

    RationalePair pair;
    pair.sample_id = sample.id;
    pair.teacher_model = options.teacher_model;
    pair.valid = one_side(sample, sample.label, backend, context, known, options, pair.valid_raw);
    pair.flawed = one_side(sample, 1 - sample.label, backend, context, known, options, pair.flawed_raw);
    return pair;
}

DistillResult distill_corpus(const std::vector<FunctionSample>& samples, llm::ChatBackend& backend,
                             const kg::KnowledgeGraph& graph, const DistillOptions& options) {
    if (!graph.frozen()) throw Error(Errc::GraphNotFrozen, "distillation requires a frozen graph");
    std::vector<std::optional<RationalePair>> pairs(samples.size());
    std::vector<std::optional<QuarantineEntry>> failures(samples.size());
    std::atomic<std::size_t> next{0};
    std::atomic<bool> abort{false};
    std::exception_ptr fatal;
    std::mutex fatal_mutex;

    auto worker = [&] {
        while (!abort.load()) {
            const auto i = next.fetch_add(1);
            if (i >= samples.size()) return;
            try {
                pairs[i] = distill_sample(samples[i], backend, graph, options);
            } catch (const Error& e) {
                if (e.code() == Errc::AuthError) {
                    std::lock_guard lock(fatal_mutex);
                    if (!fatal) fatal = std::current_exception();
                    abort = true;
                    return;
                }
                failures[i] = QuarantineEntry{samples[i].id, std::string(errc_name(e.code())), e.what()};
            } catch (const std::exception& e) {
                failures[i] = QuarantineEntry{samples[i].id, "Internal", e.what()};
            }
        }
    };
    const auto threads = std::clamp<std::size_t>(options.parallel, 1, std::max<std::size_t>(samples.size(), 1));
    {
        std::vector<std::jthread> pool;
        for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
        worker();
    }
    if (fatal) std::rethrow_exception(fatal);

    DistillResult result;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (pairs[i]) result.pairs.push_back(std::move(*pairs[i]));
        if (failures[i]) result.quarantine.push_back(std::move(*failures[i]));
    }
    std::stable_sort(result.pairs.begin(), result.pairs.end(),
                     [](const RationalePair& a, const RationalePair& b) { return a.sample_id < b.sample_id; });
    std::stable_sort(result.quarantine.begin(), result.quarantine.end(),
                     [](const QuarantineEntry& a, const QuarantineEntry& b) { return a.sample_id < b.sample_id; });
    return result;
}

PreferenceExport to_preference_records(const std::vector<RationalePair>& pairs,
                                       const std::vector<FunctionSample>& samples, const kg::KnowledgeGraph& graph,
                                       const PreferenceOptions& options) {
    std::map<std::string, const FunctionSample*> by_id;
    for (const auto& s : samples) by_id.emplace(s.id, &s);
    std::vector<const RationalePair*> ordered;
    for (const auto& p : pairs) {
        if (!by_id.count(p.sample_id)) throw Error(Errc::MissingSample, "no sample for pair " + p.sample_id);
        ordered.push_back(&p);
    }
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const RationalePair* a, const RationalePair* b) { return a->sample_id < b->sample_id; });

    const auto& lexicon = options.lexicon != nullptr ? *options.lexicon : retrieval::Lexicon::default_c();
    PreferenceExport out;
    for (const auto* pair : ordered) {
        const auto& sample = *by_id.at(pair->sample_id);
        PreferenceRecord record;
        record.id = pair->sample_id;
        record.chosen = render_rationale(pair->valid);
        record.rejected = render_rationale(pair->flawed);
        if (record.chosen == record.rejected) {
            ++out.contrast_collapse;
            out.rejected.push_back(QuarantineEntry{record.id, "ContrastCollapse", "chosen and rejected render identically"});
            continue;
        }
        try {
            const auto context =
                retrieval::retrieve(graph, retrieval::extract_entities(sample.code, lexicon), options.retrieval);
            record.prompt = mask_cve(build_prompt(sample, context, std::nullopt, options.inference_template, options.budget));
        } catch (const Error& e) {
            if (e.code() != Errc::BudgetExceeded) throw;
            out.rejected.push_back(QuarantineEntry{record.id, std::string(errc_name(e.code())), e.what()});
            continue;
        }
        out.records.push_back(std::move(record));
    }
    return out;
}

nlohmann::json pair_to_json(const RationalePair& pair) {
    return nlohmann::json{{"id", pair.sample_id},
                          {"teacher_model", pair.teacher_model},
                          {"valid_verdict", label_of(pair.valid.verdict)},
                          {"flawed_verdict", label_of(pair.flawed.verdict)},
                          {"valid_raw", pair.valid_raw},
                          {"flawed_raw", pair.flawed_raw}};
}

RationalePair pair_from_json(const nlohmann::json& record, const std::set<std::string>* known_classes) {
    RationalePair pair;
    try {
        pair.sample_id = record.at("id").get<std::string>();
        pair.teacher_model = record.value("teacher_model", std::string());
        pair.valid_raw = record.at("valid_raw").get<std::string>();
        pair.flawed_raw = record.at("flawed_raw").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::SchemaError, std::string("rationale pair record: ") + e.what());
    }
    pair.valid = parse_rationale(pair.valid_raw, known_classes);
    pair.flawed = parse_rationale(pair.flawed_raw, known_classes);
    return pair;
}

nlohmann::json quarantine_to_json(const QuarantineEntry& entry) {
    return nlohmann::json{{"id", entry.sample_id}, {"error", entry.error}, {"message", entry.message}};
}

nlohmann::json preference_to_json(const PreferenceRecord& record) {
    return nlohmann::json{
        {"id", record.id}, {"prompt", record.prompt}, {"chosen", record.chosen}, {"rejected", record.rejected}};
}

PreferenceRecord preference_from_json(const nlohmann::json& record) {
    PreferenceRecord out;
    try {
        out.id = record.at("id").get<std::string>();
        out.prompt = record.at("prompt").get<std::string>();
        out.chosen = record.at("chosen").get<std::string>();
        out.rejected = record.at("rejected").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::SchemaError, std::string("preference record: ") + e.what());
    }
    if (out.id.empty() || out.prompt.empty() || out.chosen.empty() || out.rejected.empty()) {
        throw Error(Errc::SchemaError, "preference record " + out.id + " has an empty field");
    }
    if (out.chosen == out.rejected) throw Error(Errc::SchemaError, "preference record " + out.id + ": chosen == rejected");
    return out;
}

// ---- offline teacher --------------------------------------------------------

namespace {

std::optional<std::string_view> line_value(std::string_view text, std::string_view prefix) {
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto eol = std::min(text.find('\n', pos), text.size());
        const auto line = text.substr(pos, eol - pos);
        if (starts_with_icase(line, prefix)) return trim(line.substr(prefix.size()));
        pos = eol + 1;
    }
    return std::nullopt;
}

} // namespace

std::string ScriptedTeacher::operator()(const llm::ChatRequest& request) const {
    if (request.messages.empty()) return "no prompt";
    const std::string_view prompt = request.messages.back().content;

    const auto asserted = line_value(prompt, "Asserted verdict:");
    if (!asserted) return "The prompt does not assert a verdict.";
    const bool vulnerable = asserted->find("VULNERABLE") != std::string_view::npos;

    std::string code;
    if (const auto open = prompt.find("```\n"); open != std::string_view::npos) {
        const auto close = prompt.find("\n```", open + 4);
        code = std::string(prompt.substr(open + 4, close == std::string_view::npos ? std::string_view::npos
                                                                                    : close - open - 4));
    }

    std::set<std::string> targets;
    if (vulnerable) {
        if (const auto t = line_value(prompt, "Target CWE mapping:")) {
            for (const auto& token : split(*t, ',')) {
                if (auto id = canonicalize_cwe_id(trim(token))) targets.insert(*id);
            }
        }
    }

    std::vector<std::string> context_classes;
    if (const auto c = line_value(prompt, "KG CLASSES:"); c && to_lower(*c) != "none") {
        for (const auto& token : split(*c, ',')) {
            const auto id = std::string(trim(token));
            if (known_classes_.count(id)) context_classes.push_back(id);
        }
    }

    StructuredRationale r;
    r.verdict = vulnerable ? VerdictLabel::Vulnerable : VerdictLabel::Safe;
    r.cwe_attribution = targets;
    const auto entities = retrieval::extract_entities(code);
    for (const auto& e : entities) {
        if (r.entities.size() == 4) break;
        if (e.kind == retrieval::EntityKind::Identifier || e.kind == retrieval::EntityKind::Other) continue;
        r.entities.push_back(RationaleEntity{e.name, std::string(retrieval::to_string(e.kind))});
    }
    for (const auto& e : entities) {
        if (r.entities.size() == 4) break;
        if (e.kind != retrieval::EntityKind::Identifier) continue;
        r.entities.push_back(RationaleEntity{e.name, std::string(retrieval::to_string(e.kind))});
    }

    const auto lowered_code = to_lower(code);
    for (std::size_t i = 0; i < r.entities.size(); ++i) {
        std::optional<std::string> cls;
        if (!context_classes.empty()) cls = context_classes.front();
        if (!cls) {
            const auto lowered_entity = to_lower(r.entities[i].name);
            for (const auto& def : kg::default_classes()) {
                if (!known_classes_.count(def.id)) continue;
                const bool hit = std::any_of(def.keywords.begin(), def.keywords.end(), [&](const std::string& k) {
                    return kg::keyword_matches(lowered_entity, k) || kg::keyword_matches(lowered_code, k);
                });
                if (hit) {
                    cls = def.id;
                    break;
                }
            }
        }
        if (cls) r.class_links.push_back(ClassLink{i, *cls});
    }

    std::string names;
    for (std::size_t i = 0; i < r.entities.size(); ++i) names += (i > 0 ? ", " : "") + r.entities[i].name;
    if (names.empty()) names = "the function body";
    if (vulnerable) {
        std::string cwes;
        for (const auto& id : sorted_cwes(targets)) cwes += (cwes.empty() ? "" : ", ") + id;
        r.summary = "The handling of " + names + " lets attacker-controlled data reach an unchecked operation" +
                    (cwes.empty() ? std::string(".") : ", matching " + cwes + ".");
    } else {
        r.summary = "No known vulnerabilities: the use of " + names +
                    " stays within validated bounds, so the function shows an absence of exploitable weaknesses.";
    }
    if (inject_cve_) r.summary += " A related upstream fix is CVE-2020-0001.";
    return render_rationale(r);
}

} // namespace vulread::distill
