// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 vulread contributors

#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "vulread/distill/types.hpp"
#include "vulread/kg/graph.hpp"
#include "vulread/llm/chat.hpp"
#include "vulread/retrieval/retrieval.hpp"

namespace vulread::distill {

// ---- prompts ----------------------------------------------------------------

enum class TemplateRole {
    Teacher,   // label-conditioned distillation prompt
    Inference, // student prompt; the model must decide the label itself
};

/// Prompt template with {{code}}, {{kg_context}}, {{asserted_label}} and
/// {{target_cwes}} placeholders. Teacher templates must contain {{code}} and
/// {{asserted_label}}; inference templates must contain {{code}} and may not use
/// the label placeholders. Any other placeholder is Errc::UnknownPlaceholder.
class PromptTemplate {
public:
    PromptTemplate(std::string text, TemplateRole role);

    static PromptTemplate default_teacher();
    static PromptTemplate default_inference();

    [[nodiscard]] const std::string& text() const noexcept { return text_; }
    [[nodiscard]] TemplateRole role() const noexcept { return role_; }

    /// Single-pass substitution: placeholder-like text inside values is left alone.
    [[nodiscard]] std::string render(const std::map<std::string, std::string>& values) const;

private:
    std::string text_;
    TemplateRole role_;
};

/// Fills the template for one sample. With an asserted label of 1 the sample's
/// ground-truth CWE ids are the mapping target; with 0 the prompt asks for a safe
/// verdict and names no target. `asserted_label` must be empty exactly when the
/// template is an inference template. Errc::BudgetExceeded when the prompt is over
/// the token budget.
std::string build_prompt(const FunctionSample& sample, const retrieval::RetrievalContext& kg_context,
                         std::optional<int> asserted_label, const PromptTemplate& prompt_template,
                         const llm::TokenBudget& budget = {});

// ---- rationales -------------------------------------------------------------

inline constexpr std::string_view kCveMask = "[CVE-MASKED]";

/// Replaces every CVE-<4 digits>-<4..7 digits> (case-insensitive) with [CVE-MASKED].
std::string mask_cve(std::string_view text);
bool contains_cve(std::string_view text);

/// Parses the line-delimited teacher format (VERDICT, ENTITIES, CLASSES, CWE,
/// SUMMARY, in that order). When `known_classes` is given every class link must
/// name one of them. Throws Errc::ParseError naming the first missing section or
/// the violated invariant.
StructuredRationale parse_rationale(std::string_view raw, const std::set<std::string>* known_classes = nullptr);

/// Renders the structured sections verbatim; parse_rationale inverts it.
std::string render_rationale(const StructuredRationale& rationale);

// ---- teacher calls ----------------------------------------------------------

struct DistillOptions {
    std::string teacher_model = "Qwen2.5-32B-Instruct";
    PromptTemplate teacher_template = PromptTemplate::default_teacher();
    retrieval::RetrievalOptions retrieval;
    const retrieval::Lexicon* lexicon = nullptr; // null: Lexicon::default_c()
    llm::TokenBudget budget;
    int max_tokens = 1024;
    std::optional<std::int64_t> seed;
    std::size_t parallel = 4;
};

/// Asks the teacher twice: once conditioned on the true label (valid rationale)
/// and once on the flipped label (flawed rationale). Responses are CVE-masked,
/// parsed, and checked against the asserted label (Errc::LabelContract).
/// Requests use temperature 0. Transport-level failures surface as
/// Errc::BackendError (Errc::AuthError is passed through).
RationalePair distill_sample(const FunctionSample& sample, llm::ChatBackend& backend, const kg::KnowledgeGraph& graph,
                             const DistillOptions& options = {});

struct QuarantineEntry {
    std::string sample_id;
    std::string error; // Errc name
    std::string message;

    friend bool operator==(const QuarantineEntry&, const QuarantineEntry&) = default;
};

struct DistillResult {
    std::vector<RationalePair> pairs;          // sorted by sample id
    std::vector<QuarantineEntry> quarantine;   // sorted by sample id
};

/// Runs distill_sample over a corpus with at most options.parallel requests in
/// flight. Failed samples are quarantined rather than dropped; output order is
/// independent of completion order. Errc::AuthError aborts the run.
DistillResult distill_corpus(const std::vector<FunctionSample>& samples, llm::ChatBackend& backend,
                             const kg::KnowledgeGraph& graph, const DistillOptions& options = {});

// ---- preference records -----------------------------------------------------

struct PreferenceOptions {
    PromptTemplate inference_template = PromptTemplate::default_inference();
    retrieval::RetrievalOptions retrieval;
    const retrieval::Lexicon* lexicon = nullptr;
    llm::TokenBudget budget;
};

struct PreferenceExport {
    std::vector<PreferenceRecord> records; // sorted by id
    std::size_t contrast_collapse = 0;     // pairs whose renderings were identical
    std::vector<QuarantineEntry> rejected; // collapse / budget failures
};

/// prompt = inference prompt with KG context, chosen = rendered valid rationale,
/// rejected = rendered flawed rationale. Errc::MissingSample when a pair has no sample.
PreferenceExport to_preference_records(const std::vector<RationalePair>& pairs,
                                       const std::vector<FunctionSample>& samples, const kg::KnowledgeGraph& graph,
                                       const PreferenceOptions& options = {});

// ---- files ------------------------------------------------------------------

nlohmann::json pair_to_json(const RationalePair& pair);
/// Re-parses the stored raw texts.
RationalePair pair_from_json(const nlohmann::json& record, const std::set<std::string>* known_classes = nullptr);
nlohmann::json quarantine_to_json(const QuarantineEntry& entry);
nlohmann::json preference_to_json(const PreferenceRecord& record);
PreferenceRecord preference_from_json(const nlohmann::json& record);

/// Class ids of every AbstractClass node.
std::set<std::string> class_ids(const kg::KnowledgeGraph& graph);

// ---- offline teacher --------------------------------------------------------

/// Deterministic teacher for offline runs: reads the asserted label, target CWEs,
/// KG context and code out of a default-format teacher prompt and answers in the
/// structured format. Entities come from the lexical scanner; each is linked to
/// the first KG class listed in the context, or else to the first known class
/// whose keywords match the code.
class ScriptedTeacher {
public:
    explicit ScriptedTeacher(std::set<std::string> known_classes, bool inject_cve = false)
        : known_classes_(std::move(known_classes)), inject_cve_(inject_cve) {}

    std::string operator()(const llm::ChatRequest& request) const;

private:
    std::set<std::string> known_classes_;
    bool inject_cve_;
};

} // namespace vulread::distill
