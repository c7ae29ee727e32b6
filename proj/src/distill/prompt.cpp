// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 vulread contributors

#include <regex>

#include "vulread/common.hpp"
#include "vulread/distill/distill.hpp"
#include "vulread/error.hpp"

namespace vulread::distill {

namespace {

constexpr std::string_view kTeacherTemplate = R"(You are a senior software security analyst. Write a structured vulnerability analysis of the function below.

Knowledge graph context (abstraction classes and candidate CWEs):
{{kg_context}}

Asserted verdict: the function is {{asserted_label}}.
Target CWE mapping: {{target_cwes}}

Function:
```
{{code}}
```

Instructions:
1. Extract the security-relevant entities of the function (file paths, API calls, parameters, libraries).
2. Associate each entity with one or more vulnerability abstraction classes from the knowledge graph.
3. Map the reasoning to the target CWE mapping. For a SAFE verdict write CWE: NONE and make the summary highlight the absence of known vulnerabilities.
4. Do not cite CVE identifiers.

Answer in exactly this format, one section marker per line, in this order:
VERDICT: VULNERABLE or SAFE
ENTITIES:
- <entity name> (<entity kind>)
CLASSES:
- <entity name> -> <abstraction class id>
CWE: <comma-separated CWE ids, or NONE>
SUMMARY: <concise summary>
)";

constexpr std::string_view kInferenceTemplate = R"(You are a software security analyst. Decide whether the function below is vulnerable and explain your reasoning.

Knowledge graph context (abstraction classes and candidate CWEs):
{{kg_context}}

Function:
```
{{code}}
```

Answer in exactly this format, one section marker per line, in this order:
VERDICT: VULNERABLE or SAFE
ENTITIES:
- <entity name> (<entity kind>)
CLASSES:
- <entity name> -> <abstraction class id>
CWE: <comma-separated CWE ids, or NONE>
SUMMARY: <concise summary>
)";

struct Placeholder {
    std::size_t begin;
    std::size_t end; // one past the closing braces
    std::string name;
};

std::vector<Placeholder> scan_placeholders(std::string_view text) {
    std::vector<Placeholder> out;
    std::size_t pos = 0;
    while ((pos = text.find("{{", pos)) != std::string_view::npos) {
        const auto close = text.find("}}", pos + 2);
        if (close == std::string_view::npos) {
            throw Error(Errc::UnknownPlaceholder, "unterminated placeholder at offset " + std::to_string(pos));
        }
        out.push_back(Placeholder{pos, close + 2, std::string(trim(text.substr(pos + 2, close - pos - 2)))});
        pos = close + 2;
    }
    return out;
}

} // namespace

PromptTemplate::PromptTemplate(std::string text, TemplateRole role) : text_(std::move(text)), role_(role) {
    const std::set<std::string> allowed = role_ == TemplateRole::Teacher
                                              ? std::set<std::string>{"code", "kg_context", "asserted_label", "target_cwes"}
                                              : std::set<std::string>{"code", "kg_context"};
    const std::set<std::string> required = role_ == TemplateRole::Teacher
                                               ? std::set<std::string>{"code", "asserted_label"}
                                               : std::set<std::string>{"code"};
    std::set<std::string> present;
    for (const auto& p : scan_placeholders(text_)) {
        if (!allowed.count(p.name)) throw Error(Errc::UnknownPlaceholder, "{{" + p.name + "}}");
        present.insert(p.name);
    }
    for (const auto& name : required) {
        if (!present.count(name)) throw Error(Errc::TemplateMissingPlaceholder, "{{" + name + "}}");
    }
}

PromptTemplate PromptTemplate::default_teacher() { return PromptTemplate(std::string(kTeacherTemplate), TemplateRole::Teacher); }

PromptTemplate PromptTemplate::default_inference() {
    return PromptTemplate(std::string(kInferenceTemplate), TemplateRole::Inference);
}

std::string PromptTemplate::render(const std::map<std::string, std::string>& values) const {
    std::string out;
    std::size_t last = 0;
    for (const auto& p : scan_placeholders(text_)) {
        out.append(text_, last, p.begin - last);
        auto it = values.find(p.name);
        if (it != values.end()) out += it->second;
        last = p.end;
    }
    out.append(text_, last, std::string::npos);
    return out;
}

std::string build_prompt(const FunctionSample& sample, const retrieval::RetrievalContext& kg_context,
                         std::optional<int> asserted_label, const PromptTemplate& prompt_template,
                         const llm::TokenBudget& budget) {
    const bool teacher = prompt_template.role() == TemplateRole::Teacher;
    if (teacher != asserted_label.has_value()) {
        throw Error(Errc::InvalidArgument, teacher ? "teacher prompts need an asserted label"
                                                   : "inference prompts take no asserted label");
    }
    std::map<std::string, std::string> values{
        {"code", sample.code},
        {"kg_context", kg_context.rendered.empty() ? std::string(retrieval::kNoMatchesBlock) : kg_context.rendered}};
    if (asserted_label) {
        if (*asserted_label != 0 && *asserted_label != 1) throw Error(Errc::InvalidArgument, "label must be 0 or 1");
        if (*asserted_label == 1) {
            values["asserted_label"] = "VULNERABLE";
            std::string targets;
            for (const auto& id : sample.cwe_ids) {
                if (!targets.empty()) targets += ", ";
                targets += id;
            }
            values["target_cwes"] = targets.empty() ? "NONE GIVEN (choose the most specific applicable weakness)" : targets;
        } else {
            values["asserted_label"] = "SAFE";
            values["target_cwes"] = "NONE (explain why the function is safe; the summary must highlight the absence of known vulnerabilities)";
        }
    }
    auto prompt = prompt_template.render(values);
    if (!budget.fits(prompt)) {
        throw Error(Errc::BudgetExceeded, "prompt for sample " + sample.id + " needs ~" +
                                              std::to_string(budget.estimate(prompt)) + " tokens, budget is " +
                                              std::to_string(budget.max_input_tokens));
    }
    return prompt;
}

namespace {

const std::regex& cve_pattern() {
    static const std::regex pattern("CVE-[0-9]{4}-[0-9]{4,7}", std::regex::icase | std::regex::optimize);
    return pattern;
}

} // namespace

std::string mask_cve(std::string_view text) {
    return std::regex_replace(std::string(text), cve_pattern(), std::string(kCveMask));
}

bool contains_cve(std::string_view text) {
    return std::regex_search(text.begin(), text.end(), cve_pattern());
}

} // namespace vulread::distill
