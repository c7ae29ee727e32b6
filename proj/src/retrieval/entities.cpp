// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 vulread contributors

#include <algorithm>
#include <cctype>
#include <map>

#include "vulread/common.hpp"
#include "vulread/retrieval/retrieval.hpp"

namespace vulread::retrieval {

std::string_view to_string(EntityKind kind) noexcept {
    switch (kind) {
        case EntityKind::ApiCall: return "api-call";
        case EntityKind::Identifier: return "identifier";
        case EntityKind::Library: return "library";
        case EntityKind::PathLiteral: return "path";
        case EntityKind::Other: return "other";
    }
    return "other";
}

std::set<std::string, std::less<>> parse_token_list(std::string_view text) {
    std::set<std::string, std::less<>> tokens;
    for (const auto& line : split(text, '\n')) {
        const auto t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        tokens.emplace(t);
    }
    return tokens;
}

const Lexicon& Lexicon::default_c() {
    static const Lexicon lexicon{
        {"alignas", "alignof", "and", "auto", "bool", "break", "case", "catch", "char", "class", "const",
         "const_cast", "constexpr", "continue", "decltype", "default", "delete", "do", "double", "dynamic_cast",
         "else", "enum", "explicit", "extern", "false", "final", "float", "for", "friend", "goto", "if",
         "inline", "int", "long", "mutable", "namespace", "new", "noexcept", "not", "nullptr", "NULL",
         "operator", "or", "override", "private", "protected", "public", "register", "reinterpret_cast",
         "restrict", "return", "short", "signed", "sizeof", "static", "static_assert", "static_cast", "struct",
         "switch", "template", "this", "throw", "true", "try", "typedef", "typename", "union", "unsigned",
         "using", "virtual", "void", "volatile", "while"},
        {"stdio", "stdlib", "unistd", "pthread", "openssl", "zlib", "curl", "sqlite3", "libxml", "libxml2",
         "boost", "glib", "gtk", "png", "jpeg", "libavcodec", "libavformat", "ssl", "crypto", "fcntl",
         "socket", "netinet", "arpa", "sys"}};
    return lexicon;
}

namespace {

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0 || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_'; }

constexpr std::string_view kDirectives[] = {"include", "define", "undef", "ifdef", "ifndef", "if",
                                            "elif", "else", "endif", "pragma", "error", "line"};

class Scanner {
public:
    Scanner(std::string_view code, const Lexicon& lexicon) : code_(code), lexicon_(lexicon) {}

    std::map<std::pair<std::string, EntityKind>, std::size_t> run() {
        bool line_start = true;
        while (pos_ < code_.size()) {
            const char c = code_[pos_];
            if (c == '\n') {
                line_start = true;
                ++pos_;
                continue;
            }
            if (std::isspace(static_cast<unsigned char>(c)) != 0) {
                ++pos_;
                continue;
            }
            if (c == '/' && peek(1) == '/') {
                skip_to_eol();
                continue;
            }
            if (c == '/' && peek(1) == '*') {
                const auto end = code_.find("*/", pos_ + 2);
                pos_ = end == std::string_view::npos ? code_.size() : end + 2;
                continue;
            }
            const bool at_line_start = line_start;
            line_start = false;
            if (c == '#' && at_line_start) {
                directive();
                continue;
            }
            if (c == '"' || c == '\'') {
                string_literal(c);
                continue;
            }
            if (std::isdigit(static_cast<unsigned char>(c)) != 0) {
                while (pos_ < code_.size() && (ident_char(code_[pos_]) || code_[pos_] == '.' || code_[pos_] == '\'')) ++pos_;
                continue;
            }
            if (ident_start(c)) {
                identifier();
                continue;
            }
            ++pos_;
        }
        return counts_;
    }

private:
    char peek(std::size_t ahead) const { return pos_ + ahead < code_.size() ? code_[pos_ + ahead] : '\0'; }

    void skip_to_eol() {
        const auto end = code_.find('\n', pos_);
        pos_ = end == std::string_view::npos ? code_.size() : end;
    }

    void add(std::string name, EntityKind kind) { ++counts_[{std::move(name), kind}]; }

    void directive() {
        std::size_t p = pos_ + 1;
        while (p < code_.size() && (code_[p] == ' ' || code_[p] == '\t')) ++p;
        std::size_t q = p;
        while (q < code_.size() && ident_char(code_[q])) ++q;
        const auto name = code_.substr(p, q - p);
        if (std::find(std::begin(kDirectives), std::end(kDirectives), name) == std::end(kDirectives)) {
            ++pos_; // not a preprocessor line (e.g. a script comment); rescan after '#'
            return;
        }
        pos_ = q;
        if (name != "include") return; // the rest of the line is ordinary tokens
        while (pos_ < code_.size() && (code_[pos_] == ' ' || code_[pos_] == '\t')) ++pos_;
        const char open = peek(0);
        const char close = open == '<' ? '>' : open == '"' ? '"' : '\0';
        if (close == '\0') {
            skip_to_eol();
            return;
        }
        const auto end = code_.find(close, pos_ + 1);
        const auto eol = code_.find('\n', pos_);
        if (end == std::string_view::npos || (eol != std::string_view::npos && end > eol)) {
            skip_to_eol();
            return;
        }
        const auto target = code_.substr(pos_ + 1, end - pos_ - 1);
        pos_ = end + 1;
        auto stem = target.substr(0, target.find_first_of("/\\"));
        stem = stem.substr(0, stem.find('.'));
        if (lexicon_.libraries.count(stem)) {
            add(std::string(stem), EntityKind::Library);
        } else if (!target.empty()) {
            add(std::string(target), EntityKind::Other);
        }
    }

    void string_literal(char quote) {
        std::size_t p = pos_ + 1;
        while (p < code_.size() && code_[p] != quote && code_[p] != '\n') {
            if (code_[p] == '\\' && p + 1 < code_.size()) ++p;
            ++p;
        }
        const auto content = code_.substr(pos_ + 1, std::min(p, code_.size()) - pos_ - 1);
        pos_ = p < code_.size() && code_[p] == quote ? p + 1 : p;
        if (quote == '"' && content.find_first_of("/\\") != std::string_view::npos) {
            add(std::string(content), EntityKind::PathLiteral);
        }
    }

    void identifier() {
        const auto start = pos_;
        while (pos_ < code_.size() && ident_char(code_[pos_])) ++pos_;
        const auto name = code_.substr(start, pos_ - start);
        if (lexicon_.stoplist.count(name)) return;
        std::size_t p = pos_;
        while (p < code_.size() && (code_[p] == ' ' || code_[p] == '\t')) ++p;
        if (p < code_.size() && code_[p] == '(') {
            add(std::string(name), EntityKind::ApiCall);
        } else if (lexicon_.libraries.count(name)) {
            add(std::string(name), EntityKind::Library);
        } else {
            add(std::string(name), EntityKind::Identifier);
        }
    }

    std::string_view code_;
    const Lexicon& lexicon_;
    std::size_t pos_ = 0;
    std::map<std::pair<std::string, EntityKind>, std::size_t> counts_;
};

} // namespace

namespace {

std::vector<CodeEntity> sorted_entities(const std::map<std::pair<std::string, EntityKind>, std::size_t>& counts) {
    std::vector<CodeEntity> entities;
    for (const auto& [key, count] : counts) entities.push_back(CodeEntity{key.first, key.second, count});
    std::stable_sort(entities.begin(), entities.end(), [](const CodeEntity& a, const CodeEntity& b) {
        if (a.occurrences != b.occurrences) return a.occurrences > b.occurrences;
        if (a.name != b.name) return a.name < b.name;
        return a.kind < b.kind;
    });
    return entities;
}

} // namespace

std::vector<CodeEntity> extract_entities(std::string_view code, const Lexicon& lexicon) {
    return sorted_entities(Scanner(code, lexicon).run());
}

EntityKind entity_kind_from_string(std::string_view kind) noexcept {
    for (auto k : {EntityKind::ApiCall, EntityKind::Identifier, EntityKind::Library, EntityKind::PathLiteral}) {
        if (to_string(k) == kind) return k;
    }
    return EntityKind::Other;
}

std::vector<CodeEntity> entities_from_rationale(const distill::StructuredRationale& rationale) {
    std::map<std::pair<std::string, EntityKind>, std::size_t> counts;
    for (const auto& e : rationale.entities) {
        if (e.name.empty()) continue;
        ++counts[{e.name, entity_kind_from_string(e.kind)}];
    }
    return sorted_entities(counts);
}

} // namespace vulread::retrieval
