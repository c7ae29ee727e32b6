// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 vulread contributors

#include "vulread/kg/cwe_ingest.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "vulread/common.hpp"
#include "vulread/error.hpp"

namespace vulread::kg {

namespace {

struct RawEntry {
    CweRecord record;
    bool deprecated = false;
};

// RFC 4180: quoted fields may contain separators, doubled quotes and newlines.
std::vector<std::vector<std::string>> parse_csv_rows(std::string_view text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        switch (c) {
            case '"':
                in_quotes = true;
                field_started = true;
                break;
            case ',':
                row.push_back(std::move(field));
                field.clear();
                field_started = true;
                break;
            case '\r': break;
            case '\n':
                row.push_back(std::move(field));
                field.clear();
                if (!(row.size() == 1 && row[0].empty() && !field_started)) rows.push_back(std::move(row));
                row.clear();
                field_started = false;
                break;
            default:
                field += c;
                field_started = true;
        }
    }
    if (in_quotes) throw Error(Errc::DecodeError, "unterminated quoted CSV field");
    if (field_started || !field.empty() || !row.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

// Parents from either "ChildOf:CWE-79;ChildOf:CWE-20" or MITRE's
// "::NATURE:ChildOf:CWE ID:79:VIEW ID:1000:ORDINAL:Primary::".
std::vector<std::string> parse_related(std::string_view field) {
    std::vector<std::string> parents;
    auto add = [&parents](std::string_view token) {
        if (auto id = canonicalize_cwe_id(token)) {
            if (std::find(parents.begin(), parents.end(), *id) == parents.end()) parents.push_back(*id);
        }
    };
    if (field.find("NATURE:") != std::string_view::npos) {
        std::size_t pos = 0;
        constexpr std::string_view marker = "NATURE:ChildOf:CWE ID:";
        while ((pos = field.find(marker, pos)) != std::string_view::npos) {
            pos += marker.size();
            const auto end = field.find(':', pos);
            add(field.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos));
        }
        return parents;
    }
    for (const auto& token : split(field, ';')) {
        const auto t = trim(token);
        if (t.empty()) continue;
        const auto colon = t.find(':');
        if (colon == std::string_view::npos) continue;
        if (trim(t.substr(0, colon)) != "ChildOf") continue;
        add(t.substr(colon + 1));
    }
    return parents;
}

std::string join_description(std::string_view base, std::string_view extended) {
    const auto b = trim(base);
    const auto e = trim(extended);
    if (e.empty()) return std::string(b);
    if (b.empty()) return std::string(e);
    return std::string(b) + " " + std::string(e);
}

std::vector<RawEntry> read_csv(std::string_view source) {
    const auto rows = parse_csv_rows(source);
    if (rows.empty()) throw Error(Errc::SchemaError, "CSV has no header row");
    std::map<std::string, std::size_t> columns;
    for (std::size_t i = 0; i < rows[0].size(); ++i) {
        std::string name(trim(rows[0][i]));
        // tolerate a UTF-8 byte-order mark on the first column
        if (i == 0 && name.rfind("\xEF\xBB\xBF", 0) == 0) name.erase(0, 3);
        columns.emplace(name, i);
    }
    if (!columns.count("Abstraction") && columns.count("Weakness Abstraction")) {
        columns["Abstraction"] = columns["Weakness Abstraction"];
    }
    for (const auto& required : split(kCweCsvHeader, ',')) {
        if (!columns.count(required)) throw Error(Errc::SchemaError, "missing CSV column '" + required + "'");
    }
    const auto status_col = columns.count("Status") ? std::optional(columns["Status"]) : std::nullopt;

    std::vector<RawEntry> entries;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        auto cell = [&](const std::string& name) -> std::string {
            const auto idx = columns.at(name);
            return idx < row.size() ? row[idx] : std::string();
        };
        const auto id = canonicalize_cwe_id(cell("CWE-ID"));
        if (!id) throw Error(Errc::SchemaError, "row " + std::to_string(r + 1) + ": bad CWE-ID '" + cell("CWE-ID") + "'");
        RawEntry entry;
        entry.record.id = *id;
        entry.record.name = cell("Name");
        entry.record.abstraction = cell("Abstraction");
        entry.record.description = join_description(cell("Description"), cell("Extended Description"));
        entry.record.parents = parse_related(cell("Related Weaknesses"));
        const std::string status = status_col && *status_col < row.size() ? row[*status_col] : std::string();
        entry.deprecated = to_lower(trim(status)) == "deprecated" || starts_with_icase(entry.record.name, "DEPRECATED:");
        entries.push_back(std::move(entry));
    }
    return entries;
}

using boost::property_tree::ptree;

// Concatenated text of an element, including nested markup (xhtml:p, xhtml:li, ...).
void collect_text(const ptree& node, std::string& out) {
    const auto own = trim(node.data());
    if (!own.empty()) {
        if (!out.empty()) out += ' ';
        out += own;
    }
    for (const auto& [key, child] : node) {
        if (key == "<xmlattr>" || key == "<xmlcomment>") continue;
        collect_text(child, out);
    }
}

std::string collapse_whitespace(std::string_view text) {
    std::string out;
    bool pending_space = false;
    for (char c : text) {
        if (c == ' ' || c == '\n' || c == '\t' || c == '\r') {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out += ' ';
        pending_space = false;
        out += c;
    }
    return out;
}

std::vector<RawEntry> read_xml(std::string_view source, std::string& version) {
    ptree tree;
    try {
        std::istringstream in{std::string(source)};
        boost::property_tree::read_xml(in, tree);
    } catch (const boost::property_tree::xml_parser_error& e) {
        throw Error(Errc::DecodeError, std::string("malformed XML: ") + e.what());
    }
    const auto catalog = tree.get_child_optional("Weakness_Catalog");
    if (!catalog) throw Error(Errc::SchemaError, "missing <Weakness_Catalog> root element");
    version = catalog->get<std::string>("<xmlattr>.Version", "");
    const auto weaknesses = catalog->get_child_optional("Weaknesses");
    if (!weaknesses) throw Error(Errc::SchemaError, "missing <Weaknesses> element");

    std::vector<RawEntry> entries;
    for (const auto& [key, weakness] : *weaknesses) {
        if (key != "Weakness") continue;
        const auto raw_id = weakness.get_optional<std::string>("<xmlattr>.ID");
        if (!raw_id) throw Error(Errc::SchemaError, "<Weakness> without ID attribute");
        const auto id = canonicalize_cwe_id(*raw_id);
        if (!id) throw Error(Errc::SchemaError, "<Weakness> with bad ID '" + *raw_id + "'");
        RawEntry entry;
        entry.record.id = *id;
        entry.record.name = weakness.get<std::string>("<xmlattr>.Name", "");
        entry.record.abstraction = weakness.get<std::string>("<xmlattr>.Abstraction", "");
        std::string base;
        std::string extended;
        if (const auto d = weakness.get_child_optional("Description")) collect_text(*d, base);
        if (const auto d = weakness.get_child_optional("Extended_Description")) collect_text(*d, extended);
        entry.record.description = join_description(collapse_whitespace(base), collapse_whitespace(extended));
        if (const auto related = weakness.get_child_optional("Related_Weaknesses")) {
            for (const auto& [rkey, rel] : *related) {
                if (rkey != "Related_Weakness") continue;
                if (rel.get<std::string>("<xmlattr>.Nature", "") != "ChildOf") continue;
                const auto parent = canonicalize_cwe_id(rel.get<std::string>("<xmlattr>.CWE_ID", ""));
                if (parent && std::find(entry.record.parents.begin(), entry.record.parents.end(), *parent) ==
                                  entry.record.parents.end()) {
                    entry.record.parents.push_back(*parent);
                }
            }
        }
        const auto status = weakness.get<std::string>("<xmlattr>.Status", "");
        entry.deprecated = status == "Deprecated" || starts_with_icase(entry.record.name, "DEPRECATED:");
        entries.push_back(std::move(entry));
    }
    return entries;
}

std::string csv_quote(std::string_view field) {
    if (field.find_first_of(",\"\n\r") == std::string_view::npos && trim(field) == field) {
        return std::string(field);
    }
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

} // namespace

ParsedCorpus parse_cwe_corpus(std::string_view source, CorpusFormat format) {
    if (!is_valid_utf8(source)) throw Error(Errc::DecodeError, "corpus is not valid UTF-8");
    ParsedCorpus result;
    auto entries = format == CorpusFormat::Csv ? read_csv(source) : read_xml(source, result.report.corpus_version);

    std::map<std::uint64_t, CweRecord> kept;
    for (auto& entry : entries) {
        if (entry.deprecated) {
            ++result.report.dropped_deprecated;
            continue;
        }
        if (trim(entry.record.description).empty()) {
            ++result.report.dropped_empty_description;
            continue;
        }
        const auto number = cwe_number(entry.record.id);
        if (kept.count(number)) throw Error(Errc::SchemaError, "duplicate entry " + entry.record.id);
        kept.emplace(number, std::move(entry.record));
    }
    std::set<std::string> ids;
    for (const auto& [n, record] : kept) ids.insert(record.id);
    for (auto& [n, record] : kept) {
        auto& parents = record.parents;
        const auto before = parents.size();
        parents.erase(std::remove_if(parents.begin(), parents.end(),
                                     [&ids](const std::string& p) { return ids.count(p) == 0; }),
                      parents.end());
        result.report.dangling_parent_links += before - parents.size();
        result.records.push_back(std::move(record));
    }
    result.report.parsed = result.records.size();
    return result;
}

std::string write_cwe_csv(const std::vector<CweRecord>& records) {
    std::string out(kCweCsvHeader);
    out += '\n';
    for (const auto& r : records) {
        std::string related;
        for (const auto& p : r.parents) {
            if (!related.empty()) related += ';';
            related += "ChildOf:" + p;
        }
        // the whole description goes in one column so the split point is never ambiguous
        out += csv_quote(r.id) + ',' + csv_quote(r.name) + ',' + csv_quote(r.abstraction) + ',' +
               csv_quote(r.description) + ",," + csv_quote(related) + '\n';
    }
    return out;
}

LoadReport load_into_graph(const std::vector<CweRecord>& records, KnowledgeGraph& graph) {
    if (graph.frozen()) throw Error(Errc::FrozenGraph, "cannot load CWE records into a frozen graph");
    LoadReport report;
    for (const auto& r : records) {
        if (!graph.contains(r.id)) ++report.added;
        GraphNode node;
        node.id = r.id;
        node.kind = NodeKind::Cwe;
        node.name = r.name;
        node.description = r.description;
        node.attributes["abstraction"] = r.abstraction;
        graph.upsert_node(std::move(node));
    }
    for (const auto& r : records) {
        for (const auto& parent : r.parents) {
            const auto* target = graph.find_node(parent);
            if (target == nullptr || target->kind != NodeKind::Cwe) {
                ++report.skipped_parent_links;
                continue;
            }
            graph.link(r.id, EdgeKind::ChildOf, parent, 1.0, Provenance::Curated);
            ++report.child_edges;
        }
    }
    return report;
}

} // namespace vulread::kg
