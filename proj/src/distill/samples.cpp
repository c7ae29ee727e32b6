// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 vulread contributors

#include "vulread/common.hpp"
#include "vulread/distill/types.hpp"
#include "vulread/error.hpp"

namespace vulread::distill {

FunctionSample sample_from_json(const nlohmann::json& record, bool allow_unlabeled_cwe) {
    FunctionSample sample;
    try {
        sample.id = record.at("id").is_string() ? record.at("id").get<std::string>()
                                                : record.at("id").dump();
        sample.code = record.at("code").get<std::string>();
        sample.label = record.at("label").get<int>();
        if (record.contains("cwe_ids") && !record.at("cwe_ids").is_null()) {
            for (const auto& raw : record.at("cwe_ids")) {
                const auto token = raw.is_string() ? raw.get<std::string>() : raw.dump();
                const auto id = canonicalize_cwe_id(token);
                if (!id) throw Error(Errc::SchemaError, "sample " + sample.id + ": bad CWE id '" + token + "'");
                sample.cwe_ids.insert(*id);
            }
        }
        sample.source = record.value("source", std::string());
        sample.language = record.value("language", std::string());
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::SchemaError, std::string("sample record: ") + e.what());
    }
    if (sample.id.empty()) throw Error(Errc::SchemaError, "sample id is empty");
    if (sample.label != 0 && sample.label != 1) {
        throw Error(Errc::SchemaError, "sample " + sample.id + ": label must be 0 or 1");
    }
    if (sample.code.empty()) throw Error(Errc::SchemaError, "sample " + sample.id + ": code is empty");
    if (sample.label == 1 && sample.cwe_ids.empty() && !allow_unlabeled_cwe) {
        throw Error(Errc::SchemaError, "sample " + sample.id + ": vulnerable sample without CWE ids");
    }
    return sample;
}

nlohmann::json sample_to_json(const FunctionSample& sample) {
    return nlohmann::json{{"id", sample.id},
                          {"code", sample.code},
                          {"label", sample.label},
                          {"cwe_ids", sample.cwe_ids},
                          {"source", sample.source},
                          {"language", sample.language}};
}

std::vector<FunctionSample> read_samples(const std::filesystem::path& path, bool allow_unlabeled_cwe) {
    std::vector<FunctionSample> samples;
    for (const auto& record : read_jsonl(path)) samples.push_back(sample_from_json(record, allow_unlabeled_cwe));
    return samples;
}

std::string write_samples(const std::vector<FunctionSample>& samples) {
    std::vector<nlohmann::json> records;
    records.reserve(samples.size());
    for (const auto& s : samples) records.push_back(sample_to_json(s));
    return dump_jsonl(records);
}

} // namespace vulread::distill
