// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 vulread contributors

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vulread/error.hpp"
#include "vulread/llm/chat.hpp"
#include "vulread/orpo/orpo.hpp"
#include "vulread/retrieval/retrieval.hpp"

namespace vulread::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

/// Effective settings of one run: config file values overridden by flags.
struct PipelineConfig {
    std::uint64_t seed = 42;
    std::size_t parallel = 4;
    std::string backend = "mock"; // mock | http
    std::string chat_model = "Qwen2.5-32B-Instruct";
    std::string embedding_model = "text-embedding-3-small";
    llm::TokenBudget budget;
    int max_tokens = 1024;
    retrieval::RetrievalOptions retrieval;
    std::size_t augment_min_count = 3;
    double augment_min_similarity = 0.5;
    orpo::TrainOptions orpo;
    std::optional<std::filesystem::path> classes_path;
    std::optional<std::filesystem::path> stoplist_path;
    std::optional<std::filesystem::path> libraries_path;
    std::optional<std::filesystem::path> teacher_template_path;
    std::optional<std::filesystem::path> inference_template_path;

    [[nodiscard]] nlohmann::json to_json() const;
};

/// Reads a JSON config document. Relative paths are resolved against `base_dir`.
/// Errc::SchemaError for wrong types; Errc::Io for a referenced path that does not exist.
PipelineConfig load_config(const nlohmann::json& document, const std::filesystem::path& base_dir);

/// Run manifest: config hash, input and output hashes, tool version.
struct Manifest {
    std::string command;
    std::uint64_t seed = 42;
    std::string config_hash;
    std::map<std::string, std::string> inputs;  // path -> sha256
    std::map<std::string, std::string> outputs; // path -> sha256

    [[nodiscard]] nlohmann::json to_json() const;
};

/// Maps an error code to kExitValidation or kExitRuntime.
int exit_code_for(Errc code) noexcept;

/// Entry point; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace vulread::cli
