// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 vulread contributors

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace vulread {

inline constexpr std::string_view kToolVersion = "0.3.0";

// ---- CWE identifiers --------------------------------------------------------

/// True for "CWE-" followed by one or more decimal digits.
bool is_canonical_cwe_id(std::string_view id) noexcept;

/// Normalizes "79", "CWE-79", "cwe 079", "CWE79" to "CWE-79". Returns nullopt when
/// the token is not a CWE reference.
std::optional<std::string> canonicalize_cwe_id(std::string_view token);

/// Numeric part of a canonical id; used for natural ordering in reports.
std::uint64_t cwe_number(std::string_view canonical_id);

// ---- text -------------------------------------------------------------------

std::string to_lower(std::string_view text);
std::string_view trim(std::string_view text) noexcept;
std::vector<std::string> split(std::string_view text, char sep);
bool starts_with_icase(std::string_view text, std::string_view prefix) noexcept;
bool is_valid_utf8(std::string_view bytes) noexcept;

// ---- hashing ----------------------------------------------------------------

std::string sha256_hex(std::string_view bytes);
std::uint64_t fnv1a64(std::string_view bytes) noexcept;

// ---- files ------------------------------------------------------------------

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

/// Reads a JSON-lines file; blank lines are skipped. Throws Errc::CorruptInput with
/// the 1-based line number on malformed lines.
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);
std::vector<nlohmann::json> parse_jsonl(std::string_view text);
std::string dump_jsonl(const std::vector<nlohmann::json>& records);

// ---- randomness -------------------------------------------------------------

/// Unbiased draw in [0, bound) from a 64-bit Mersenne twister. Implemented here
/// rather than via std::uniform_int_distribution so outputs are identical across
/// standard library implementations.
std::uint64_t bounded_draw(std::mt19937_64& rng, std::uint64_t bound);

template <typename T>
void deterministic_shuffle(std::vector<T>& items, std::mt19937_64& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(bounded_draw(rng, i));
        std::swap(items[i - 1], items[j]);
    }
}

} // namespace vulread
