// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 vulread contributors

#include "vulread/common.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <limits>
#include <sstream>

#include <openssl/evp.h>

#include "vulread/error.hpp"

namespace vulread {

bool is_canonical_cwe_id(std::string_view id) noexcept {
    if (id.size() < 5 || id.substr(0, 4) != "CWE-") return false;
    if (id[4] == '0' && id.size() > 5) return false; // canonical form has no leading zeros
    return std::all_of(id.begin() + 4, id.end(),
                       [](unsigned char c) { return std::isdigit(c) != 0; });
}

std::optional<std::string> canonicalize_cwe_id(std::string_view token) {
    auto t = trim(token);
    if (starts_with_icase(t, "CWE")) {
        t.remove_prefix(3);
        if (!t.empty() && (t.front() == '-' || t.front() == ' ' || t.front() == '_')) t.remove_prefix(1);
    }
    if (t.empty()) return std::nullopt;
    if (!std::all_of(t.begin(), t.end(), [](unsigned char c) { return std::isdigit(c) != 0; })) {
        return std::nullopt;
    }
    const auto first_nonzero = t.find_first_not_of('0');
    const auto digits = first_nonzero == std::string_view::npos ? std::string_view("0") : t.substr(first_nonzero);
    return "CWE-" + std::string(digits);
}

std::uint64_t cwe_number(std::string_view canonical_id) {
    if (!is_canonical_cwe_id(canonical_id)) return 0;
    std::uint64_t value = 0;
    for (char c : canonical_id.substr(4)) value = value * 10 + static_cast<std::uint64_t>(c - '0');
    return value;
}

std::string to_lower(std::string_view text) {
    std::string out(text);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string_view trim(std::string_view text) noexcept {
    constexpr std::string_view ws = " \t\r\n\f\v";
    const auto begin = text.find_first_not_of(ws);
    if (begin == std::string_view::npos) return {};
    const auto end = text.find_last_not_of(ws);
    return text.substr(begin, end - begin + 1);
}

std::vector<std::string> split(std::string_view text, char sep) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        const auto pos = text.find(sep, start);
        if (pos == std::string_view::npos) {
            parts.emplace_back(text.substr(start));
            return parts;
        }
        parts.emplace_back(text.substr(start, pos - start));
        start = pos + 1;
    }
}

bool starts_with_icase(std::string_view text, std::string_view prefix) noexcept {
    if (text.size() < prefix.size()) return false;
    for (std::size_t i = 0; i < prefix.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(text[i])) !=
            std::tolower(static_cast<unsigned char>(prefix[i]))) {
            return false;
        }
    }
    return true;
}

bool is_valid_utf8(std::string_view bytes) noexcept {
    std::size_t i = 0;
    while (i < bytes.size()) {
        const auto c = static_cast<unsigned char>(bytes[i]);
        std::size_t extra = 0;
        std::uint32_t cp = 0;
        if (c < 0x80) {
            ++i;
            continue;
        } else if ((c & 0xE0) == 0xC0) {
            extra = 1;
            cp = c & 0x1F;
        } else if ((c & 0xF0) == 0xE0) {
            extra = 2;
            cp = c & 0x0F;
        } else if ((c & 0xF8) == 0xF0) {
            extra = 3;
            cp = c & 0x07;
        } else {
            return false;
        }
        if (i + extra >= bytes.size()) return false;
        for (std::size_t k = 1; k <= extra; ++k) {
            const auto cc = static_cast<unsigned char>(bytes[i + k]);
            if ((cc & 0xC0) != 0x80) return false;
            cp = (cp << 6) | (cc & 0x3F);
        }
        // overlong encodings, surrogates, out-of-range
        if ((extra == 1 && cp < 0x80) || (extra == 2 && cp < 0x800) || (extra == 3 && cp < 0x10000) ||
            cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
            return false;
        }
        i += extra + 1;
    }
    return true;
}

std::string sha256_hex(std::string_view bytes) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int length = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &length, EVP_sha256(), nullptr) != 1) {
        throw Error(Errc::InvalidArgument, "sha256 digest failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(length * 2);
    for (unsigned int i = 0; i < length; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0x0F]);
    }
    return out;
}

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::Io, "cannot open " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::Io, "cannot write " + path.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error(Errc::Io, "short write to " + path.string());
}

std::vector<nlohmann::json> parse_jsonl(std::string_view text) {
    std::vector<nlohmann::json> records;
    std::size_t line_no = 0;
    for (const auto& line : split(text, '\n')) {
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            records.push_back(nlohmann::json::parse(line));
        } catch (const nlohmann::json::exception& e) {
            throw Error(Errc::CorruptInput, "line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return records;
}

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path) {
    try {
        return parse_jsonl(read_file(path));
    } catch (const Error& e) {
        if (e.code() == Errc::CorruptInput) {
            throw Error(Errc::CorruptInput, path.string() + ": " + e.what());
        }
        throw;
    }
}

std::string dump_jsonl(const std::vector<nlohmann::json>& records) {
    std::string out;
    for (const auto& record : records) {
        out += record.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
        out += '\n';
    }
    return out;
}

std::uint64_t bounded_draw(std::mt19937_64& rng, std::uint64_t bound) {
    if (bound == 0) throw Error(Errc::InvalidArgument, "bounded_draw with zero bound");
    // rejection sampling on the top of the range removes modulo bias
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                (std::numeric_limits<std::uint64_t>::max() % bound);
    std::uint64_t value = 0;
    do {
        value = rng();
    } while (value >= limit);
    return value % bound;
}

} // namespace vulread
