// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 vulread contributors

#include "vulread/kg/embedding.hpp"

#include <cctype>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "vulread/common.hpp"
#include "vulread/error.hpp"

namespace vulread::kg {

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw Error(Errc::InvalidArgument, "embedding dimension mismatch");
    double dot = 0.0;
    double na = 0.0;
    double nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) throw Error(Errc::ZeroVector, "cosine similarity of a zero vector");
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

HashEmbedder::HashEmbedder(std::size_t dimension) : dimension_(dimension) {
    if (dimension_ == 0) throw Error(Errc::InvalidArgument, "embedding dimension must be positive");
}

Embedding HashEmbedder::embed(std::string_view text) {
    Embedding v(dimension_, 0.0);
    auto add = [this, &v](std::string_view feature, double weight) {
        const auto h = fnv1a64(feature);
        const auto bucket = static_cast<std::size_t>(h % dimension_);
        v[bucket] += ((h >> 63) != 0U ? -1.0 : 1.0) * weight;
    };
    std::string word;
    auto flush = [&]() {
        if (word.empty()) return;
        add(word, 1.0);
        const std::string padded = "#" + word + "#";
        for (std::size_t i = 0; i + 3 <= padded.size(); ++i) add(std::string_view(padded).substr(i, 3), 0.25);
        word.clear();
    };
    for (unsigned char c : text) {
        if (std::isalnum(c) != 0) {
            word += static_cast<char>(std::tolower(c));
        } else {
            flush();
        }
    }
    flush();
    return v;
}

TableEmbedder::TableEmbedder(std::size_t dimension, std::map<std::string, Embedding, std::less<>> table)
    : dimension_(dimension), table_(std::move(table)) {
    for (const auto& [text, vec] : table_) {
        if (vec.size() != dimension_) throw Error(Errc::InvalidArgument, "table vector has wrong dimension");
    }
}

Embedding TableEmbedder::embed(std::string_view text) {
    auto it = table_.find(text);
    if (it == table_.end()) throw Error(Errc::InvalidArgument, "no table embedding for '" + std::string(text) + "'");
    return it->second;
}

CachedEmbedder::CachedEmbedder(EmbeddingProvider& inner, std::filesystem::path cache_file)
    : inner_(inner), path_(std::move(cache_file)) {
    if (!std::filesystem::exists(path_)) return;
    for (const auto& line : read_jsonl(path_)) {
        auto vec = line.at("embedding").get<Embedding>();
        if (vec.size() != inner_.dimension()) {
            throw Error(Errc::CorruptInput, "cache entry dimension differs from the provider");
        }
        cache_.emplace(line.at("key").get<std::string>(), std::move(vec));
    }
}

Embedding CachedEmbedder::embed(std::string_view text) {
    const auto key = sha256_hex(text);
    std::lock_guard lock(mutex_);
    if (auto it = cache_.find(key); it != cache_.end()) {
        ++hits_;
        return it->second;
    }
    ++misses_;
    auto vec = inner_.embed(text);
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    std::ofstream out(path_, std::ios::app | std::ios::binary);
    if (!out) throw Error(Errc::Io, "cannot append to embedding cache " + path_.string());
    out << nlohmann::json{{"key", key}, {"embedding", vec}}.dump() << '\n';
    cache_.emplace(key, vec);
    return vec;
}

} // namespace vulread::kg
