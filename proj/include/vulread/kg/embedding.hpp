// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 vulread contributors

#pragma once

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vulread::kg {

using Embedding = std::vector<double>;

/// Text -> fixed-dimension vector. Implementations must return the same vector
/// for the same text within one instance, and every vector has dimension().
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;

    virtual Embedding embed(std::string_view text) = 0;
    [[nodiscard]] virtual std::size_t dimension() const = 0;
};

/// Throws Errc::ZeroVector when either side has zero norm and
/// Errc::InvalidArgument on a dimension mismatch.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Deterministic feature-hashing embedder: lowercased word tokens (and their
/// character trigrams) are hashed into `dimension` signed buckets. Texts that share
/// vocabulary land close together, which is enough for offline runs and tests.
class HashEmbedder final : public EmbeddingProvider {
public:
    explicit HashEmbedder(std::size_t dimension = 256);

    Embedding embed(std::string_view text) override;
    [[nodiscard]] std::size_t dimension() const override { return dimension_; }

private:
    std::size_t dimension_;
};

/// Wraps another provider and counts how often embed() is invoked.
class CountingEmbedder final : public EmbeddingProvider {
public:
    explicit CountingEmbedder(EmbeddingProvider& inner) : inner_(inner) {}

    Embedding embed(std::string_view text) override {
        ++calls_;
        return inner_.embed(text);
    }
    [[nodiscard]] std::size_t dimension() const override { return inner_.dimension(); }
    [[nodiscard]] std::size_t calls() const noexcept { return calls_.load(); }

private:
    EmbeddingProvider& inner_;
    std::atomic<std::size_t> calls_{0};
};

/// Embedder backed by a fixed text -> vector table; unknown texts throw
/// Errc::InvalidArgument. Used for scripted tests.
class TableEmbedder final : public EmbeddingProvider {
public:
    TableEmbedder(std::size_t dimension, std::map<std::string, Embedding, std::less<>> table);

    Embedding embed(std::string_view text) override;
    [[nodiscard]] std::size_t dimension() const override { return dimension_; }

private:
    std::size_t dimension_;
    std::map<std::string, Embedding, std::less<>> table_;
};

/// File-backed cache keyed by the SHA-256 of the text. Misses are forwarded to
/// the inner provider and appended to the cache file as JSON lines
/// {"key": <sha256>, "embedding": [...]}.
class CachedEmbedder final : public EmbeddingProvider {
public:
    CachedEmbedder(EmbeddingProvider& inner, std::filesystem::path cache_file);

    Embedding embed(std::string_view text) override;
    [[nodiscard]] std::size_t dimension() const override { return inner_.dimension(); }
    [[nodiscard]] std::size_t hits() const noexcept { return hits_; }
    [[nodiscard]] std::size_t misses() const noexcept { return misses_; }

private:
    EmbeddingProvider& inner_;
    std::filesystem::path path_;
    std::map<std::string, Embedding> cache_;
    std::mutex mutex_;
    std::size_t hits_ = 0;
    std::size_t misses_ = 0;
};

} // namespace vulread::kg
