// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 vulread contributors

#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include "vulread/kg/embedding.hpp"

namespace vulread::llm {

enum class Role { System, User, Assistant };

std::string_view to_string(Role role) noexcept;

struct ChatMessage {
    Role role = Role::User;
    std::string content;

    friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct ChatRequest {
    std::string model;
    std::vector<ChatMessage> messages;
    double temperature = 0.0; // greedy decoding
    int max_tokens = 1024;
    std::optional<std::int64_t> seed;
};

struct Usage {
    int prompt_tokens = 0;
    int completion_tokens = 0;
};

struct ChatResponse {
    std::string content;
    std::string finish_reason;
    Usage usage;
    int retry_count = 0;
};

/// Character-count proxy for token budgets: tokens ~= ceil(chars / chars_per_token).
struct TokenBudget {
    std::size_t max_input_tokens = 4096;
    std::size_t chars_per_token = 4;

    [[nodiscard]] std::size_t estimate(std::string_view text) const noexcept {
        const auto d = chars_per_token == 0 ? 1 : chars_per_token;
        return (text.size() + d - 1) / d;
    }
    [[nodiscard]] bool fits(std::string_view text) const noexcept { return estimate(text) <= max_input_tokens; }
};

/// Wire body for POST <base>/v1/chat/completions. Byte-stable for a fixed request.
std::string serialize_request(const ChatRequest& request);

/// Parses a chat-completions response body (choices[0].message.content).
/// Throws Errc::MalformedResponse.
ChatResponse parse_chat_response(std::string_view body);

/// Throws Errc::InvalidArgument for empty model/messages or max_tokens <= 0, and
/// Errc::BudgetExceeded when the summed message content is over budget.
void validate_request(const ChatRequest& request, const TokenBudget& budget);

class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual ChatResponse chat(const ChatRequest& request) = 0;
};

// ---- HTTP -------------------------------------------------------------------

struct HttpResult {
    int status = 0;
    std::string body;
};

/// Minimal POST transport so retry behaviour can be exercised without sockets.
/// Implementations throw Errc::TransportError when no HTTP response was received.
class HttpTransport {
public:
    virtual ~HttpTransport() = default;
    virtual HttpResult post(const std::string& path, const std::string& body,
                            const std::map<std::string, std::string>& headers) = 0;
};

/// cpp-httplib based transport. `base_url` is scheme://host[:port][/prefix].
class HttplibTransport final : public HttpTransport {
public:
    explicit HttplibTransport(std::string base_url, std::chrono::seconds timeout = std::chrono::seconds(120));

    HttpResult post(const std::string& path, const std::string& body,
                    const std::map<std::string, std::string>& headers) override;

private:
    std::string scheme_host_port_;
    std::string prefix_;
    std::chrono::seconds timeout_;
};

struct RetryPolicy {
    int max_retries = 3;
    std::chrono::milliseconds base_delay{1000};
    double jitter = 0.25; // fraction of the delay added at random
    std::uint64_t jitter_seed = 0;
    /// Replaced in tests to avoid real sleeping.
    std::function<void(std::chrono::milliseconds)> sleep;

    [[nodiscard]] std::chrono::milliseconds delay_for(int attempt, double unit_random) const;
};

struct BackendConfig {
    std::string base_url;
    std::string api_key;
    RetryPolicy retry;
    std::size_t max_in_flight = 4;
    TokenBudget budget;

    /// Reads VULREAD_API_BASE and VULREAD_API_KEY.
    static BackendConfig from_env();
};

struct Telemetry {
    std::atomic<std::size_t> requests{0};
    std::atomic<std::size_t> retries{0};
    std::atomic<std::size_t> failures{0};
};

/// Shared HTTP plumbing: auth header, bounded in-flight requests, retries on
/// transport errors and HTTP 429/5xx with exponential backoff plus jitter.
class HttpClientCore {
public:
    HttpClientCore(BackendConfig config, std::unique_ptr<HttpTransport> transport);

    /// Returns the 2xx body and the number of retries it took.
    std::pair<std::string, int> post_json(const std::string& path, const std::string& body);

    [[nodiscard]] const BackendConfig& config() const noexcept { return config_; }
    [[nodiscard]] const Telemetry& telemetry() const noexcept { return telemetry_; }

private:
    double next_unit_random();

    BackendConfig config_;
    std::unique_ptr<HttpTransport> transport_;
    std::unique_ptr<std::counting_semaphore<>> in_flight_;
    std::mutex rng_mutex_;
    std::mt19937_64 rng_;
    Telemetry telemetry_;
};

class HttpChatBackend final : public ChatBackend {
public:
    HttpChatBackend(BackendConfig config, std::unique_ptr<HttpTransport> transport);
    /// Uses HttplibTransport against config.base_url.
    explicit HttpChatBackend(BackendConfig config);

    ChatResponse chat(const ChatRequest& request) override;
    [[nodiscard]] const Telemetry& telemetry() const noexcept { return core_.telemetry(); }

private:
    HttpClientCore core_;
};

/// POST <base>/v1/embeddings {model, input:[text]} -> data[0].embedding.
/// The dimension is fixed by the first response (or up front when given).
class HttpEmbeddingProvider final : public kg::EmbeddingProvider {
public:
    HttpEmbeddingProvider(BackendConfig config, std::string model, std::unique_ptr<HttpTransport> transport,
                          std::optional<std::size_t> dimension = std::nullopt);
    HttpEmbeddingProvider(BackendConfig config, std::string model, std::optional<std::size_t> dimension = std::nullopt);

    kg::Embedding embed(std::string_view text) override;
    /// Probes the endpoint once if the dimension is not known yet.
    [[nodiscard]] std::size_t dimension() const override;

private:
    std::vector<kg::Embedding> request(const std::vector<std::string>& inputs);

    mutable HttpClientCore core_;
    std::string model_;
    mutable std::optional<std::size_t> dimension_;
    mutable std::mutex mutex_;
};

std::string serialize_embedding_request(std::string_view model, const std::vector<std::string>& inputs);
std::vector<kg::Embedding> parse_embedding_response(std::string_view body);

// ---- offline backends -------------------------------------------------------

/// Deterministic stand-in. Looks up canned responses by prompt_hash(request);
/// otherwise defers to the responder; otherwise throws Errc::BackendError.
class MockChatBackend final : public ChatBackend {
public:
    using Responder = std::function<std::string(const ChatRequest&)>;

    MockChatBackend() = default;
    explicit MockChatBackend(Responder responder) : responder_(std::move(responder)) {}

    /// SHA-256 over the model name and the role/content of every message.
    static std::string prompt_hash(const ChatRequest& request);

    void add_canned(std::string hash, std::string response);
    /// Loads a JSON object mapping prompt hash -> response text.
    void load_canned(std::string_view json_text);

    ChatResponse chat(const ChatRequest& request) override;
    [[nodiscard]] std::size_t calls() const noexcept { return calls_.load(); }

private:
    Responder responder_;
    std::map<std::string, std::string> canned_;
    mutable std::mutex mutex_;
    std::atomic<std::size_t> calls_{0};
};

/// Replays a recorded chat-completions response body for every request.
class ReplayBackend final : public ChatBackend {
public:
    explicit ReplayBackend(std::string body) : body_(std::move(body)) {}
    ChatResponse chat(const ChatRequest&) override { return parse_chat_response(body_); }

private:
    std::string body_;
};

} // namespace vulread::llm
