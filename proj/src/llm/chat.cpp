// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 vulread contributors

#include "vulread/llm/chat.hpp"

#include <cmath>
#include <cstdlib>
#include <thread>

#include <nlohmann/json.hpp>

#include "vulread/common.hpp"
#include "vulread/error.hpp"

namespace vulread::llm {

using nlohmann::json;

std::string_view to_string(Role role) noexcept {
    switch (role) {
        case Role::System: return "system";
        case Role::User: return "user";
        case Role::Assistant: return "assistant";
    }
    return "user";
}

std::string serialize_request(const ChatRequest& request) {
    json messages = json::array();
    for (const auto& m : request.messages) messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
    json body{{"model", request.model},
              {"messages", std::move(messages)},
              {"temperature", request.temperature},
              {"max_tokens", request.max_tokens}};
    if (request.seed) body["seed"] = *request.seed;
    return body.dump(-1, ' ', false, json::error_handler_t::replace);
}

ChatResponse parse_chat_response(std::string_view body) {
    json doc;
    try {
        doc = json::parse(body);
    } catch (const json::exception& e) {
        throw Error(Errc::MalformedResponse, e.what());
    }
    if (!doc.is_object() || !doc.contains("choices") || !doc["choices"].is_array() || doc["choices"].empty()) {
        throw Error(Errc::MalformedResponse, "response has no choices");
    }
    const auto& choice = doc["choices"][0];
    ChatResponse response;
    if (choice.contains("finish_reason") && choice["finish_reason"].is_string()) {
        response.finish_reason = choice["finish_reason"].get<std::string>();
    }
    const bool has_content = choice.contains("message") && choice["message"].is_object() &&
                             choice["message"].contains("content") && choice["message"]["content"].is_string();
    if (has_content) {
        response.content = choice["message"]["content"].get<std::string>();
    } else if (response.finish_reason == "stop" || response.finish_reason.empty()) {
        throw Error(Errc::MalformedResponse, "choices[0].message.content missing");
    }
    if (doc.contains("usage") && doc["usage"].is_object()) {
        response.usage.prompt_tokens = doc["usage"].value("prompt_tokens", 0);
        response.usage.completion_tokens = doc["usage"].value("completion_tokens", 0);
    }
    return response;
}

void validate_request(const ChatRequest& request, const TokenBudget& budget) {
    if (request.model.empty()) throw Error(Errc::InvalidArgument, "request model is empty");
    if (request.messages.empty()) throw Error(Errc::InvalidArgument, "request has no messages");
    if (request.max_tokens <= 0) throw Error(Errc::InvalidArgument, "max_tokens must be positive");
    if (!std::isfinite(request.temperature) || request.temperature < 0.0) {
        throw Error(Errc::InvalidArgument, "temperature must be a non-negative number");
    }
    std::size_t tokens = 0;
    for (const auto& m : request.messages) tokens += budget.estimate(m.content);
    if (tokens > budget.max_input_tokens) {
        throw Error(Errc::BudgetExceeded, "request needs ~" + std::to_string(tokens) + " tokens, budget is " +
                                              std::to_string(budget.max_input_tokens));
    }
}

std::chrono::milliseconds RetryPolicy::delay_for(int attempt, double unit_random) const {
    const double base = static_cast<double>(base_delay.count()) * std::ldexp(1.0, attempt);
    return std::chrono::milliseconds(static_cast<std::int64_t>(base * (1.0 + jitter * unit_random)));
}

BackendConfig BackendConfig::from_env() {
    BackendConfig config;
    if (const char* base = std::getenv("VULREAD_API_BASE")) config.base_url = base;
    if (const char* key = std::getenv("VULREAD_API_KEY")) config.api_key = key;
    return config;
}

HttpClientCore::HttpClientCore(BackendConfig config, std::unique_ptr<HttpTransport> transport)
    : config_(std::move(config)),
      transport_(std::move(transport)),
      in_flight_(std::make_unique<std::counting_semaphore<>>(
          static_cast<std::ptrdiff_t>(config_.max_in_flight == 0 ? 1 : config_.max_in_flight))),
      rng_(config_.retry.jitter_seed) {
    if (!transport_) throw Error(Errc::InvalidArgument, "HTTP backend needs a transport");
}

double HttpClientCore::next_unit_random() {
    std::lock_guard lock(rng_mutex_);
    return static_cast<double>(rng_() >> 11) * 0x1.0p-53;
}

std::pair<std::string, int> HttpClientCore::post_json(const std::string& path, const std::string& body) {
    std::map<std::string, std::string> headers{{"Content-Type", "application/json"}};
    if (!config_.api_key.empty()) headers["Authorization"] = "Bearer " + config_.api_key;

    struct Slot {
        std::counting_semaphore<>& sem;
        explicit Slot(std::counting_semaphore<>& s) : sem(s) { sem.acquire(); }
        ~Slot() { sem.release(); }
        Slot(const Slot&) = delete;
        Slot& operator=(const Slot&) = delete;
    };

    int retries = 0;
    for (int attempt = 0;; ++attempt) {
        ++telemetry_.requests;
        std::optional<Error> failure;
        {
            Slot slot(*in_flight_);
            try {
                auto result = transport_->post(path, body, headers);
                if (result.status >= 200 && result.status < 300) return {std::move(result.body), retries};
                if (result.status == 401 || result.status == 403) {
                    ++telemetry_.failures;
                    throw Error(Errc::AuthError, "HTTP " + std::to_string(result.status));
                }
                if (result.status == 429) {
                    failure = Error(Errc::RateLimited, "HTTP 429 after " + std::to_string(attempt + 1) + " attempts");
                } else if (result.status >= 500) {
                    failure = Error(Errc::BackendError,
                                    "HTTP " + std::to_string(result.status) + " after " +
                                        std::to_string(attempt + 1) + " attempts: " + result.body.substr(0, 200));
                } else {
                    ++telemetry_.failures;
                    throw Error(Errc::BackendError,
                                "HTTP " + std::to_string(result.status) + ": " + result.body.substr(0, 200));
                }
            } catch (const Error& e) {
                if (e.code() != Errc::TransportError) throw;
                failure = e;
            }
        }
        if (attempt >= config_.retry.max_retries) {
            ++telemetry_.failures;
            throw *failure;
        }
        ++retries;
        ++telemetry_.retries;
        const auto delay = config_.retry.delay_for(attempt, next_unit_random());
        if (config_.retry.sleep) {
            config_.retry.sleep(delay);
        } else {
            std::this_thread::sleep_for(delay);
        }
    }
}

HttpChatBackend::HttpChatBackend(BackendConfig config, std::unique_ptr<HttpTransport> transport)
    : core_(std::move(config), std::move(transport)) {}

HttpChatBackend::HttpChatBackend(BackendConfig config)
    : core_(config, std::make_unique<HttplibTransport>(config.base_url)) {}

ChatResponse HttpChatBackend::chat(const ChatRequest& request) {
    validate_request(request, core_.config().budget);
    auto [body, retries] = core_.post_json("/v1/chat/completions", serialize_request(request));
    auto response = parse_chat_response(body);
    response.retry_count = retries;
    return response;
}

std::string serialize_embedding_request(std::string_view model, const std::vector<std::string>& inputs) {
    return json{{"model", model}, {"input", inputs}}.dump(-1, ' ', false, json::error_handler_t::replace);
}

std::vector<kg::Embedding> parse_embedding_response(std::string_view body) {
    json doc;
    try {
        doc = json::parse(body);
    } catch (const json::exception& e) {
        throw Error(Errc::MalformedResponse, e.what());
    }
    if (!doc.is_object() || !doc.contains("data") || !doc["data"].is_array()) {
        throw Error(Errc::MalformedResponse, "embedding response has no data array");
    }
    std::vector<kg::Embedding> out;
    for (const auto& item : doc["data"]) {
        if (!item.is_object() || !item.contains("embedding") || !item["embedding"].is_array()) {
            throw Error(Errc::MalformedResponse, "embedding entry without an embedding array");
        }
        try {
            out.push_back(item["embedding"].get<kg::Embedding>());
        } catch (const json::exception& e) {
            throw Error(Errc::MalformedResponse, e.what());
        }
    }
    return out;
}

HttpEmbeddingProvider::HttpEmbeddingProvider(BackendConfig config, std::string model,
                                             std::unique_ptr<HttpTransport> transport,
                                             std::optional<std::size_t> dimension)
    : core_(std::move(config), std::move(transport)), model_(std::move(model)), dimension_(dimension) {}

HttpEmbeddingProvider::HttpEmbeddingProvider(BackendConfig config, std::string model,
                                             std::optional<std::size_t> dimension)
    : core_(config, std::make_unique<HttplibTransport>(config.base_url)),
      model_(std::move(model)),
      dimension_(dimension) {}

std::vector<kg::Embedding> HttpEmbeddingProvider::request(const std::vector<std::string>& inputs) {
    auto [body, retries] = core_.post_json("/v1/embeddings", serialize_embedding_request(model_, inputs));
    (void)retries;
    auto vectors = parse_embedding_response(body);
    if (vectors.size() != inputs.size()) throw Error(Errc::MalformedResponse, "embedding count mismatch");
    return vectors;
}

kg::Embedding HttpEmbeddingProvider::embed(std::string_view text) {
    auto vectors = request({std::string(text)});
    std::lock_guard lock(mutex_);
    if (!dimension_) dimension_ = vectors[0].size();
    if (vectors[0].size() != *dimension_) throw Error(Errc::MalformedResponse, "embedding dimension changed");
    return std::move(vectors[0]);
}

std::size_t HttpEmbeddingProvider::dimension() const {
    std::lock_guard lock(mutex_);
    if (!dimension_) {
        auto [body, retries] = core_.post_json("/v1/embeddings", serialize_embedding_request(model_, {"dimension probe"}));
        (void)retries;
        const auto vectors = parse_embedding_response(body);
        if (vectors.empty()) throw Error(Errc::MalformedResponse, "empty embedding response");
        dimension_ = vectors[0].size();
    }
    return *dimension_;
}

std::string MockChatBackend::prompt_hash(const ChatRequest& request) {
    std::string material = request.model;
    for (const auto& m : request.messages) {
        material += '\x1f';
        material += to_string(m.role);
        material += '\x1e';
        material += m.content;
    }
    return sha256_hex(material);
}

void MockChatBackend::add_canned(std::string hash, std::string response) {
    std::lock_guard lock(mutex_);
    canned_[std::move(hash)] = std::move(response);
}

void MockChatBackend::load_canned(std::string_view json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw Error(Errc::CorruptInput, std::string("canned responses: ") + e.what());
    }
    if (!doc.is_object()) throw Error(Errc::CorruptInput, "canned responses must be an object");
    for (const auto& [hash, text] : doc.items()) {
        if (!text.is_string()) throw Error(Errc::CorruptInput, "canned response for " + hash + " is not a string");
        add_canned(hash, text.get<std::string>());
    }
}

ChatResponse MockChatBackend::chat(const ChatRequest& request) {
    ++calls_;
    ChatResponse response;
    response.finish_reason = "stop";
    {
        std::lock_guard lock(mutex_);
        if (auto it = canned_.find(prompt_hash(request)); it != canned_.end()) {
            response.content = it->second;
            return response;
        }
    }
    if (!responder_) throw Error(Errc::BackendError, "mock backend has no response for this prompt");
    response.content = responder_(request);
    return response;
}

} // namespace vulread::llm
