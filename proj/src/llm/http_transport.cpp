// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 vulread contributors

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "vulread/error.hpp"
#include "vulread/llm/chat.hpp"

namespace vulread::llm {

HttplibTransport::HttplibTransport(std::string base_url, std::chrono::seconds timeout) : timeout_(timeout) {
    if (base_url.empty()) throw Error(Errc::InvalidArgument, "backend base URL is empty (set VULREAD_API_BASE)");
    while (!base_url.empty() && base_url.back() == '/') base_url.pop_back();
    const auto scheme_end = base_url.find("://");
    const auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    const auto path_start = base_url.find('/', host_start);
    if (path_start == std::string::npos) {
        scheme_host_port_ = base_url;
    } else {
        scheme_host_port_ = base_url.substr(0, path_start);
        prefix_ = base_url.substr(path_start);
    }
    // a base that already ends in /v1 should not become /v1/v1/...
    if (prefix_.size() >= 3 && prefix_.compare(prefix_.size() - 3, 3, "/v1") == 0) {
        prefix_.resize(prefix_.size() - 3);
    }
}

HttpResult HttplibTransport::post(const std::string& path, const std::string& body,
                                  const std::map<std::string, std::string>& headers) {
    httplib::Client client(scheme_host_port_);
    client.set_connection_timeout(std::chrono::seconds(10));
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);
    httplib::Headers h;
    std::string content_type = "application/json";
    for (const auto& [key, value] : headers) {
        if (key == "Content-Type") {
            content_type = value;
        } else {
            h.emplace(key, value);
        }
    }
    auto result = client.Post(prefix_ + path, h, body, content_type);
    if (!result) {
        throw Error(Errc::TransportError, "POST " + scheme_host_port_ + prefix_ + path + " failed: " +
                                              httplib::to_string(result.error()));
    }
    return HttpResult{result->status, result->body};
}

} // namespace vulread::llm
