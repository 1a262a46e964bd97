#pragma once

#include <cstdlib>
#include <memory>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "synexp/errors.hpp"

namespace synexp {

/// Minimal chat-completions client interface. One call, one reply; callers
/// own the retry policy for malformed content.
class ChatClient {
public:
    virtual ~ChatClient() = default;

    /// messages: array of {role, content}. Returns the first choice's content.
    /// Throws BackendError (retryable for transport-level failures).
    virtual std::string complete(const nlohmann::json& messages, double temperature,
                                 int max_tokens) = 0;
};

struct RemoteEndpoint {
    std::string base_url;  // e.g. "http://127.0.0.1:8080"
    std::string path = "/v1/chat/completions";
    std::string api_key;     // sent as a bearer token when non-empty
    std::string model_name = "experience-model";
    int timeout_ms = 30000;

    /// Credentials and endpoint come from the environment, never from config
    /// files.
    static RemoteEndpoint from_env() {
        RemoteEndpoint ep;
        if (const char* url = std::getenv("SYNEXP_ENDPOINT")) ep.base_url = url;
        if (const char* key = std::getenv("SYNEXP_API_KEY")) ep.api_key = key;
        if (const char* model = std::getenv("SYNEXP_MODEL")) ep.model_name = model;
        if (const char* timeout = std::getenv("SYNEXP_TIMEOUT_MS")) ep.timeout_ms = std::atoi(timeout);
        return ep;
    }
};

/// HTTP POST client speaking the chat-completions JSON protocol:
/// request  {model, messages:[{role, content}...], temperature, max_tokens}
/// response {choices:[{message:{content}}...]}
class HttpChatClient : public ChatClient {
public:
    explicit HttpChatClient(RemoteEndpoint endpoint) : endpoint_(std::move(endpoint)) {
        if (endpoint_.base_url.empty())
            throw ConfigError("HttpChatClient: no endpoint configured (set SYNEXP_ENDPOINT)");
    }

    std::string complete(const nlohmann::json& messages, double temperature,
                         int max_tokens) override {
        httplib::Client client(endpoint_.base_url);
        client.set_connection_timeout(0, endpoint_.timeout_ms * 1000);
        client.set_read_timeout(endpoint_.timeout_ms / 1000, (endpoint_.timeout_ms % 1000) * 1000);
        httplib::Headers headers;
        if (!endpoint_.api_key.empty())
            headers.emplace("Authorization", "Bearer " + endpoint_.api_key);

        const nlohmann::json body = {{"model", endpoint_.model_name},
                                     {"messages", messages},
                                     {"temperature", temperature},
                                     {"max_tokens", max_tokens}};
        const auto res = client.Post(endpoint_.path, headers, body.dump(), "application/json");
        if (!res)
            throw BackendError("chat transport failure: " + httplib::to_string(res.error()),
                               /*retryable=*/true);
        if (res->status != 200)
            throw BackendError("chat HTTP status " + std::to_string(res->status),
                               /*retryable=*/res->status >= 500, res->body);
        try {
            const auto doc = nlohmann::json::parse(res->body);
            return doc.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw BackendError(std::string("malformed chat response: ") + e.what(),
                               /*retryable=*/true, res->body);
        }
    }

private:
    RemoteEndpoint endpoint_;
};

/// Extract the first fenced ```json block, or failing that the outermost
/// brace-delimited object, from a model reply.
inline nlohmann::json extract_json_object(const std::string& content) {
    auto parse_span = [&](std::size_t begin, std::size_t end) {
        return nlohmann::json::parse(content.substr(begin, end - begin));
    };
    const auto fence = content.find("```");
    if (fence != std::string::npos) {
        auto body_start = content.find('\n', fence);
        const auto fence_end = content.find("```", fence + 3);
        if (body_start != std::string::npos && fence_end != std::string::npos &&
            body_start < fence_end) {
            try {
                return parse_span(body_start + 1, fence_end);
            } catch (const nlohmann::json::exception&) {
                // fall through to brace scan
            }
        }
    }
    const auto open = content.find('{');
    const auto close = content.rfind('}');
    if (open == std::string::npos || close == std::string::npos || close < open)
        throw BackendError("reply contains no JSON object", /*retryable=*/true, content);
    try {
        return parse_span(open, close + 1);
    } catch (const nlohmann::json::exception& e) {
        throw BackendError(std::string("reply JSON does not parse: ") + e.what(),
                           /*retryable=*/true, content);
    }
}

}  // namespace synexp
