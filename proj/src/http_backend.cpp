#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "checklist_forge/http_backend.hpp"

#include <json.hpp>

namespace checklist_forge {

using json = nlohmann::json;

HttpChatBackend::HttpChatBackend(std::string base_url, std::string api_key, bool supports_n,
                                 int timeout_seconds)
    : api_key_(std::move(api_key)), supports_n_(supports_n), timeout_seconds_(timeout_seconds) {
    auto scheme_end = base_url.find("://");
    if (scheme_end == std::string::npos) {
        throw std::invalid_argument("endpoint URL must include a scheme: " + base_url);
    }
    auto path_start = base_url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        origin_ = base_url;
    } else {
        origin_ = base_url.substr(0, path_start);
        path_prefix_ = base_url.substr(path_start);
    }
    while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

std::string HttpChatBackend::encode_body(const TeacherRequest& request) {
    json messages = json::array();
    for (const auto& m : request.messages) {
        messages.push_back({{"role", m.role}, {"content", m.content}});
    }
    json body{{"model", request.model},       {"messages", std::move(messages)},
              {"temperature", request.temperature}, {"top_p", request.top_p},
              {"n", request.n},               {"max_tokens", request.max_tokens}};
    if (request.seed) body["seed"] = *request.seed;
    return body.dump();
}

std::vector<std::string> HttpChatBackend::decode_body(const std::string& body) {
    try {
        auto j = json::parse(body);
        std::vector<std::string> out;
        for (const auto& choice : j.at("choices")) {
            const auto& content = choice.at("message").at("content");
            out.push_back(content.is_null() ? std::string{} : content.get<std::string>());
        }
        return out;
    } catch (const json::exception& e) {
        throw TransientEndpointError(std::string("malformed completion body: ") + e.what());
    }
}

std::vector<std::string> HttpChatBackend::complete(const TeacherRequest& request) {
    httplib::Client client(origin_);
    client.set_connection_timeout(timeout_seconds_, 0);
    client.set_read_timeout(timeout_seconds_, 0);
    client.set_write_timeout(timeout_seconds_, 0);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

    auto res = client.Post(path_prefix_ + "/chat/completions", headers, encode_body(request),
                           "application/json");
    if (!res) {
        throw TransientEndpointError("http error: " + httplib::to_string(res.error()));
    }
    if (res->status == 429 || res->status >= 500) {
        throw TransientEndpointError("http status " + std::to_string(res->status));
    }
    if (res->status != 200) {
        throw EndpointFailure("http status " + std::to_string(res->status) + ": " +
                              res->body.substr(0, 512));
    }
    return decode_body(res->body);
}

}  // namespace checklist_forge
