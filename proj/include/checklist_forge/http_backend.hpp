#pragma once

#include <string>

#include "checklist_forge/gateway.hpp"

namespace checklist_forge {

inline constexpr const char* kEndpointEnvVar = "CHECKLIST_FORGE_ENDPOINT";
inline constexpr const char* kApiKeyEnvVar = "CHECKLIST_FORGE_API_KEY";

/// OpenAI-compatible chat-completions client. `base_url` is the API root,
/// e.g. "https://host/v1"; requests go to `<base_url>/chat/completions`.
class HttpChatBackend : public TeacherBackend {
public:
    HttpChatBackend(std::string base_url, std::string api_key, bool supports_n = true,
                    int timeout_seconds = 120);

    std::vector<std::string> complete(const TeacherRequest& request) override;
    bool supports_n() const override { return supports_n_; }

    /// Request body sent on the wire.
    static std::string encode_body(const TeacherRequest& request);
    /// Extracts choices[*].message.content. Throws TransientEndpointError on a
    /// malformed body.
    static std::vector<std::string> decode_body(const std::string& body);

private:
    std::string origin_;       // scheme://host[:port]
    std::string path_prefix_;  // e.g. /v1
    std::string api_key_;
    bool supports_n_;
    int timeout_seconds_;
};

}  // namespace checklist_forge
