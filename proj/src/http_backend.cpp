#include "avcap/http_backend.hpp"

#include <cctype>
#include <cstdlib>

#include <httplib.h>
#include <json.hpp>

namespace avcap {

using nlohmann::json;

std::string api_key_env_var(const std::string& backend_id) {
    std::string var;
    for (char c : backend_id) {
        if (c == '-' || c == '.') {
            var += '_';
        } else {
            var += char(std::toupper((unsigned char)c));
        }
    }
    return var + "_API_KEY";
}

Result<std::string> HttpTransport::send(const BackendSpec& spec, const BackendCall& call) {
    using R = Result<std::string>;

    // Split "<scheme>://<host>[:port]<path>".
    auto scheme_end = spec.endpoint.find("://");
    if (scheme_end == std::string::npos)
        return R::fail("endpoint must be a URL or mock:<script>", spec.endpoint);
    auto path_start = spec.endpoint.find('/', scheme_end + 3);
    std::string origin =
        (path_start == std::string::npos) ? spec.endpoint : spec.endpoint.substr(0, path_start);
    std::string path = (path_start == std::string::npos) ? "/" : spec.endpoint.substr(path_start);

    httplib::Client client(origin);
    client.set_connection_timeout(int(spec.timeout_s), 0);
    client.set_read_timeout(int(spec.timeout_s), 0);

    httplib::Headers headers;
    if (const char* key = std::getenv(api_key_env_var(spec.id).c_str())) {
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    json body{{"model", spec.model_name}, {"prompt", call.prompt_text}};
    if (!call.attachments.empty()) body["attachments"] = call.attachments;

    auto res = client.Post(path, headers, body.dump(), "application/json");
    if (!res) return R::fail("transport error: " + httplib::to_string(res.error()), spec.id);
    if (res->status < 200 || res->status >= 300)
        return R::fail("HTTP " + std::to_string(res->status) + ": " + res->body, spec.id);

    // Either {"text": "..."} or a raw text body.
    json j = json::parse(res->body, nullptr, false);
    if (!j.is_discarded() && j.is_object() && j.contains("text") && j["text"].is_string())
        return R::ok(j["text"].get<std::string>());
    return R::ok(res->body);
}

}  // namespace avcap
