#pragma once

#include "avcap/backend.hpp"

namespace avcap {

// HTTP adapter for real model services: POST with a bearer token taken from
// the environment variable <BACKEND_ID>_API_KEY (id uppercased). The wire
// shape is isolated here; nothing else in the pipeline sees HTTP.
class HttpTransport final : public Transport {
public:
    Result<std::string> send(const BackendSpec& spec, const BackendCall& call) override;
};

// "<ID>_API_KEY" with the id uppercased and '-' mapped to '_'.
std::string api_key_env_var(const std::string& backend_id);

}  // namespace avcap
