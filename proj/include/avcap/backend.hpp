#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "avcap/clock.hpp"
#include "avcap/rate_limiter.hpp"
#include "avcap/result.hpp"
#include "avcap/schemas.hpp"

namespace avcap {

enum class BackendKind : uint8_t {
    annotator,
    integrator_judge,
    audit_judge,
    refine_judge,
    qa_solver,
    grounding_solver,
};

std::string_view to_string(BackendKind);
std::optional<BackendKind> backend_kind_from_name(std::string_view);

struct BackendSpec {
    std::string id;
    BackendKind kind = BackendKind::annotator;
    std::string endpoint;  // URL, or "mock:<script-path>"
    std::string model_name;
    int max_retries = 2;       // shared budget for transport and parse retries
    double timeout_s = 30.0;
    int rate_limit_per_min = 600;
};

struct BackendCall {
    std::string backend_id;
    std::string prompt_text;
    std::vector<std::string> attachments;  // opaque media locators, hashed as strings
};

// Pure function of (backend_id, model_name, prompt_text, attachments); fields
// are length-framed so distinct tuples never collide.
std::string cache_key(const BackendSpec& spec, const BackendCall& call);

struct BackendResponse {
    std::string raw_text;
    int attempts = 1;  // transport sends consumed, <= max_retries + 1
    bool from_cache = false;
    double latency_s = 0;
};

// One raw exchange with whatever is behind the endpoint.
class Transport {
public:
    virtual ~Transport() = default;
    virtual Result<std::string> send(const BackendSpec& spec, const BackendCall& call) = 0;
};

// Content-addressed response cache, one file per key, never evicted:
// <cache_root>/<backend_id>/<key[0..2]>/<key>.resp
class ResponseCache {
public:
    explicit ResponseCache(std::filesystem::path root);
    std::optional<std::string> get(const std::string& backend_id, const std::string& key) const;
    void put(const std::string& backend_id, const std::string& key, const std::string& raw_text);

private:
    std::filesystem::path path_for(const std::string& backend_id, const std::string& key) const;
    std::filesystem::path root_;
    std::atomic<uint64_t> tmp_counter_{0};  // unique temp names for atomic renames
};

struct StructuredOutcome {
    bool ok = false;
    BackendResponse response;               // valid payload when ok
    int attempts = 0;                       // payloads consumed (valid + invalid)
    std::vector<std::string> raw_attempts;  // every raw text, retained for audit
    std::string error;                      // set when !ok
};

struct ClientStats {
    uint64_t calls = 0;
    uint64_t transport_sends = 0;
    uint64_t cache_hits = 0;
    uint64_t structured_retries = 0;
};

// Uniform client over all configured backends: caching, rate limiting,
// shared-budget retries, and schema-checked structured calls.
class BackendClient {
public:
    BackendClient(std::filesystem::path cache_root, std::shared_ptr<Clock> clock);

    void register_backend(BackendSpec spec);  // transport chosen from the endpoint
    void register_backend(BackendSpec spec, std::shared_ptr<Transport> transport);
    bool has_backend(const std::string& id) const;
    const BackendSpec* spec(const std::string& id) const;

    // Cache hit returns immediately with from_cache = true; otherwise sends
    // under the rate limit, retrying transport failures, then caches.
    Result<BackendResponse> call(const BackendCall& call);

    // Runs `call`, checks the payload against the schema, and re-prompts with
    // a correction instruction on invalid payloads. Parse retries and
    // transport retries share one max_retries budget.
    StructuredOutcome call_structured(const BackendCall& call, const ResponseSchema& schema);

    ClientStats stats() const;

private:
    struct Entry {
        BackendSpec spec;
        std::shared_ptr<Transport> transport;
        std::unique_ptr<SlidingWindowRateLimiter> limiter;
    };

    // One cache-or-send step; does not retry.
    Result<BackendResponse> attempt_once(Entry& entry, const BackendCall& call);

    Entry* find(const std::string& id);
    const Entry* find(const std::string& id) const;

    ResponseCache cache_;
    std::shared_ptr<Clock> clock_;
    std::map<std::string, Entry> backends_;
    mutable std::mutex stats_mutex_;
    ClientStats stats_;
};

}  // namespace avcap
