#include "avcap/backend.hpp"

#include <chrono>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "avcap/hash.hpp"
#include "avcap/http_backend.hpp"
#include "avcap/mock_backend.hpp"

namespace avcap {

std::string_view to_string(BackendKind k) {
    switch (k) {
        case BackendKind::annotator: return "annotator";
        case BackendKind::integrator_judge: return "integrator_judge";
        case BackendKind::audit_judge: return "audit_judge";
        case BackendKind::refine_judge: return "refine_judge";
        case BackendKind::qa_solver: return "qa_solver";
        case BackendKind::grounding_solver: return "grounding_solver";
    }
    return "annotator";
}

std::optional<BackendKind> backend_kind_from_name(std::string_view name) {
    for (auto k : {BackendKind::annotator, BackendKind::integrator_judge, BackendKind::audit_judge,
                   BackendKind::refine_judge, BackendKind::qa_solver, BackendKind::grounding_solver}) {
        if (to_string(k) == name) return k;
    }
    return std::nullopt;
}

std::string cache_key(const BackendSpec& spec, const BackendCall& call) {
    std::string framed;
    auto add = [&framed](std::string_view field) {
        framed += std::to_string(field.size());
        framed += ':';
        framed += field;
    };
    add(spec.id);
    add(spec.model_name);
    add(call.prompt_text);
    framed += std::to_string(call.attachments.size());
    framed += ';';
    for (const auto& a : call.attachments) add(a);
    return sha256_hex(framed);
}

ResponseCache::ResponseCache(std::filesystem::path root) : root_(std::move(root)) {}

std::filesystem::path ResponseCache::path_for(const std::string& backend_id,
                                              const std::string& key) const {
    return root_ / backend_id / key.substr(0, 2) / (key + ".resp");
}

std::optional<std::string> ResponseCache::get(const std::string& backend_id,
                                              const std::string& key) const {
    std::ifstream in(path_for(backend_id, key), std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void ResponseCache::put(const std::string& backend_id, const std::string& key,
                        const std::string& raw_text) {
    auto path = path_for(backend_id, key);
    std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp" + std::to_string(tmp_counter_.fetch_add(1));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write cache file " + tmp.string());
        out << raw_text;
    }
    std::filesystem::rename(tmp, path);
}

BackendClient::BackendClient(std::filesystem::path cache_root, std::shared_ptr<Clock> clock)
    : cache_(std::move(cache_root)), clock_(std::move(clock)) {}

void BackendClient::register_backend(BackendSpec spec) {
    std::shared_ptr<Transport> transport;
    if (spec.endpoint.rfind("mock:", 0) == 0) {
        transport = std::make_shared<MockTransport>(spec.endpoint.substr(5));
    } else {
        transport = std::make_shared<HttpTransport>();
    }
    register_backend(std::move(spec), std::move(transport));
}

void BackendClient::register_backend(BackendSpec spec, std::shared_ptr<Transport> transport) {
    Entry entry;
    entry.transport = std::move(transport);
    entry.limiter =
        std::make_unique<SlidingWindowRateLimiter>(spec.rate_limit_per_min, clock_);
    entry.spec = std::move(spec);
    backends_.insert_or_assign(entry.spec.id, std::move(entry));
}

bool BackendClient::has_backend(const std::string& id) const { return backends_.count(id) > 0; }

const BackendSpec* BackendClient::spec(const std::string& id) const {
    auto* entry = find(id);
    return entry ? &entry->spec : nullptr;
}

BackendClient::Entry* BackendClient::find(const std::string& id) {
    auto it = backends_.find(id);
    return it == backends_.end() ? nullptr : &it->second;
}

const BackendClient::Entry* BackendClient::find(const std::string& id) const {
    auto it = backends_.find(id);
    return it == backends_.end() ? nullptr : &it->second;
}

Result<BackendResponse> BackendClient::attempt_once(Entry& entry, const BackendCall& call) {
    using R = Result<BackendResponse>;
    std::string key = cache_key(entry.spec, call);
    if (auto cached = cache_.get(entry.spec.id, key)) {
        BackendResponse response;
        response.raw_text = std::move(*cached);
        response.from_cache = true;
        response.attempts = 1;
        {
            std::lock_guard<std::mutex> lock(stats_mutex_);
            stats_.cache_hits++;
        }
        return R::ok(std::move(response));
    }

    entry.limiter->acquire();
    auto start = std::chrono::steady_clock::now();
    {
        std::lock_guard<std::mutex> lock(stats_mutex_);
        stats_.transport_sends++;
    }
    auto sent = entry.transport->send(entry.spec, call);
    if (!sent) return R::fail(sent.error().message, entry.spec.id);

    BackendResponse response;
    response.raw_text = sent.take();
    response.attempts = 1;
    response.latency_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    cache_.put(entry.spec.id, key, response.raw_text);
    return R::ok(std::move(response));
}

Result<BackendResponse> BackendClient::call(const BackendCall& call) {
    using R = Result<BackendResponse>;
    Entry* entry = find(call.backend_id);
    if (!entry) return R::fail("unknown backend id", call.backend_id);
    {
        std::lock_guard<std::mutex> lock(stats_mutex_);
        stats_.calls++;
    }

    std::string last_error;
    for (int attempt = 0; attempt <= entry->spec.max_retries; ++attempt) {
        if (attempt > 0) clock_->sleep_for(std::chrono::milliseconds(50 * attempt));
        auto result = attempt_once(*entry, call);
        if (result) {
            BackendResponse response = result.take();
            if (!response.from_cache) response.attempts = attempt + 1;
            return R::ok(std::move(response));
        }
        last_error = result.error().to_string();
    }
    return R::fail("exhausted retries after " + std::to_string(entry->spec.max_retries + 1) +
                       " attempt(s): " + last_error,
                   call.backend_id);
}

StructuredOutcome BackendClient::call_structured(const BackendCall& call,
                                                 const ResponseSchema& schema) {
    StructuredOutcome outcome;
    Entry* entry = find(call.backend_id);
    if (!entry) {
        outcome.error = "unknown backend id '" + call.backend_id + "'";
        return outcome;
    }
    {
        std::lock_guard<std::mutex> lock(stats_mutex_);
        stats_.calls++;
    }

    BackendCall attempt_call = call;
    for (int attempt = 0; attempt <= entry->spec.max_retries; ++attempt) {
        if (attempt > 0) clock_->sleep_for(std::chrono::milliseconds(50 * attempt));
        outcome.attempts = attempt + 1;
        auto result = attempt_once(*entry, attempt_call);
        if (!result) {
            // Transport failure consumes budget from the same pool.
            outcome.error = result.error().to_string();
            continue;
        }
        BackendResponse response = result.take();
        outcome.raw_attempts.push_back(response.raw_text);
        auto diagnostic = schema.check(response.raw_text);
        if (!diagnostic) {
            outcome.ok = true;
            response.attempts = attempt + 1;
            outcome.response = std::move(response);
            outcome.error.clear();
            return outcome;
        }
        outcome.error = "schema '" + schema.id + "' rejected the payload: " + *diagnostic;
        {
            std::lock_guard<std::mutex> lock(stats_mutex_);
            stats_.structured_retries++;
        }
        // Re-prompt with a correction suffix. The changed prompt gets its own
        // cache key, so the stale payload is never served for the retry.
        attempt_call.prompt_text = call.prompt_text +
                                   "\n\nYour previous reply was rejected: " + *diagnostic +
                                   "\nReturn ONLY the requested strict format. (retry " +
                                   std::to_string(attempt + 1) + ")";
    }
    outcome.ok = false;
    return outcome;
}

ClientStats BackendClient::stats() const {
    std::lock_guard<std::mutex> lock(stats_mutex_);
    return stats_;
}

}  // namespace avcap
