#pragma once

#include <filesystem>
#include <mutex>
#include <string>
#include <vector>

#include "avcap/backend.hpp"

namespace avcap {

// One scripted stimulus/response pair. Matching is by substring(s) of the
// prompt text; entries are tried in order, each consumable a limited number
// of times (-1 = unlimited).
struct MockScriptEntry {
    std::vector<std::string> match_all;  // every substring must occur
    std::string response;
    std::string fail;       // nonempty = simulate a transport failure
    int times = -1;
};

// Deterministic scripted backend for tests and offline runs. The script is a
// JSONL file: {"match": "..."} or {"match_all": [...]}, plus "response" or
// "fail", and an optional "times".
class MockTransport final : public Transport {
public:
    explicit MockTransport(std::filesystem::path script_path);
    explicit MockTransport(std::vector<MockScriptEntry> entries);

    Result<std::string> send(const BackendSpec& spec, const BackendCall& call) override;

    size_t sends() const;

private:
    std::vector<MockScriptEntry> entries_;
    mutable std::mutex mutex_;
    size_t sends_ = 0;
};

// Writes entries to a JSONL script file (test helper).
void write_mock_script(const std::filesystem::path& path, const std::vector<MockScriptEntry>& entries);

}  // namespace avcap
