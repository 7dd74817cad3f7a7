#include "avcap/mock_backend.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace avcap {

using nlohmann::json;

MockTransport::MockTransport(std::filesystem::path script_path) {
    std::ifstream in(script_path, std::ios::binary);
    if (!in) throw std::runtime_error("mock script not found: " + script_path.string());
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object())
            throw std::runtime_error("bad mock script line " + std::to_string(line_no) + " in " +
                                     script_path.string());
        MockScriptEntry entry;
        if (j.contains("match")) entry.match_all.push_back(j["match"].get<std::string>());
        for (const auto& m : j.value("match_all", json::array()))
            entry.match_all.push_back(m.get<std::string>());
        entry.response = j.value("response", "");
        entry.fail = j.value("fail", "");
        entry.times = j.value("times", -1);
        if (entry.response.empty() && entry.fail.empty())
            throw std::runtime_error("mock script line " + std::to_string(line_no) +
                                     " needs 'response' or 'fail'");
        entries_.push_back(std::move(entry));
    }
}

MockTransport::MockTransport(std::vector<MockScriptEntry> entries) : entries_(std::move(entries)) {}

Result<std::string> MockTransport::send(const BackendSpec&, const BackendCall& call) {
    using R = Result<std::string>;
    std::lock_guard<std::mutex> lock(mutex_);
    ++sends_;
    for (auto& entry : entries_) {
        if (entry.times == 0) continue;
        bool matches = true;
        for (const auto& needle : entry.match_all) {
            if (call.prompt_text.find(needle) == std::string::npos) {
                matches = false;
                break;
            }
        }
        if (!matches) continue;
        if (entry.times > 0) --entry.times;
        if (!entry.fail.empty()) return R::fail("scripted transport failure: " + entry.fail);
        return R::ok(entry.response);
    }
    return R::fail("mock script has no matching stimulus for this prompt");
}

size_t MockTransport::sends() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return sends_;
}

void write_mock_script(const std::filesystem::path& path,
                       const std::vector<MockScriptEntry>& entries) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    for (const auto& entry : entries) {
        json j;
        j["match_all"] = entry.match_all;
        if (!entry.response.empty()) j["response"] = entry.response;
        if (!entry.fail.empty()) j["fail"] = entry.fail;
        if (entry.times >= 0) j["times"] = entry.times;
        out << j.dump() << "\n";
    }
}

}  // namespace avcap
