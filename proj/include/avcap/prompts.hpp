#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "avcap/attributes.hpp"
#include "avcap/record.hpp"
#include "avcap/result.hpp"

namespace avcap {

enum class PromptId : uint8_t {
    subtitle_caption = 0,
    merge,
    verify_complete,
    audit,
    refine,
    qa_judge,
    grounding_judge,
    decompose,
};

inline constexpr size_t kPromptCount = 8;

std::string_view prompt_id_name(PromptId id);
std::optional<PromptId> prompt_id_from_name(std::string_view name);

// Placeholders use `{identifier}` syntax. Literal braces that are not
// identifiers (e.g. JSON examples) pass through untouched.
std::vector<std::string> template_placeholders(std::string_view body);

using Bindings = std::map<std::string, std::string>;

// Prompt templates are data: external UTF-8 text assets, one file per id,
// with their checksums pinned in the pipeline config.
class TemplateSet {
public:
    // Loads `<dir>/<id>.txt` for every id. Throws on missing files.
    static TemplateSet load(const std::filesystem::path& dir);
    // The embedded defaults, identical to the shipped asset files.
    static TemplateSet builtin();

    // Deterministic substitution. Fails if any placeholder in the template
    // body is unbound (the error names it).
    Result<std::string> render(PromptId id, const Bindings& bindings) const;

    const std::string& body(PromptId id) const { return bodies_[size_t(id)]; }
    std::string checksum(PromptId id) const;  // sha256 of the body bytes

private:
    std::array<std::string, kPromptCount> bodies_;
};

// Writes the embedded default templates into `dir` (one .txt per id).
void write_default_templates(const std::filesystem::path& dir);

// Fixed serializations used by every caller so rendering stays deterministic:
// one "speaker (start–end s): text" line per utterance.
std::string serialize_asr(const AsrTranscript& asr);
// "Description k: text" blocks in the given (source) order.
std::string serialize_candidates(const std::vector<CandidateCaption>& candidates);
// The VERIFY list as "- item" lines.
std::string serialize_verify_list(const std::vector<std::string>& rules);
// Audit report rendered for the refine prompt.
std::string serialize_audit_reports(const std::map<Attribute, AuditReport>& reports);

}  // namespace avcap
