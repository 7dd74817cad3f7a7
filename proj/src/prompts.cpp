#include "avcap/prompts.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "avcap/grammar.hpp"
#include "avcap/hash.hpp"

namespace avcap {

namespace {

constexpr std::array<std::string_view, kPromptCount> kPromptNames = {
    "subtitle_caption", "merge", "verify_complete", "audit",
    "refine",           "qa_judge", "grounding_judge", "decompose",
};

constexpr std::string_view kSubtitleCaption =
    R"(You are a video captioning assistant.

You will be given a video clip's spoken-dialogue transcript tagged with speaker names and time ranges, together with the clip duration.

Task: Write ONE comprehensive paragraph that seamlessly integrates Scene, Characters, Objects, Actions, Narrative (with multiple in-sentence timestamps in chronological order), Speech (as direct quotes), Camera, and Emotions.

Rules:
(1) Use ONLY information supported by the clip/transcript.
(2) Include key moments with explicit timestamps (in seconds) embedded directly in sentences; reflect scene transitions, turning points, and pacing.
(3) Do NOT mention subtitles, on-screen text, or any flashing/overlay elements.
(4) Do NOT use speaker IDs; indicate speakers naturally with dialogue tags (e.g., "she says").
(5) No lists, brackets/parentheses, or bullet-like formatting; output a single flowing paragraph with rich detail.

Video duration: {duration_s} seconds.
Transcript:
{asr}

Output: one-paragraph timestamped detailed caption.
)";

constexpr std::string_view kMerge =
    R"(You are a video narrative integrator. You will be given several textual descriptions of the same video from different sources.

Task: Merge them into ONE seamless English paragraph that preserves all specific details, maintains chronological order, and synchronizes visual events with corresponding audio/dialogue.

Timestamp rule: Include only key moments using single integer-second anchors in the form "At Xs" (no ranges, decimals, parentheses, or duplicate timestamps), spaced naturally across the narrative.

Constraints: Do not mention source names or generation process; do not invent information; keep transcript dialogue verbatim; output a single paragraph (no lists or brackets).

Video duration: {duration_s} seconds.
Transcript:
{asr}

Inputs:
{candidates}

Output: one-paragraph merged narrative.
)";

constexpr std::string_view kVerifyComplete =
    R"(You are a video caption verification and completion assistant.

Inputs: (1) CURRENT_CAPTION, and (2) SOURCES (speech transcript + multi-source captions).

Task: (i) identify important missing content, separating purely visual deficiencies from speech deficiencies (speech only from the transcript), and (ii) produce a one-time completed caption by supplementing only supported missing details.

Constraints: no fabrication; ignore trivial details; keep timestamps as integer seconds and follow the timestamp style of CURRENT_CAPTION; output valid JSON with exactly three keys: "non_speech_deficiency_specific", "speech_deficiency_specific", "caption".

CURRENT_CAPTION: {current_caption}

SOURCES:
Transcript:
{asr}
Captions:
{candidates}
)";

constexpr std::string_view kAudit =
    R"(You are a caption auditor. You are given an optional speech transcript (truth source for speech meaning only) and a caption to audit.

Audit dimension: {attribute}

VERIFY list for this dimension:
{verify_list}

Task: Report shortcomings only (errors, missing, expressiveness), and audit ONLY the items explicitly listed in the VERIFY list above; do not evaluate anything outside the VERIFY scope.

Evidence rule: output an error only when a contradiction is clear and verifiable. Missing is reported only for clearly present, important items under VERIFY.

Output: Return strict JSON only, no markdown and no explanations, with exactly the keys "errors", "missing", "expressiveness". Each errors item is an object with keys "snippet" (verbatim caption text) and "why". Each missing item is an object with keys "what" and "why". Expressiveness is a list of short strings.

Transcript (optional):
{asr}

Caption to audit:
{caption}
)";

constexpr std::string_view kRefine =
    R"(You are a caption refiner. You are given a caption and its audit report.

Task: Produce an improved caption by (i) fixing factual errors, (ii) filling important missing items, and (iii) doing minimal language-only polishing for clarity.

Constraints: Use the audit report as the only edit specification; do not add new content beyond it. Keep the original timestamp blocks and their order unchanged. Timestamps must follow "At Xs," (X is integer or one-decimal), with no ranges. If an edit forces any timestamp change, list every change under "timestamp_adjustments".

Output: Return strict JSON only with exactly the keys "improved_caption" and "enhance_summary". "enhance_summary" is an object with exactly the keys "fixed_errors", "filled_missing", "dropped_forbidden", "timestamp_adjustments", each a list of short strings.

Caption:
{caption}

Audit report:
{audit_report}
)";

constexpr std::string_view kQaJudge =
    R"(You are a precise QA assistant. Your task is to answer multiple-choice questions based ONLY on the video caption provided.

Do not use any outside knowledge or assumptions; your answer must strictly reflect information from the caption.
Always output only the capital letter corresponding to your choice (e.g., A, B, C, D).
If the caption does not provide enough information to answer the question, output "N/A" instead.

Here is the video caption: {caption}

Question: {question}

Choices: {choices}
)";

constexpr std::string_view kGroundingJudge =
    R"(You are a temporal grounding assistant.

You will be given:
(1) a long video caption with multiple timestamp anchors like "At 0s, ... At 5s, ...",
(2) an event description (a sentence).

Goal:
Infer the most likely continuous time interval (start and end in seconds) when the event happens, using ONLY the caption.

Rules:
1) Always try to output a time interval, even if the evidence is partial. Use best-effort inference.
2) Prefer intervals aligned to existing anchors. If the event is mentioned near "At Ts", choose a range that covers that anchor and the most plausible neighboring anchors.
3) If the event is implied by related actions/objects (synonyms/paraphrases), still infer the interval by matching the closest described segment.
4) Output "N/A" ONLY if the caption provides absolutely no usable clue to localize the event (no matching action/object/context anywhere).

Answer format: strict JSON with two keys, "start" and "end", both in seconds, e.g. {"start": 4, "end": 9}; or the literal string "N/A".

Here is the video caption: {caption}

Event: {query}
)";

constexpr std::string_view kDecompose =
    R"(You are a caption decomposition assistant. You are given a complete timestamped video caption.

Task: Extract the content describing ONLY the dimension below, quoting the caption's own wording verbatim wherever possible and keeping its timestamp anchors unchanged.

Dimension: {attribute}

Constraints: do not add information that is not in the caption; do not rephrase beyond what removing other dimensions requires; output a single flowing paragraph. If the caption has no content for this dimension, output an empty string.

Caption:
{caption}
)";

constexpr std::array<std::string_view, kPromptCount> kBuiltinBodies = {
    kSubtitleCaption, kMerge, kVerifyComplete, kAudit, kRefine, kQaJudge, kGroundingJudge, kDecompose,
};

bool is_ident_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}

bool is_ident_start(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}

}  // namespace

std::string_view prompt_id_name(PromptId id) { return kPromptNames[size_t(id)]; }

std::optional<PromptId> prompt_id_from_name(std::string_view name) {
    for (size_t i = 0; i < kPromptCount; ++i) {
        if (kPromptNames[i] == name) return PromptId(i);
    }
    return std::nullopt;
}

std::vector<std::string> template_placeholders(std::string_view body) {
    std::vector<std::string> out;
    for (size_t i = 0; i < body.size(); ++i) {
        if (body[i] != '{') continue;
        size_t j = i + 1;
        if (j >= body.size() || !is_ident_start(body[j])) continue;
        while (j < body.size() && is_ident_char(body[j])) ++j;
        if (j < body.size() && body[j] == '}') {
            std::string name(body.substr(i + 1, j - i - 1));
            if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(name);
            i = j;
        }
    }
    return out;
}

TemplateSet TemplateSet::builtin() {
    TemplateSet set;
    for (size_t i = 0; i < kPromptCount; ++i) set.bodies_[i] = std::string(kBuiltinBodies[i]);
    return set;
}

TemplateSet TemplateSet::load(const std::filesystem::path& dir) {
    TemplateSet set;
    for (size_t i = 0; i < kPromptCount; ++i) {
        auto path = dir / (std::string(kPromptNames[i]) + ".txt");
        std::ifstream in(path, std::ios::binary);
        if (!in) throw std::runtime_error("missing template asset " + path.string());
        std::ostringstream buf;
        buf << in.rdbuf();
        set.bodies_[i] = buf.str();
    }
    return set;
}

void write_default_templates(const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (size_t i = 0; i < kPromptCount; ++i) {
        auto path = dir / (std::string(kPromptNames[i]) + ".txt");
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out << kBuiltinBodies[i];
    }
}

std::string TemplateSet::checksum(PromptId id) const { return sha256_hex(bodies_[size_t(id)]); }

Result<std::string> TemplateSet::render(PromptId id, const Bindings& bindings) const {
    using R = Result<std::string>;
    const std::string& body = bodies_[size_t(id)];
    std::string out;
    out.reserve(body.size());
    for (size_t i = 0; i < body.size(); ++i) {
        if (body[i] == '{') {
            size_t j = i + 1;
            if (j < body.size() && is_ident_start(body[j])) {
                while (j < body.size() && is_ident_char(body[j])) ++j;
                if (j < body.size() && body[j] == '}') {
                    std::string name(body.substr(i + 1, j - i - 1));
                    auto it = bindings.find(name);
                    if (it == bindings.end())
                        return R::fail("missing placeholder binding '" + name + "'",
                                       std::string(prompt_id_name(id)));
                    out += it->second;
                    i = j;
                    continue;
                }
            }
        }
        out += body[i];
    }
    return R::ok(std::move(out));
}

std::string serialize_asr(const AsrTranscript& asr) {
    std::string out;
    for (const auto& u : asr.utterances) {
        int64_t start_tenths = int64_t(u.start_s * 10.0 + 0.5);
        int64_t end_tenths = int64_t(u.end_s * 10.0 + 0.5);
        out += u.speaker + " (" + canonical_time_lexeme(start_tenths) + "–" +
               canonical_time_lexeme(end_tenths) + " s): " + u.text + "\n";
    }
    if (out.empty()) out = "(no speech)\n";
    return out;
}

std::string serialize_candidates(const std::vector<CandidateCaption>& candidates) {
    std::string out;
    for (size_t i = 0; i < candidates.size(); ++i) {
        out += "Description " + std::to_string(i + 1) + ": " + candidates[i].text + "\n";
    }
    return out;
}

std::string serialize_verify_list(const std::vector<std::string>& rules) {
    std::string out;
    for (const auto& r : rules) out += "- " + r + "\n";
    return out;
}

std::string serialize_audit_reports(const std::map<Attribute, AuditReport>& reports) {
    std::string out;
    for (const auto& [attr, report] : reports) {
        if (report.clean() && report.expressiveness.empty()) continue;
        out += std::string(attribute_name(attr)) + ":\n";
        for (const auto& e : report.errors)
            out += "  error: \"" + e.snippet + "\" (" + e.why + ")\n";
        for (const auto& m : report.missing)
            out += "  missing: " + m.snippet + " (" + m.why + ")\n";
        for (const auto& x : report.expressiveness) out += "  expressiveness: " + x + "\n";
    }
    if (out.empty()) out = "(no findings)\n";
    return out;
}

}  // namespace avcap
