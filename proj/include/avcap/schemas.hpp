#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "avcap/metrics.hpp"
#include "avcap/record.hpp"
#include "avcap/result.hpp"

namespace avcap {

// Stage-2 verification / one-pass completion payload: exactly these three keys.
struct VerificationReport {
    std::vector<std::string> non_speech_deficiency_specific;
    std::vector<std::string> speech_deficiency_specific;
    std::string caption;
};

struct RefineSummary {
    std::vector<std::string> fixed_errors;
    std::vector<std::string> filled_missing;
    std::vector<std::string> dropped_forbidden;
    std::vector<std::string> timestamp_adjustments;
};

struct RefineOutput {
    std::string improved_caption;
    RefineSummary enhance_summary;
};

// Strict parsers: unknown fields are rejected, field types enforced, and the
// diagnostic names the first offending path. A single surrounding markdown
// code fence is tolerated; everything else must be the bare JSON document.
Result<VerificationReport> parse_verification(const std::string& raw);
Result<AuditReport> parse_audit(const std::string& raw, const std::string& caption_text);
Result<RefineOutput> parse_refine(const std::string& raw);

// Anchor-structure invariant: with no declared timestamp_adjustments the
// improved caption must keep the input caption's anchor signature.
std::optional<std::string> check_refine_invariants(const RefineOutput& output,
                                                   const std::string& input_caption);

// QA answer: a single capital letter (possibly wrapped in whitespace or
// punctuation), or the literal "N/A". `letter == nullopt` means not
// answerable; anything else fails the parse.
struct QaAnswer {
    std::optional<char> letter;
};
Result<QaAnswer> parse_qa_answer(const std::string& raw);

// Grounding answer: {"start": s, "end": e} (the mandated solver format), a
// best-effort "first two nonnegative numbers" fallback for foreign solvers,
// or "N/A".
struct GroundingAnswer {
    std::optional<Interval> interval;
};
Result<GroundingAnswer> parse_grounding_answer(const std::string& raw);

// A named response contract for structured backend calls: check returns a
// diagnostic for invalid payloads, nullopt when the payload is acceptable.
struct ResponseSchema {
    std::string id;
    std::function<std::optional<std::string>(const std::string& raw)> check;
};

ResponseSchema verification_schema();
ResponseSchema audit_schema(std::string caption_text);
ResponseSchema refine_schema(std::string input_caption);
// Decomposed captions must quote the final caption: every sentence of the
// payload has to occur in it (after whitespace normalization).
ResponseSchema decompose_schema(std::string final_caption);

}  // namespace avcap
