#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace avcap {

// One in-text timestamp anchor of the form "At Xs", where X is an integer
// or a one-decimal number. Times are kept in tenths of a second so equality
// and rounding stay exact.
struct Anchor {
    int64_t t_tenths = 0;
    bool decimal_written = false;  // true when the lexeme carries a decimal digit ("2.0", "3.5")
    size_t start = 0;              // byte span of the whole "At Xs" substring, [start, end)
    size_t end = 0;
    std::string lexeme;            // the number exactly as written

    double t_s() const { return double(t_tenths) / 10.0; }
    bool operator==(const Anchor&) const = default;
};

enum class ViolationKind : uint8_t {
    malformed_timestamp,
    timestamp_range,
    parenthesized_timestamp,
    duplicate_anchor,
    non_monotonic_anchor,
    repetition_collapse,
    non_compliant_symbol,
    exceeds_duration,
    speech_time_mismatch,  // emitted by the consistency checks, never by validate_caption
};

std::string_view violation_kind_name(ViolationKind k);

struct FormatViolation {
    ViolationKind kind;
    size_t start = 0;  // byte span of the offending text, [start, end)
    size_t end = 0;
    std::string detail;
    bool fixable = false;
};

struct FormatPolicy {
    // Repetition-collapse detector: an exact token n-gram repeated at least
    // min_repeats times consecutively.
    int ngram = 6;
    int min_repeats = 3;
    // Codepoints allowed beyond printable ASCII, newline, and tab.
    std::string allowed_extra = "“”‘’–—";
    // Anchors may overshoot the video duration by this much before they are flagged.
    double ts_tolerance_s = 2.0;
    // What replaces a stripped non-compliant symbol; empty deletes it.
    std::string replacement;
};

// Returns every substring matching the anchor grammar, in textual order.
// Near-misses ("At 5-7s", "At 5.25s") are not anchors; validate_caption
// reports those.
std::vector<Anchor> parse_anchors(std::string_view text);

// All format pathologies in one deterministic pass. Spans are byte ranges
// into `text`; `fixable` marks the kinds normalize_caption repairs.
std::vector<FormatViolation> validate_caption(std::string_view text, double duration_s,
                                              const FormatPolicy& policy);

struct NormalizeResult {
    std::string text;
    std::vector<FormatViolation> unfixed;  // violations that remain in `text`
};

// Applies the fixable repairs to a fixed point: strips non-compliant symbols,
// canonicalizes timestamps (round-half-up to one decimal, "5.0" -> "5"),
// drops later duplicates of an equal-time anchor, and collapses repetition
// runs to one instance. Idempotent.
NormalizeResult normalize_caption(std::string_view text, double duration_s,
                                  const FormatPolicy& policy);

// The ordered anchor-time lexemes, used to assert that refinement preserved
// the timestamp structure. Written form matters: "2" and "2.0" differ until
// normalize_caption canonicalizes them.
std::vector<std::string> anchor_signature(std::string_view text);

// Canonical written form for a tenths-of-second time: no trailing ".0".
std::string canonical_time_lexeme(int64_t tenths);

}  // namespace avcap
