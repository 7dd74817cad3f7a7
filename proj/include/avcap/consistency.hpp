#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "avcap/grammar.hpp"
#include "avcap/record.hpp"

namespace avcap {

struct ConsistencyPolicy {
    double min_sim = 0.9;        // similarity threshold for a quote/utterance match
    double speech_delta_s = 5.0; // max |anchor - utterance start| before flagging
    double ts_tolerance_s = 2.0; // anchor overshoot allowed past the duration
};

struct QuoteSpan {
    size_t start = 0;  // byte span of the quote content, excluding the quote marks
    size_t end = 0;
    std::string text;

    bool operator==(const QuoteSpan&) const = default;
};

struct QuoteExtraction {
    std::vector<QuoteSpan> quotes;
    std::vector<std::string> findings;  // unbalanced-quote diagnostics
};

// Spans enclosed in double quotes (straight or typographic), excluding spans
// shorter than two tokens. Unbalanced quotes yield a finding and the balanced
// subset.
QuoteExtraction extract_quotes(std::string_view caption_text);

struct QuoteAlignment {
    QuoteSpan quote;
    std::optional<size_t> matched_utterance;  // index into the transcript
    double similarity = 0;                    // best similarity over utterances
    std::optional<double> anchor_near_s;      // nearest anchor preceding the quote
    std::optional<double> time_delta_s;       // |anchor - utterance start| when matched
};

struct AlignmentReport {
    std::vector<QuoteAlignment> quotes;
    size_t unmatched_count = 0;
};

// Character-level edit similarity after lowercasing, punctuation stripping,
// and whitespace collapsing: 1 - dist/max(len). Two empty strings compare 1.
double edit_similarity(std::string_view a, std::string_view b);

// Matches each quoted span against the utterance maximizing edit similarity;
// ties break to the earliest utterance.
AlignmentReport align_quotes(const Caption& caption, const AsrTranscript& asr,
                             const ConsistencyPolicy& policy);

// Deterministic temporal findings: anchors past duration + tolerance, and
// matched quotes whose nearest preceding anchor is far from the utterance.
std::vector<FormatViolation> check_temporal(const Caption& caption, double duration_s,
                                            const AsrTranscript& asr,
                                            const ConsistencyPolicy& policy);

}  // namespace avcap
