#include "avcap/consistency.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace avcap {

namespace {

// Opening/closing double-quote marks. Straight quotes toggle; typographic
// quotes are directional.
constexpr std::string_view kOpenTypographic = "“";
constexpr std::string_view kCloseTypographic = "”";

size_t count_tokens(std::string_view s) {
    size_t count = 0;
    bool in_token = false;
    for (char c : s) {
        bool space = (c == ' ' || c == '\n' || c == '\t');
        if (!space && !in_token) ++count;
        in_token = !space;
    }
    return count;
}

std::string clean_for_match(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool last_space = true;
    for (size_t i = 0; i < s.size();) {
        unsigned char c = s[i];
        if (c < 0x80) {
            if (std::isalnum(c)) {
                out += char(std::tolower(c));
                last_space = false;
            } else if (!last_space) {
                out += ' ';
                last_space = true;
            }
            ++i;
        } else {
            // Multi-byte sequences (typographic punctuation etc.) are treated
            // as separators; ASR noise rarely carries meaning there.
            if (!last_space) {
                out += ' ';
                last_space = true;
            }
            ++i;
            while (i < s.size() && (static_cast<unsigned char>(s[i]) & 0xC0) == 0x80) ++i;
        }
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

size_t levenshtein(std::string_view a, std::string_view b) {
    if (a.size() > b.size()) std::swap(a, b);
    std::vector<size_t> row(a.size() + 1);
    for (size_t i = 0; i <= a.size(); ++i) row[i] = i;
    for (size_t j = 1; j <= b.size(); ++j) {
        size_t prev = row[0];
        row[0] = j;
        for (size_t i = 1; i <= a.size(); ++i) {
            size_t cur = row[i];
            size_t cost = (a[i - 1] == b[j - 1]) ? 0 : 1;
            row[i] = std::min({row[i] + 1, row[i - 1] + 1, prev + cost});
            prev = cur;
        }
    }
    return row[a.size()];
}

}  // namespace

double edit_similarity(std::string_view a, std::string_view b) {
    std::string ca = clean_for_match(a);
    std::string cb = clean_for_match(b);
    size_t longest = std::max(ca.size(), cb.size());
    if (longest == 0) return 1.0;
    return 1.0 - double(levenshtein(ca, cb)) / double(longest);
}

QuoteExtraction extract_quotes(std::string_view text) {
    QuoteExtraction out;
    bool open = false;
    bool open_typographic = false;
    size_t content_start = 0;
    size_t open_mark_pos = 0;

    size_t i = 0;
    while (i < text.size()) {
        bool is_straight = text[i] == '"';
        bool is_open_typo = text.substr(i).starts_with(kOpenTypographic);
        bool is_close_typo = text.substr(i).starts_with(kCloseTypographic);
        size_t mark_len = is_straight ? 1 : (is_open_typo || is_close_typo ? 3 : 0);
        if (mark_len == 0) {
            ++i;
            continue;
        }
        if (!open) {
            if (is_straight || is_open_typo) {
                open = true;
                open_typographic = is_open_typo;
                open_mark_pos = i;
                content_start = i + mark_len;
            } else {
                out.findings.push_back("closing quote without an opener at byte " +
                                       std::to_string(i));
            }
        } else {
            bool closes = open_typographic ? is_close_typo : is_straight;
            if (closes) {
                QuoteSpan span{content_start, i, std::string(text.substr(content_start, i - content_start))};
                if (count_tokens(span.text) >= 2) out.quotes.push_back(std::move(span));
                open = false;
            }
            // A second opener inside a straight-quote span is its closer by
            // the toggle rule, handled above; a typographic opener inside a
            // typographic span is nested content and stays in the span.
        }
        i += mark_len;
    }
    if (open) {
        out.findings.push_back("unbalanced quote opened at byte " + std::to_string(open_mark_pos));
    }
    return out;
}

AlignmentReport align_quotes(const Caption& caption, const AsrTranscript& asr,
                             const ConsistencyPolicy& policy) {
    AlignmentReport report;
    auto extraction = extract_quotes(caption.text);
    for (const auto& quote : extraction.quotes) {
        QuoteAlignment qa;
        qa.quote = quote;

        double best = -1.0;
        size_t best_index = 0;
        for (size_t u = 0; u < asr.utterances.size(); ++u) {
            double sim = edit_similarity(quote.text, asr.utterances[u].text);
            if (sim > best) {  // strict '>' keeps the earliest on ties
                best = sim;
                best_index = u;
            }
        }
        qa.similarity = std::max(best, 0.0);

        // Nearest anchor strictly before the quote content.
        const Anchor* nearest = nullptr;
        for (const auto& a : caption.anchors) {
            if (a.end <= quote.start) nearest = &a;
        }
        if (nearest) qa.anchor_near_s = nearest->t_s();

        if (best >= policy.min_sim && !asr.utterances.empty()) {
            qa.matched_utterance = best_index;
            if (nearest) {
                qa.time_delta_s = std::abs(nearest->t_s() - asr.utterances[best_index].start_s);
            }
        } else {
            report.unmatched_count++;
        }
        report.quotes.push_back(std::move(qa));
    }
    return report;
}

std::vector<FormatViolation> check_temporal(const Caption& caption, double duration_s,
                                            const AsrTranscript& asr,
                                            const ConsistencyPolicy& policy) {
    std::vector<FormatViolation> out;
    for (const auto& a : caption.anchors) {
        if (a.t_s() > duration_s + policy.ts_tolerance_s) {
            out.push_back({ViolationKind::exceeds_duration, a.start, a.end,
                           "anchor t=" + a.lexeme + "s exceeds the video duration of " +
                               std::to_string(duration_s) + "s",
                           false});
        }
    }
    auto report = align_quotes(caption, asr, policy);
    for (const auto& qa : report.quotes) {
        if (qa.matched_utterance && qa.time_delta_s && *qa.time_delta_s > policy.speech_delta_s) {
            out.push_back({ViolationKind::speech_time_mismatch, qa.quote.start, qa.quote.end,
                           "quoted speech is anchored " + std::to_string(*qa.time_delta_s) +
                               "s away from its transcript utterance",
                           false});
        }
    }
    return out;
}

}  // namespace avcap
