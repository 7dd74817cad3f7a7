#include "avcap/grammar.hpp"

#include <algorithm>
#include <cassert>
#include <set>
#include <unordered_set>

namespace avcap {

namespace {

bool is_ascii_alnum(unsigned char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

bool is_digit(unsigned char c) { return c >= '0' && c <= '9'; }

// Decodes one UTF-8 codepoint at `pos`; returns its byte length (1 for an
// invalid lead byte, which callers treat as a non-compliant symbol).
struct Utf8Char {
    uint32_t cp;
    size_t len;
    bool valid;
};

Utf8Char decode_utf8(std::string_view text, size_t pos) {
    unsigned char b0 = text[pos];
    if (b0 < 0x80) return {b0, 1, true};
    size_t len = 0;
    uint32_t cp = 0;
    if ((b0 & 0xE0) == 0xC0) {
        len = 2;
        cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
        len = 3;
        cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
        len = 4;
        cp = b0 & 0x07;
    } else {
        return {0xFFFD, 1, false};
    }
    if (pos + len > text.size()) return {0xFFFD, 1, false};
    for (size_t i = 1; i < len; ++i) {
        unsigned char b = text[pos + i];
        if ((b & 0xC0) != 0x80) return {0xFFFD, 1, false};
        cp = (cp << 6) | (b & 0x3F);
    }
    return {cp, len, true};
}

std::set<uint32_t> decode_codepoint_set(std::string_view s) {
    std::set<uint32_t> out;
    size_t i = 0;
    while (i < s.size()) {
        auto c = decode_utf8(s, i);
        if (c.valid) out.insert(c.cp);
        i += c.len;
    }
    return out;
}

bool is_dash_at(std::string_view text, size_t pos, size_t* len) {
    if (pos >= text.size()) return false;
    if (text[pos] == '-') {
        *len = 1;
        return true;
    }
    // en dash / em dash
    if (pos + 3 <= text.size() && (unsigned char)text[pos] == 0xE2 &&
        (unsigned char)text[pos + 1] == 0x80 &&
        ((unsigned char)text[pos + 2] == 0x93 || (unsigned char)text[pos + 2] == 0x94)) {
        *len = 3;
        return true;
    }
    return false;
}

// A recognized timestamp-shaped occurrence of "At <number>..." in the text.
struct TimestampSite {
    enum class Kind {
        anchor,           // grammar-valid "At Xs"
        multi_decimal,    // "At 5.25s", fixable by rounding
        dangling_dot,     // "At 5.s", fixable by canonicalizing
        trailing_garbage, // "At 5sec", "At 5sx": intent unclear, not fixable
        range,            // "At 5-7s", not fixable
    };
    Kind kind = Kind::anchor;
    size_t start = 0;  // span from 'A' of "At" through the last consumed byte
    size_t end = 0;
    std::string lexeme;        // digits as written (anchor / multi_decimal / dangling_dot)
    int64_t t_tenths = 0;      // value after round-half-up to one decimal
    bool decimal_written = false;
    bool parenthesized = false;
    bool canonical = false;    // anchor lexeme already in canonical form
};

// Rounds a digit string "<int>[.<decimals>]" to tenths, half up.
int64_t digits_to_tenths(std::string_view lexeme) {
    size_t dot = lexeme.find('.');
    std::string_view int_part = (dot == std::string_view::npos) ? lexeme : lexeme.substr(0, dot);
    std::string_view dec_part = (dot == std::string_view::npos) ? "" : lexeme.substr(dot + 1);
    int64_t tenths = 0;
    for (char c : int_part) tenths = tenths * 10 + (c - '0');
    tenths *= 10;
    if (!dec_part.empty()) {
        tenths += dec_part[0] - '0';
        if (dec_part.size() > 1 && dec_part[1] >= '5') tenths += 1;
    }
    return tenths;
}

size_t skip_spaces(std::string_view text, size_t pos) {
    while (pos < text.size() && text[pos] == ' ') ++pos;
    return pos;
}

// Scans the text for all timestamp-shaped sites. Deterministic, single pass.
std::vector<TimestampSite> scan_sites(std::string_view text) {
    std::vector<TimestampSite> sites;
    size_t pos = 0;
    while (pos < text.size()) {
        size_t at = text.find("At ", pos);
        if (at == std::string_view::npos) break;
        // Left boundary: start of text or a non-alphanumeric byte.
        if (at > 0 && is_ascii_alnum(text[at - 1])) {
            pos = at + 1;
            continue;
        }
        size_t p = at + 3;
        if (p >= text.size() || !is_digit(text[p])) {
            pos = at + 3;
            continue;
        }
        size_t q = p;
        while (q < text.size() && is_digit(text[q])) ++q;

        TimestampSite site;
        site.start = at;

        auto finish_number = [&](size_t num_end, size_t dec_count) -> bool {
            // Returns true when a site was emitted; num_end points past the digits.
            std::string lexeme(text.substr(p, num_end - p));
            if (num_end < text.size() && text[num_end] == 's' &&
                (num_end + 1 >= text.size() || !is_ascii_alnum(text[num_end + 1]))) {
                site.end = num_end + 1;
                site.lexeme = lexeme;
                site.t_tenths = digits_to_tenths(lexeme);
                site.decimal_written = dec_count > 0;
                if (dec_count <= 1) {
                    site.kind = TimestampSite::Kind::anchor;
                    site.canonical = (lexeme == canonical_time_lexeme(site.t_tenths));
                } else {
                    site.kind = TimestampSite::Kind::multi_decimal;
                }
                sites.push_back(site);
                return true;
            }
            if (num_end < text.size() && text[num_end] == 's') {
                // "At 5sec", "At 5.2sx": eat the alnum run after 's'.
                size_t g = num_end + 1;
                while (g < text.size() && is_ascii_alnum(text[g])) ++g;
                site.end = g;
                site.kind = TimestampSite::Kind::trailing_garbage;
                site.lexeme = lexeme;
                site.t_tenths = digits_to_tenths(lexeme);
                sites.push_back(site);
                return true;
            }
            return false;
        };

        auto try_range = [&](size_t after_first) -> bool {
            size_t r = skip_spaces(text, after_first);
            size_t dash_len = 0;
            if (!is_dash_at(text, r, &dash_len)) return false;
            r = skip_spaces(text, r + dash_len);
            if (r >= text.size() || !is_digit(text[r])) return false;
            while (r < text.size() && is_digit(text[r])) ++r;
            if (r < text.size() && text[r] == '.') {
                ++r;
                while (r < text.size() && is_digit(text[r])) ++r;
            }
            if (r < text.size() && text[r] == 's' &&
                (r + 1 >= text.size() || !is_ascii_alnum(text[r + 1]))) {
                site.end = r + 1;
                site.kind = TimestampSite::Kind::range;
                sites.push_back(site);
                return true;
            }
            return false;
        };

        bool emitted = false;
        if (q < text.size() && text[q] == '.') {
            size_t r = q + 1;
            while (r < text.size() && is_digit(text[r])) ++r;
            size_t dec_count = r - (q + 1);
            if (dec_count == 0) {
                // "At 5.s" is a timestamp attempt; "At 5. Then" is prose.
                if (r < text.size() && text[r] == 's' &&
                    (r + 1 >= text.size() || !is_ascii_alnum(text[r + 1]))) {
                    site.end = r + 1;
                    site.kind = TimestampSite::Kind::dangling_dot;
                    site.lexeme = std::string(text.substr(p, r - p));
                    site.t_tenths = digits_to_tenths(site.lexeme);
                    sites.push_back(site);
                    emitted = true;
                }
            } else {
                emitted = finish_number(r, dec_count);
            }
        } else {
            emitted = finish_number(q, 0);
            if (!emitted) emitted = try_range(q);
        }

        if (emitted) {
            // Parenthesized form "(At 5s)": both delimiters adjacent up to spaces.
            if (sites.back().kind == TimestampSite::Kind::anchor) {
                size_t l = sites.back().start;
                while (l > 0 && text[l - 1] == ' ') --l;
                size_t rr = skip_spaces(text, sites.back().end);
                if (l > 0 && text[l - 1] == '(' && rr < text.size() && text[rr] == ')') {
                    sites.back().parenthesized = true;
                }
            }
            pos = sites.back().end;
        } else {
            pos = at + 3;
        }
    }
    return sites;
}

struct Token {
    size_t start;
    size_t end;
    std::string_view text;
};

std::vector<Token> tokenize(std::string_view text) {
    std::vector<Token> tokens;
    size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && (text[i] == ' ' || text[i] == '\n' || text[i] == '\t')) ++i;
        if (i >= text.size()) break;
        size_t j = i;
        while (j < text.size() && text[j] != ' ' && text[j] != '\n' && text[j] != '\t') ++j;
        tokens.push_back({i, j, text.substr(i, j - i)});
        i = j;
    }
    return tokens;
}

// Maximal runs of an exact n-gram repeated consecutively.
struct RepetitionRun {
    size_t token_begin;  // index of the first token of the run
    size_t repeats;      // how many times the n-gram appears
    size_t byte_begin;
    size_t byte_end;
};

std::vector<RepetitionRun> find_repetition_runs(const std::vector<Token>& tokens, int ngram,
                                                int min_repeats) {
    std::vector<RepetitionRun> runs;
    if (ngram <= 0 || min_repeats <= 1) return runs;
    size_t n = size_t(ngram);
    size_t i = 0;
    while (i + n <= tokens.size()) {
        size_t repeats = 1;
        while (true) {
            size_t next = i + repeats * n;
            if (next + n > tokens.size()) break;
            bool same = true;
            for (size_t m = 0; m < n; ++m) {
                if (tokens[next + m].text != tokens[i + m].text) {
                    same = false;
                    break;
                }
            }
            if (!same) break;
            ++repeats;
        }
        if (repeats >= size_t(min_repeats)) {
            runs.push_back({i, repeats, tokens[i].start, tokens[i + repeats * n - 1].end});
            i += repeats * n;
        } else {
            ++i;
        }
    }
    return runs;
}

struct BadCharRun {
    size_t start;
    size_t end;
    size_t count;
};

std::vector<BadCharRun> find_bad_char_runs(std::string_view text, const std::set<uint32_t>& extra) {
    auto allowed = [&](uint32_t cp, bool valid) {
        if (!valid) return false;
        if (cp == '\n' || cp == '\t') return true;
        if (cp >= 0x20 && cp <= 0x7E) return true;
        return extra.count(cp) > 0;
    };
    std::vector<BadCharRun> runs;
    size_t i = 0;
    while (i < text.size()) {
        auto c = decode_utf8(text, i);
        if (allowed(c.cp, c.valid)) {
            i += c.len;
            continue;
        }
        size_t start = i;
        size_t count = 0;
        while (i < text.size()) {
            auto c2 = decode_utf8(text, i);
            if (allowed(c2.cp, c2.valid)) break;
            i += c2.len;
            ++count;
        }
        runs.push_back({start, i, count});
    }
    return runs;
}

std::string format_seconds(int64_t tenths) { return canonical_time_lexeme(tenths); }

}  // namespace

std::string_view violation_kind_name(ViolationKind k) {
    switch (k) {
        case ViolationKind::malformed_timestamp: return "malformed_timestamp";
        case ViolationKind::timestamp_range: return "timestamp_range";
        case ViolationKind::parenthesized_timestamp: return "parenthesized_timestamp";
        case ViolationKind::duplicate_anchor: return "duplicate_anchor";
        case ViolationKind::non_monotonic_anchor: return "non_monotonic_anchor";
        case ViolationKind::repetition_collapse: return "repetition_collapse";
        case ViolationKind::non_compliant_symbol: return "non_compliant_symbol";
        case ViolationKind::exceeds_duration: return "exceeds_duration";
        case ViolationKind::speech_time_mismatch: return "speech_time_mismatch";
    }
    return "unknown";
}

std::string canonical_time_lexeme(int64_t tenths) {
    std::string out = std::to_string(tenths / 10);
    if (tenths % 10 != 0) {
        out += '.';
        out += char('0' + tenths % 10);
    }
    return out;
}

std::vector<Anchor> parse_anchors(std::string_view text) {
    std::vector<Anchor> anchors;
    for (const auto& site : scan_sites(text)) {
        if (site.kind != TimestampSite::Kind::anchor) continue;
        Anchor a;
        a.t_tenths = site.t_tenths;
        a.decimal_written = site.decimal_written;
        a.start = site.start;
        a.end = site.end;
        a.lexeme = site.lexeme;
        anchors.push_back(std::move(a));
    }
    return anchors;
}

std::vector<std::string> anchor_signature(std::string_view text) {
    std::vector<std::string> sig;
    for (const auto& a : parse_anchors(text)) sig.push_back(a.lexeme);
    return sig;
}

std::vector<FormatViolation> validate_caption(std::string_view text, double duration_s,
                                              const FormatPolicy& policy) {
    std::vector<FormatViolation> out;
    auto sites = scan_sites(text);

    int64_t limit_tenths = int64_t((duration_s + policy.ts_tolerance_s) * 10.0 + 0.5);
    int64_t prev_tenths = -1;
    std::unordered_set<int64_t> seen;
    for (const auto& site : sites) {
        switch (site.kind) {
            case TimestampSite::Kind::multi_decimal:
                out.push_back({ViolationKind::malformed_timestamp, site.start, site.end,
                               "timestamp '" + site.lexeme + "' has more than one decimal digit",
                               true});
                break;
            case TimestampSite::Kind::dangling_dot:
                out.push_back({ViolationKind::malformed_timestamp, site.start, site.end,
                               "timestamp '" + site.lexeme + "' ends with a bare decimal point",
                               true});
                break;
            case TimestampSite::Kind::trailing_garbage:
                out.push_back({ViolationKind::malformed_timestamp, site.start, site.end,
                               "timestamp-like text with trailing characters after the unit",
                               false});
                break;
            case TimestampSite::Kind::range:
                out.push_back({ViolationKind::timestamp_range, site.start, site.end,
                               "timestamp range is not allowed; use single anchors", false});
                break;
            case TimestampSite::Kind::anchor: {
                if (site.parenthesized) {
                    out.push_back({ViolationKind::parenthesized_timestamp, site.start, site.end,
                                   "anchor 'At " + site.lexeme + "s' is wrapped in parentheses",
                                   false});
                }
                if (seen.count(site.t_tenths)) {
                    out.push_back({ViolationKind::duplicate_anchor, site.start, site.end,
                                   "anchor t=" + format_seconds(site.t_tenths) +
                                       "s repeats an earlier anchor",
                                   true});
                } else if (prev_tenths >= 0 && site.t_tenths < prev_tenths) {
                    out.push_back({ViolationKind::non_monotonic_anchor, site.start, site.end,
                                   "anchor t=" + format_seconds(site.t_tenths) +
                                       "s goes back in time (previous was " +
                                       format_seconds(prev_tenths) + "s)",
                                   false});
                }
                if (site.t_tenths > limit_tenths) {
                    out.push_back({ViolationKind::exceeds_duration, site.start, site.end,
                                   "anchor t=" + format_seconds(site.t_tenths) +
                                       "s exceeds the video duration", false});
                }
                seen.insert(site.t_tenths);
                prev_tenths = site.t_tenths;
                break;
            }
        }
    }

    auto tokens = tokenize(text);
    for (const auto& run : find_repetition_runs(tokens, policy.ngram, policy.min_repeats)) {
        out.push_back({ViolationKind::repetition_collapse, run.byte_begin, run.byte_end,
                       std::to_string(run.repeats) + " consecutive repeats of a " +
                           std::to_string(policy.ngram) + "-token group",
                       true});
    }

    auto extra = decode_codepoint_set(policy.allowed_extra);
    for (const auto& run : find_bad_char_runs(text, extra)) {
        out.push_back({ViolationKind::non_compliant_symbol, run.start, run.end,
                       std::to_string(run.count) + " character(s) outside the allowed charset",
                       true});
    }

    std::stable_sort(out.begin(), out.end(), [](const FormatViolation& a, const FormatViolation& b) {
        if (a.start != b.start) return a.start < b.start;
        return uint8_t(a.kind) < uint8_t(b.kind);
    });
    return out;
}

NormalizeResult normalize_caption(std::string_view text, double duration_s,
                                  const FormatPolicy& policy) {
    std::string current(text);
    auto extra = decode_codepoint_set(policy.allowed_extra);

    // The replacement itself must be compliant or stripping would never settle.
    std::string replacement = policy.replacement;
    if (!find_bad_char_runs(replacement, extra).empty()) replacement.clear();

    for (int iter = 0; iter < 100; ++iter) {
        // Pass 1: strip non-compliant symbols.
        auto bad = find_bad_char_runs(current, extra);
        if (!bad.empty()) {
            std::string next;
            next.reserve(current.size());
            size_t pos = 0;
            for (const auto& run : bad) {
                next.append(current, pos, run.start - pos);
                for (size_t i = 0; i < run.count; ++i) next += replacement;
                pos = run.end;
            }
            next.append(current, pos, current.size() - pos);
            current = std::move(next);
            continue;
        }

        auto sites = scan_sites(current);

        // Pass 2: canonicalize fixable timestamps (round to one decimal,
        // rewrite "5.0" as "5", "05" as "5").
        {
            std::string next;
            size_t pos = 0;
            bool changed = false;
            for (const auto& site : sites) {
                bool rewrite = site.kind == TimestampSite::Kind::multi_decimal ||
                               site.kind == TimestampSite::Kind::dangling_dot ||
                               (site.kind == TimestampSite::Kind::anchor && !site.canonical);
                if (!rewrite) continue;
                next.append(current, pos, site.start - pos);
                next += "At " + canonical_time_lexeme(site.t_tenths) + "s";
                pos = site.end;
                changed = true;
            }
            if (changed) {
                next.append(current, pos, current.size() - pos);
                current = std::move(next);
                continue;
            }
        }

        // Pass 3: drop later duplicates of an equal-time anchor, plus one
        // trailing comma and following spaces so the prose stays readable.
        {
            std::unordered_set<int64_t> seen;
            std::string next;
            size_t pos = 0;
            bool changed = false;
            for (const auto& site : sites) {
                if (site.kind != TimestampSite::Kind::anchor) continue;
                if (!seen.insert(site.t_tenths).second) {
                    next.append(current, pos, site.start - pos);
                    size_t cut = site.end;
                    if (cut < current.size() && current[cut] == ',') ++cut;
                    while (cut < current.size() && current[cut] == ' ') ++cut;
                    pos = cut;
                    changed = true;
                }
            }
            if (changed) {
                next.append(current, pos, current.size() - pos);
                current = std::move(next);
                continue;
            }
        }

        // Pass 4: collapse repetition runs to a single instance.
        {
            auto tokens = tokenize(current);
            auto runs = find_repetition_runs(tokens, policy.ngram, policy.min_repeats);
            if (!runs.empty()) {
                std::string next;
                size_t pos = 0;
                for (const auto& run : runs) {
                    size_t keep_end = tokens[run.token_begin + size_t(policy.ngram) - 1].end;
                    next.append(current, pos, keep_end - pos);
                    pos = run.byte_end;
                }
                next.append(current, pos, current.size() - pos);
                current = std::move(next);
                continue;
            }
        }

        break;
    }

    NormalizeResult result;
    result.unfixed = validate_caption(current, duration_s, policy);
    result.text = std::move(current);
    return result;
}

}  // namespace avcap
