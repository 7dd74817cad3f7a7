#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "avcap/grammar.hpp"
#include "fuzz_corpus.hpp"

using namespace avcap;

namespace {

// Independent brute-force repetition detector: for every start index, count
// how often the n-gram starting there repeats back to back. Used as the
// oracle for the sliding-window implementation.
bool oracle_has_repetition(const std::string& text, int ngram, int min_repeats) {
    std::vector<std::string> tokens;
    std::string tok;
    for (char ch : text) {
        if (ch == ' ' || ch == '\n' || ch == '\t') {
            if (!tok.empty()) tokens.push_back(tok);
            tok.clear();
        } else {
            tok += ch;
        }
    }
    if (!tok.empty()) tokens.push_back(tok);
    size_t n = size_t(ngram);
    for (size_t i = 0; i + n <= tokens.size(); ++i) {
        size_t reps = 1;
        while (i + (reps + 1) * n <= tokens.size()) {
            bool same = true;
            for (size_t m = 0; m < n; ++m) {
                if (tokens[i + reps * n + m] != tokens[i + m]) same = false;
            }
            if (!same) break;
            ++reps;
        }
        if (reps >= size_t(min_repeats)) return true;
    }
    return false;
}

std::vector<FormatViolation> violations_of_kind(const std::vector<FormatViolation>& vs,
                                                ViolationKind k) {
    std::vector<FormatViolation> out;
    for (const auto& v : vs) {
        if (v.kind == k) out.push_back(v);
    }
    return out;
}

FormatPolicy policy_1gram() {
    FormatPolicy p;
    p.ngram = 1;
    p.min_repeats = 3;
    return p;
}

// Round a written number to tenths, half up, mirroring the normalization rule.
int64_t round_lexeme_to_tenths(const std::string& lexeme) {
    auto dot = lexeme.find('.');
    int64_t tenths = 0;
    for (size_t i = 0; i < (dot == std::string::npos ? lexeme.size() : dot); ++i)
        tenths = tenths * 10 + (lexeme[i] - '0');
    tenths *= 10;
    if (dot != std::string::npos && dot + 1 < lexeme.size()) {
        tenths += lexeme[dot + 1] - '0';
        if (dot + 2 < lexeme.size() && lexeme[dot + 2] >= '5') tenths += 1;
    }
    return tenths;
}

}  // namespace

TEST_CASE("parse_anchors finds integer and one-decimal anchors in order") {
    auto anchors = parse_anchors("At 5s, a man enters. At 12s, he sits.");
    REQUIRE(anchors.size() == 2);
    CHECK(anchors[0].t_tenths == 50);
    CHECK(anchors[0].lexeme == "5");
    CHECK(anchors[1].t_tenths == 120);
    CHECK(anchors[0].start == 0);
    CHECK(anchors[0].end == 5);

    auto dec = parse_anchors("At 3.5s, music starts.");
    REQUIRE(dec.size() == 1);
    CHECK(dec[0].t_tenths == 35);
    CHECK(dec[0].decimal_written);

    CHECK(parse_anchors("").empty());
}

TEST_CASE("parse_anchors respects word boundaries and rejects near-misses") {
    CHECK(parse_anchors("CAt 5s no").empty());
    CHECK(parse_anchors("At 5sec no").empty());
    CHECK(parse_anchors("At 5.25s no").empty());
    CHECK(parse_anchors("At 5-7s no").empty());
    CHECK(parse_anchors("flat 5s no").empty());
    REQUIRE(parse_anchors("(At 5s)").size() == 1);    // paren is a separate violation
    REQUIRE(parse_anchors("At 5s.").size() == 1);
    REQUIRE(parse_anchors("At 0s start").size() == 1);
}

TEST_CASE("parse_anchors is a pure function: reparse reproduces anchors exactly") {
    std::string text = "At 1s, a. At 2.5s, b. (At 9s) At 10s end.";
    auto first = parse_anchors(text);
    auto second = parse_anchors(text);
    CHECK(first == second);
}

TEST_CASE("validate_caption flags non-monotonic anchors") {
    FormatPolicy policy;
    auto vs = validate_caption("At 5s, x. At 3s, y.", 60.0, policy);
    REQUIRE(vs.size() == 1);
    CHECK(vs[0].kind == ViolationKind::non_monotonic_anchor);
    // the second anchor is the offender
    CHECK(vs[0].start == 10);
    CHECK_FALSE(vs[0].fixable);
}

TEST_CASE("validate_caption flags timestamp ranges") {
    FormatPolicy policy;
    auto vs = validate_caption("At 5-7s, x.", 60.0, policy);
    REQUIRE(vs.size() == 1);
    CHECK(vs[0].kind == ViolationKind::timestamp_range);
}

TEST_CASE("validate_caption flags parenthesized and duplicate anchors") {
    FormatPolicy policy;
    auto vs = validate_caption("(At 5s) x.", 60.0, policy);
    REQUIRE(violations_of_kind(vs, ViolationKind::parenthesized_timestamp).size() == 1);

    auto dup = validate_caption("At 5s, x. At 5s, y.", 60.0, policy);
    REQUIRE(violations_of_kind(dup, ViolationKind::duplicate_anchor).size() == 1);
    CHECK(violations_of_kind(dup, ViolationKind::duplicate_anchor)[0].fixable);
}

TEST_CASE("validate_caption flags anchors past duration with tolerance") {
    FormatPolicy policy;  // ts_tolerance_s = 2.0
    CHECK(violations_of_kind(validate_caption("At 185s, x.", 180.0, policy),
                             ViolationKind::exceeds_duration)
              .size() == 1);
    CHECK(violations_of_kind(validate_caption("At 182s, x.", 180.0, policy),
                             ViolationKind::exceeds_duration)
              .empty());
}

TEST_CASE("repetition collapse detection matches the brute-force oracle") {
    auto policy = policy_1gram();
    std::string run9 = "go go go go go go go go go";
    auto vs = validate_caption(run9, 60.0, policy);
    auto reps = violations_of_kind(vs, ViolationKind::repetition_collapse);
    REQUIRE(reps.size() == 1);  // one violation covering the whole run
    CHECK(reps[0].start == 0);
    CHECK(reps[0].end == run9.size());
    CHECK(oracle_has_repetition(run9, 1, 3));

    // Fixture strings hand-checked against the oracle.
    std::vector<std::pair<std::string, bool>> fixtures = {
        {"go go stop go go stop", false},
        {"go go go stop", true},
        {"a b a b a b", false},       // 1-gram: alternating, no run
        {"one two two one", false},
        {"x x", false},               // below min_repeats
    };
    for (const auto& [text, expect] : fixtures) {
        CAPTURE(text);
        bool flagged =
            !violations_of_kind(validate_caption(text, 60.0, policy), ViolationKind::repetition_collapse)
                 .empty();
        CHECK(flagged == expect);
        CHECK(flagged == oracle_has_repetition(text, 1, 3));
    }

    // Default policy (6-gram) ignores short emphatic prose.
    FormatPolicy def;
    CHECK(violations_of_kind(validate_caption("no no no he says", 60.0, def),
                             ViolationKind::repetition_collapse)
              .empty());
    // ... but catches a degenerate 6-gram loop.
    std::string loop;
    for (int i = 0; i < 3; ++i) loop += "the cat sat on the mat ";
    CHECK_FALSE(violations_of_kind(validate_caption(loop, 60.0, def),
                                   ViolationKind::repetition_collapse)
                    .empty());
}

TEST_CASE("randomized repetition detection agrees with the oracle") {
    std::mt19937_64 rng(7);
    const char* vocab[] = {"a", "b", "c"};
    for (int trial = 0; trial < 300; ++trial) {
        std::string text;
        size_t len = 1 + rng() % 12;
        for (size_t i = 0; i < len; ++i) {
            text += vocab[rng() % 3];
            text += ' ';
        }
        int ngram = 1 + int(rng() % 3);
        FormatPolicy p;
        p.ngram = ngram;
        p.min_repeats = 3;
        bool flagged = !violations_of_kind(validate_caption(text, 600.0, p),
                                           ViolationKind::repetition_collapse)
                            .empty();
        CAPTURE(text);
        CAPTURE(ngram);
        CHECK(flagged == oracle_has_repetition(text, ngram, 3));
    }
}

TEST_CASE("normalize rounds multi-decimal timestamps half-up") {
    FormatPolicy policy;
    auto r = normalize_caption("At 5.25s, x.", 60.0, policy);
    CHECK(r.text == "At 5.3s, x.");
    CHECK(r.unfixed.empty());

    CHECK(normalize_caption("At 5.24s, x.", 60.0, policy).text == "At 5.2s, x.");
    CHECK(normalize_caption("At 5.96s, x.", 60.0, policy).text == "At 6s, x.");
    CHECK(normalize_caption("At 5.04s, x.", 60.0, policy).text == "At 5s, x.");
}

TEST_CASE("normalize canonicalizes trailing-zero decimals and leading zeros") {
    FormatPolicy policy;
    CHECK(normalize_caption("At 5.0s, x.", 60.0, policy).text == "At 5s, x.");
    CHECK(normalize_caption("At 05s, x.", 60.0, policy).text == "At 5s, x.");
    CHECK(normalize_caption("At 3.5s, x.", 60.0, policy).text == "At 3.5s, x.");
}

TEST_CASE("normalize strips non-compliant symbols") {
    FormatPolicy policy;
    auto r = normalize_caption("a man \xF0\x9F\x98\x80 walks", 60.0, policy);
    CHECK(r.text == "a man  walks");
    CHECK(r.unfixed.empty());
    // typographic quotes/dashes are allowed by default
    auto q = normalize_caption("she says “hold” — loudly", 60.0, policy);
    CHECK(q.unfixed.empty());
    CHECK(q.text == "she says “hold” — loudly");
}

TEST_CASE("normalize drops later duplicate anchors") {
    FormatPolicy policy;
    auto r = normalize_caption("At 5s, x. At 5s, y.", 60.0, policy);
    CHECK(r.text == "At 5s, x. y.");
    CHECK(r.unfixed.empty());
}

TEST_CASE("normalize collapses repetition runs to one instance") {
    auto policy = policy_1gram();
    auto r = normalize_caption("go go go go go go go go go", 60.0, policy);
    CHECK(r.text == "go");
    CHECK(r.unfixed.empty());
}

TEST_CASE("normalize leaves declared non-fixable kinds in unfixed") {
    FormatPolicy policy;
    auto r = normalize_caption("At 9s, x. At 4s, y.", 60.0, policy);
    CHECK(r.text == "At 9s, x. At 4s, y.");
    REQUIRE(r.unfixed.size() == 1);
    CHECK(r.unfixed[0].kind == ViolationKind::non_monotonic_anchor);

    auto range = normalize_caption("At 5-7s, x.", 60.0, policy);
    CHECK(range.text == "At 5-7s, x.");
    REQUIRE(range.unfixed.size() == 1);
    CHECK(range.unfixed[0].kind == ViolationKind::timestamp_range);
}

TEST_CASE("anchor_signature keeps the written form") {
    CHECK(anchor_signature("At 1s, a. At 2s, b.") == std::vector<std::string>{"1", "2"});
    // same anchors, different prose -> same signature
    CHECK(anchor_signature("At 1s, a man. At 2s, a dog.") ==
          anchor_signature("At 1s, x. At 2s, y."));
    // "2" vs "2.0" differ until canonicalized
    CHECK(anchor_signature("At 2s, b.") != anchor_signature("At 2.0s, b."));
    FormatPolicy policy;
    CHECK(anchor_signature(normalize_caption("At 2.0s, b.", 60.0, policy).text) ==
          anchor_signature("At 2s, b."));
}

TEST_CASE("fuzz corpus: normalize is idempotent and never introduces violations") {
    FormatPolicy policy;
    policy.ngram = 1;
    policy.min_repeats = 3;
    auto corpus = avcap::testing::make_fuzz_corpus(1000, 42);
    for (const auto& fc : corpus) {
        CAPTURE(fc.text);
        auto before = validate_caption(fc.text, fc.duration_s, policy);
        auto r1 = normalize_caption(fc.text, fc.duration_s, policy);
        auto r2 = normalize_caption(r1.text, fc.duration_s, policy);
        CHECK(r2.text == r1.text);
        CHECK(r2.unfixed.size() == r1.unfixed.size());

        // Every violation still present after normalization is non-fixable
        // and is reported in the unfixed set (nothing hidden, nothing new).
        auto after = validate_caption(r1.text, fc.duration_s, policy);
        REQUIRE(after.size() == r1.unfixed.size());
        for (size_t i = 0; i < after.size(); ++i) {
            CHECK_FALSE(after[i].fixable);
            CHECK(after[i].kind == r1.unfixed[i].kind);
            CHECK(after[i].start == r1.unfixed[i].start);
            CHECK(after[i].end == r1.unfixed[i].end);
        }

        // Anchor times survive as a subsequence up to rounding. The source
        // sequence includes fixable timestamp sites (multi-decimal, dangling
        // dot): rounding repairs turn those into anchors.
        struct TimeSite {
            size_t start;
            int64_t tenths;
        };
        std::vector<TimeSite> sources;
        for (const auto& a : parse_anchors(fc.text)) sources.push_back({a.start, a.t_tenths});
        for (const auto& v : before) {
            if (v.kind == ViolationKind::malformed_timestamp && v.fixable) {
                // span covers "At <digits>s"
                std::string lex(fc.text.substr(v.start + 3, v.end - v.start - 4));
                sources.push_back({v.start, round_lexeme_to_tenths(lex)});
            }
        }
        std::sort(sources.begin(), sources.end(),
                  [](const TimeSite& a, const TimeSite& b) { return a.start < b.start; });
        auto norm = parse_anchors(r1.text);
        size_t oi = 0;
        for (const auto& na : norm) {
            while (oi < sources.size() && sources[oi].tenths != na.t_tenths) ++oi;
            CAPTURE(na.lexeme);
            CHECK(oi < sources.size());
            if (oi < sources.size()) ++oi;
        }

        // parse_anchors is stable under re-parse.
        CHECK(parse_anchors(r1.text) == parse_anchors(r1.text));
    }
}
