#include "avcap/schemas.hpp"

#include <algorithm>
#include <cctype>

#include <json.hpp>

#include "avcap/grammar.hpp"

namespace avcap {

using nlohmann::json;

namespace {

std::string trim(std::string_view s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace((unsigned char)s[b])) ++b;
    while (e > b && std::isspace((unsigned char)s[e - 1])) --e;
    return std::string(s.substr(b, e - b));
}

// Tolerate one surrounding ```...``` fence; the payload inside stays strict.
std::string strip_fence(const std::string& raw) {
    std::string s = trim(raw);
    if (!s.starts_with("```")) return s;
    size_t body = s.find('\n');
    if (body == std::string::npos) return s;
    size_t tail = s.rfind("```");
    if (tail <= body) return s;
    return trim(s.substr(body + 1, tail - body - 1));
}

Result<json> parse_strict_object(const std::string& raw, std::initializer_list<const char*> keys) {
    using R = Result<json>;
    json j = json::parse(strip_fence(raw), nullptr, false);
    if (j.is_discarded()) return R::fail("payload is not valid JSON");
    if (!j.is_object()) return R::fail("payload must be a JSON object");
    for (const char* key : keys) {
        if (!j.contains(key)) return R::fail("missing key", std::string("$.") + key);
    }
    if (j.size() != keys.size()) {
        for (const auto& [key, _] : j.items()) {
            if (std::find_if(keys.begin(), keys.end(),
                             [&](const char* k) { return key == k; }) == keys.end())
                return R::fail("unknown key", "$." + key);
        }
    }
    return R::ok(std::move(j));
}

Result<std::vector<std::string>> string_list(const json& j, const std::string& path) {
    using R = Result<std::vector<std::string>>;
    if (!j.is_array()) return R::fail("must be a list", path);
    std::vector<std::string> out;
    for (size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_string())
            return R::fail("must be a string", path + "[" + std::to_string(i) + "]");
        out.push_back(j[i].get<std::string>());
    }
    return R::ok(std::move(out));
}

// Collapse whitespace runs so verbatim-quoting checks ignore line wrapping.
std::string squash_ws(std::string_view s) {
    std::string out;
    bool space = false;
    for (char c : s) {
        if (c == ' ' || c == '\n' || c == '\t' || c == '\r') {
            space = true;
            continue;
        }
        if (space && !out.empty()) out += ' ';
        space = false;
        out += c;
    }
    return out;
}

}  // namespace

Result<VerificationReport> parse_verification(const std::string& raw) {
    using R = Result<VerificationReport>;
    auto obj = parse_strict_object(
        raw, {"non_speech_deficiency_specific", "speech_deficiency_specific", "caption"});
    if (!obj) return R::fail(obj.error().message, obj.error().path);
    const json& j = obj.value();

    VerificationReport report;
    auto non_speech = string_list(j["non_speech_deficiency_specific"],
                                  "$.non_speech_deficiency_specific");
    if (!non_speech) return R::fail(non_speech.error().message, non_speech.error().path);
    report.non_speech_deficiency_specific = non_speech.take();

    auto speech = string_list(j["speech_deficiency_specific"], "$.speech_deficiency_specific");
    if (!speech) return R::fail(speech.error().message, speech.error().path);
    report.speech_deficiency_specific = speech.take();

    if (!j["caption"].is_string()) return R::fail("must be a string", "$.caption");
    report.caption = j["caption"].get<std::string>();
    if (report.caption.empty()) return R::fail("caption must be nonempty", "$.caption");
    return R::ok(std::move(report));
}

Result<AuditReport> parse_audit(const std::string& raw, const std::string& caption_text) {
    using R = Result<AuditReport>;
    auto obj = parse_strict_object(raw, {"errors", "missing", "expressiveness"});
    if (!obj) return R::fail(obj.error().message, obj.error().path);
    const json& j = obj.value();

    AuditReport report;
    if (!j["errors"].is_array()) return R::fail("must be a list", "$.errors");
    for (size_t i = 0; i < j["errors"].size(); ++i) {
        std::string path = "$.errors[" + std::to_string(i) + "]";
        const auto& e = j["errors"][i];
        if (!e.is_object() || !e.contains("snippet") || !e.contains("why") || e.size() != 2)
            return R::fail("must be an object with exactly 'snippet' and 'why'", path);
        if (!e["snippet"].is_string() || !e["why"].is_string())
            return R::fail("snippet and why must be strings", path);
        AuditFinding f{e["snippet"].get<std::string>(), e["why"].get<std::string>()};
        if (caption_text.find(f.snippet) == std::string::npos)
            return R::fail("snippet not found verbatim in the audited caption: '" + f.snippet + "'",
                           path + ".snippet");
        report.errors.push_back(std::move(f));
    }

    if (!j["missing"].is_array()) return R::fail("must be a list", "$.missing");
    for (size_t i = 0; i < j["missing"].size(); ++i) {
        std::string path = "$.missing[" + std::to_string(i) + "]";
        const auto& m = j["missing"][i];
        if (!m.is_object() || !m.contains("what") || !m.contains("why") || m.size() != 2)
            return R::fail("must be an object with exactly 'what' and 'why'", path);
        if (!m["what"].is_string() || !m["why"].is_string())
            return R::fail("what and why must be strings", path);
        report.missing.push_back({m["what"].get<std::string>(), m["why"].get<std::string>()});
    }

    auto expressiveness = string_list(j["expressiveness"], "$.expressiveness");
    if (!expressiveness) return R::fail(expressiveness.error().message, expressiveness.error().path);
    report.expressiveness = expressiveness.take();
    return R::ok(std::move(report));
}

Result<RefineOutput> parse_refine(const std::string& raw) {
    using R = Result<RefineOutput>;
    auto obj = parse_strict_object(raw, {"improved_caption", "enhance_summary"});
    if (!obj) return R::fail(obj.error().message, obj.error().path);
    const json& j = obj.value();

    RefineOutput out;
    if (!j["improved_caption"].is_string()) return R::fail("must be a string", "$.improved_caption");
    out.improved_caption = j["improved_caption"].get<std::string>();
    if (out.improved_caption.empty())
        return R::fail("improved_caption must be nonempty", "$.improved_caption");

    const json& s = j["enhance_summary"];
    if (!s.is_object()) return R::fail("must be an object", "$.enhance_summary");
    const char* fields[] = {"fixed_errors", "filled_missing", "dropped_forbidden",
                            "timestamp_adjustments"};
    for (const char* f : fields) {
        if (!s.contains(f)) return R::fail("missing key", std::string("$.enhance_summary.") + f);
    }
    if (s.size() != 4) {
        for (const auto& [key, _] : s.items()) {
            if (std::find_if(std::begin(fields), std::end(fields),
                             [&](const char* f) { return key == f; }) == std::end(fields))
                return R::fail("unknown key", "$.enhance_summary." + key);
        }
    }
    std::vector<std::string>* targets[] = {
        &out.enhance_summary.fixed_errors, &out.enhance_summary.filled_missing,
        &out.enhance_summary.dropped_forbidden, &out.enhance_summary.timestamp_adjustments};
    for (size_t i = 0; i < 4; ++i) {
        auto list = string_list(s[fields[i]], std::string("$.enhance_summary.") + fields[i]);
        if (!list) return R::fail(list.error().message, list.error().path);
        *targets[i] = list.take();
    }
    return R::ok(std::move(out));
}

std::optional<std::string> check_refine_invariants(const RefineOutput& output,
                                                   const std::string& input_caption) {
    if (!output.enhance_summary.timestamp_adjustments.empty()) return std::nullopt;
    if (anchor_signature(output.improved_caption) != anchor_signature(input_caption)) {
        return "anchor signature changed but timestamp_adjustments is empty";
    }
    return std::nullopt;
}

Result<QaAnswer> parse_qa_answer(const std::string& raw) {
    using R = Result<QaAnswer>;
    std::string s = trim(raw);
    // Strip surrounding punctuation, leaving interior characters alone so
    // "N/A" survives.
    auto is_wrap = [](char c) {
        return c == '.' || c == ',' || c == ':' || c == ';' || c == '!' || c == '?' ||
               c == '"' || c == '\'' || c == '(' || c == ')' || c == '[' || c == ']' || c == '*';
    };
    size_t b = 0, e = s.size();
    while (b < e && is_wrap(s[b])) ++b;
    while (e > b && is_wrap(s[e - 1])) --e;
    s = trim(s.substr(b, e - b));

    if (s == "N/A") return R::ok(QaAnswer{std::nullopt});
    if (s.size() == 1 && s[0] >= 'A' && s[0] <= 'Z') return R::ok(QaAnswer{s[0]});
    return R::fail("expected a single capital letter or \"N/A\", got '" + trim(raw) + "'");
}

Result<GroundingAnswer> parse_grounding_answer(const std::string& raw) {
    using R = Result<GroundingAnswer>;
    std::string s = strip_fence(raw);
    std::string bare = trim(s);
    if (!bare.empty() && (bare.front() == '"' || bare.front() == '\'') && bare.size() >= 2 &&
        bare.back() == bare.front())
        bare = bare.substr(1, bare.size() - 2);
    if (bare == "N/A") return R::ok(GroundingAnswer{std::nullopt});

    json j = json::parse(s, nullptr, false);
    if (!j.is_discarded() && j.is_object()) {
        if (!j.contains("start") || !j.contains("end") || j.size() != 2)
            return R::fail("interval payload must have exactly 'start' and 'end'");
        if (!j["start"].is_number() || !j["end"].is_number())
            return R::fail("start and end must be numbers");
        double start = j["start"].get<double>();
        double end = j["end"].get<double>();
        if (start < 0 || end < 0) return R::fail("interval seconds must be nonnegative");
        if (start > end) return R::fail("interval start > end");
        return R::ok(GroundingAnswer{Interval{start, end}});
    }

    // Fallback for foreign solvers: the first two nonnegative numbers in the text.
    std::vector<double> numbers;
    for (size_t i = 0; i < s.size() && numbers.size() < 2;) {
        if (std::isdigit((unsigned char)s[i])) {
            size_t j2 = i;
            while (j2 < s.size() && std::isdigit((unsigned char)s[j2])) ++j2;
            if (j2 < s.size() && s[j2] == '.' && j2 + 1 < s.size() &&
                std::isdigit((unsigned char)s[j2 + 1])) {
                ++j2;
                while (j2 < s.size() && std::isdigit((unsigned char)s[j2])) ++j2;
            }
            numbers.push_back(std::stod(s.substr(i, j2 - i)));
            i = j2;
        } else {
            ++i;
        }
    }
    if (numbers.size() < 2) return R::fail("no time interval found in answer");
    if (numbers[0] > numbers[1]) return R::fail("interval start > end");
    return R::ok(GroundingAnswer{Interval{numbers[0], numbers[1]}});
}

ResponseSchema verification_schema() {
    return {"verification", [](const std::string& raw) -> std::optional<std::string> {
                auto r = parse_verification(raw);
                if (!r) return r.error().to_string();
                return std::nullopt;
            }};
}

ResponseSchema audit_schema(std::string caption_text) {
    return {"audit", [caption = std::move(caption_text)](const std::string& raw)
                         -> std::optional<std::string> {
                auto r = parse_audit(raw, caption);
                if (!r) return r.error().to_string();
                return std::nullopt;
            }};
}

ResponseSchema refine_schema(std::string input_caption) {
    return {"refine", [input = std::move(input_caption)](const std::string& raw)
                          -> std::optional<std::string> {
                auto r = parse_refine(raw);
                if (!r) return r.error().to_string();
                return check_refine_invariants(r.value(), input);
            }};
}

ResponseSchema decompose_schema(std::string final_caption) {
    return {"decompose", [squashed = squash_ws(final_caption)](const std::string& raw)
                             -> std::optional<std::string> {
                // Sentence-level verbatim check against the final caption.
                std::string text = squash_ws(strip_fence(raw));
                if (text.empty()) return std::nullopt;  // empty = no content for the dimension
                size_t begin = 0;
                for (size_t i = 0; i <= text.size(); ++i) {
                    bool boundary = i == text.size() || text[i] == '.' || text[i] == '!' ||
                                    text[i] == '?';
                    if (!boundary) continue;
                    std::string sentence = trim(text.substr(begin, i - begin));
                    begin = i + 1;
                    if (sentence.empty()) continue;
                    if (squashed.find(sentence) == std::string::npos)
                        return "decomposed sentence not found in the caption: '" + sentence + "'";
                }
                return std::nullopt;
            }};
}

}  // namespace avcap
