#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include <json.hpp>

#include "avcap/prompts.hpp"
#include "avcap/schemas.hpp"
#include "temp_dir.hpp"

using namespace avcap;
using avcap::testing::TempDir;
using nlohmann::json;

TEST_CASE("merge render places candidates under Description 1/2/3") {
    auto templates = TemplateSet::builtin();
    std::vector<CandidateCaption> candidates = {
        {"a", "first text", ModalityClaim::audiovisual},
        {"b", "second text", ModalityClaim::visual_only},
        {"c", "third text", ModalityClaim::speech_only}};
    auto rendered = templates.render(PromptId::merge, {{"duration_s", "60"},
                                                       {"asr", "(no speech)\n"},
                                                       {"candidates",
                                                        serialize_candidates(candidates)}});
    REQUIRE(rendered);
    const std::string& text = rendered.value();
    CHECK(text.find("Description 1: first text") != std::string::npos);
    CHECK(text.find("Description 2: second text") != std::string::npos);
    CHECK(text.find("Description 3: third text") != std::string::npos);
}

TEST_CASE("render fails on a missing binding, naming it") {
    auto templates = TemplateSet::builtin();
    auto missing = templates.render(PromptId::audit, {{"attribute", "Scene"},
                                                      {"verify_list", "- x\n"},
                                                      {"asr", "(no speech)\n"}});
    REQUIRE_FALSE(missing);
    CHECK(missing.error().message.find("caption") != std::string::npos);
}

TEST_CASE("qa_judge render ends with the choices block") {
    auto templates = TemplateSet::builtin();
    auto rendered = templates.render(
        PromptId::qa_judge,
        {{"caption", "At 1s, x."}, {"question", "What?"}, {"choices", "A. x\nB. y\nC. z\nD. w"}});
    REQUIRE(rendered);
    auto pos = rendered.value().rfind("Choices:");
    REQUIRE(pos != std::string::npos);
    CHECK(rendered.value().find("D. w", pos) != std::string::npos);
}

TEST_CASE("ASR serialization is speaker-aware and deterministic") {
    AsrTranscript asr;
    asr.utterances = {{"spk0", 1.5, 3.0, "hello"}, {"narrator", 4.0, 6.5, "welcome back"}};
    std::string s = serialize_asr(asr);
    CHECK(s == "spk0 (1.5–3 s): hello\nnarrator (4–6.5 s): welcome back\n");
    CHECK(serialize_asr(asr) == s);
}

TEST_CASE("render is deterministic and distinct bindings give distinct prompts") {
    auto templates = TemplateSet::builtin();
    std::mt19937_64 rng(29);
    auto token = [&rng]() {
        std::string t;
        for (int i = 0; i < 12; ++i) t += char('a' + rng() % 26);
        return t;
    };
    for (int trial = 0; trial < 100; ++trial) {
        Bindings a = {{"caption", token()}, {"question", token()}, {"choices", token()}};
        Bindings b = a;
        CHECK(templates.render(PromptId::qa_judge, a).value() ==
              templates.render(PromptId::qa_judge, b).value());
        b["question"] = token();  // differs with overwhelming probability
        if (a.at("question") != b.at("question")) {
            CHECK(templates.render(PromptId::qa_judge, a).value() !=
                  templates.render(PromptId::qa_judge, b).value());
        }
    }
}

TEST_CASE("template assets round-trip through disk with stable checksums") {
    TempDir dir("templates");
    write_default_templates(dir.path());
    auto loaded = TemplateSet::load(dir.path());
    auto builtin = TemplateSet::builtin();
    for (size_t i = 0; i < kPromptCount; ++i) {
        auto id = PromptId(i);
        CHECK(loaded.body(id) == builtin.body(id));
        CHECK(loaded.checksum(id) == builtin.checksum(id));
        CHECK(loaded.checksum(id).size() == 64);
    }
    CHECK_THROWS(TemplateSet::load(dir / "nope"));
}

TEST_CASE("template placeholders are identifier-shaped only") {
    auto found = template_placeholders("a {x} b {\"json\": 1} c {x} {y_2}");
    REQUIRE(found.size() == 2);
    CHECK(found[0] == "x");
    CHECK(found[1] == "y_2");
    // The grounding template contains a JSON example in braces; it must not
    // register as a placeholder.
    auto grounding = template_placeholders(TemplateSet::builtin().body(PromptId::grounding_judge));
    for (const auto& p : grounding) CHECK((p == "caption" || p == "query"));
}

// --- structured-response parsers ---

TEST_CASE("parse_verification accepts the minimal valid payload") {
    auto r = parse_verification(
        R"({"non_speech_deficiency_specific": [], "speech_deficiency_specific": [], "caption": "At 1s, x."})");
    REQUIRE(r);
    CHECK(r.value().caption == "At 1s, x.");
    CHECK(r.value().non_speech_deficiency_specific.empty());
}

TEST_CASE("parse_verification rejects wrong shapes with a named path") {
    // extra fourth key
    auto extra = parse_verification(
        R"({"non_speech_deficiency_specific": [], "speech_deficiency_specific": [], "caption": "x", "extra": 1})");
    REQUIRE_FALSE(extra);
    CHECK(extra.error().path == "$.extra");

    // missing key
    auto missing = parse_verification(R"({"speech_deficiency_specific": [], "caption": "x"})");
    REQUIRE_FALSE(missing);
    CHECK(missing.error().path == "$.non_speech_deficiency_specific");

    // wrong type
    auto wrong = parse_verification(
        R"({"non_speech_deficiency_specific": "nope", "speech_deficiency_specific": [], "caption": "x"})");
    REQUIRE_FALSE(wrong);
    CHECK(wrong.error().path == "$.non_speech_deficiency_specific");

    // empty caption
    CHECK_FALSE(parse_verification(
        R"({"non_speech_deficiency_specific": [], "speech_deficiency_specific": [], "caption": ""})"));

    // prose
    CHECK_FALSE(parse_verification("Sure! Here is the caption you wanted."));
}

TEST_CASE("parse_verification tolerates one markdown fence") {
    auto fenced = parse_verification(
        "```json\n{\"non_speech_deficiency_specific\": [], \"speech_deficiency_specific\": [], "
        "\"caption\": \"x\"}\n```");
    REQUIRE(fenced);
    CHECK(fenced.value().caption == "x");
}

TEST_CASE("parse_audit enforces the verbatim-snippet invariant") {
    std::string caption = "At 5s, a red car passes.";
    auto ok = parse_audit(
        R"({"errors": [{"snippet": "a red car", "why": "the car is blue"}], "missing": [], "expressiveness": []})",
        caption);
    REQUIRE(ok);
    CHECK(ok.value().errors.size() == 1);

    auto bad = parse_audit(
        R"({"errors": [{"snippet": "a green truck", "why": "not present"}], "missing": [], "expressiveness": []})",
        caption);
    REQUIRE_FALSE(bad);
    CHECK(bad.error().message.find("snippet") != std::string::npos);
}

TEST_CASE("parse_audit rejects malformed finding objects") {
    std::string caption = "text";
    CHECK_FALSE(parse_audit(R"({"errors": [{"snippet": "text"}], "missing": [], "expressiveness": []})",
                            caption));
    CHECK_FALSE(parse_audit(
        R"({"errors": [], "missing": [{"what": "x", "why": "y", "zzz": 1}], "expressiveness": []})",
        caption));
    CHECK_FALSE(parse_audit(R"({"errors": [], "missing": []})", caption));
}

TEST_CASE("parse_refine enforces exact keys and the signature invariant") {
    auto ok = parse_refine(
        R"({"improved_caption": "At 1s, x.", "enhance_summary": {"fixed_errors": ["e"], "filled_missing": [], "dropped_forbidden": [], "timestamp_adjustments": []}})");
    REQUIRE(ok);
    CHECK(ok.value().improved_caption == "At 1s, x.");
    CHECK(ok.value().enhance_summary.fixed_errors.size() == 1);

    CHECK_FALSE(parse_refine(R"({"improved_caption": "x"})"));
    auto extra = parse_refine(
        R"({"improved_caption": "x", "enhance_summary": {"fixed_errors": [], "filled_missing": [], "dropped_forbidden": [], "timestamp_adjustments": [], "more": []}})");
    REQUIRE_FALSE(extra);
    CHECK(extra.error().path == "$.enhance_summary.more");

    // Signature invariant: empty timestamp_adjustments but changed anchors.
    RefineOutput changed = ok.take();
    CHECK_FALSE(check_refine_invariants(changed, "At 1s, x.").has_value());
    CHECK(check_refine_invariants(changed, "At 2s, x.").has_value());
    changed.enhance_summary.timestamp_adjustments.push_back("moved 2s to 1s");
    CHECK_FALSE(check_refine_invariants(changed, "At 2s, x.").has_value());
}

TEST_CASE("every parser rejects its serialization with one field renamed") {
    // verification
    json v{{"non_speech_deficiency_specific", json::array()},
           {"speech_deficiency_specific", json::array()},
           {"caption", "x"}};
    for (const auto& [key, _] : v.items()) {
        json mutated = v;
        mutated.erase(key);
        mutated[key + "_renamed"] = v[key];
        CHECK_FALSE(parse_verification(mutated.dump()));
    }
    // audit
    json a{{"errors", json::array()}, {"missing", json::array()}, {"expressiveness", json::array()}};
    for (const auto& [key, _] : a.items()) {
        json mutated = a;
        mutated.erase(key);
        mutated[key + "_renamed"] = a[key];
        CHECK_FALSE(parse_audit(mutated.dump(), "caption"));
    }
    // refine
    json r{{"improved_caption", "x"},
           {"enhance_summary",
            {{"fixed_errors", json::array()},
             {"filled_missing", json::array()},
             {"dropped_forbidden", json::array()},
             {"timestamp_adjustments", json::array()}}}};
    for (const auto& key : {"improved_caption", "enhance_summary"}) {
        json mutated = r;
        mutated.erase(key);
        mutated[std::string(key) + "_renamed"] = r[key];
        CHECK_FALSE(parse_refine(mutated.dump()));
    }
    for (const auto& key :
         {"fixed_errors", "filled_missing", "dropped_forbidden", "timestamp_adjustments"}) {
        json mutated = r;
        mutated["enhance_summary"].erase(key);
        mutated["enhance_summary"][std::string(key) + "_renamed"] = json::array();
        CHECK_FALSE(parse_refine(mutated.dump()));
    }
}

TEST_CASE("parse-serialize round trip on randomized valid payloads") {
    std::mt19937_64 rng(31);
    auto word = [&rng]() {
        std::string t;
        for (int i = 0; i < 6; ++i) t += char('a' + rng() % 26);
        return t;
    };
    for (int trial = 0; trial < 50; ++trial) {
        // audit
        std::string caption = "At 1s, " + word() + " " + word() + ".";
        json payload{{"errors", json::array()},
                     {"missing", json::array()},
                     {"expressiveness", json::array()}};
        if (rng() % 2) {
            std::string snippet = caption.substr(7, 6);
            payload["errors"].push_back({{"snippet", snippet}, {"why", word()}});
        }
        if (rng() % 2) payload["missing"].push_back({{"what", word()}, {"why", word()}});
        if (rng() % 2) payload["expressiveness"].push_back(word());
        auto parsed = parse_audit(payload.dump(), caption);
        REQUIRE(parsed);
        CHECK(audit_report_to_json(parsed.value()) == payload);

        // verification
        json verification{{"non_speech_deficiency_specific", json::array()},
                          {"speech_deficiency_specific", json::array()},
                          {"caption", caption}};
        if (rng() % 2) verification["non_speech_deficiency_specific"].push_back(word());
        if (rng() % 2) verification["speech_deficiency_specific"].push_back(word());
        auto v = parse_verification(verification.dump());
        REQUIRE(v);
        json v_back{{"non_speech_deficiency_specific", v.value().non_speech_deficiency_specific},
                    {"speech_deficiency_specific", v.value().speech_deficiency_specific},
                    {"caption", v.value().caption}};
        CHECK(v_back == verification);

        // refine
        json refine{{"improved_caption", caption},
                    {"enhance_summary",
                     {{"fixed_errors", json::array()},
                      {"filled_missing", json::array()},
                      {"dropped_forbidden", json::array()},
                      {"timestamp_adjustments", json::array()}}}};
        if (rng() % 2) refine["enhance_summary"]["fixed_errors"].push_back(word());
        if (rng() % 2) refine["enhance_summary"]["timestamp_adjustments"].push_back(word());
        auto r = parse_refine(refine.dump());
        REQUIRE(r);
        json r_back{{"improved_caption", r.value().improved_caption},
                    {"enhance_summary",
                     {{"fixed_errors", r.value().enhance_summary.fixed_errors},
                      {"filled_missing", r.value().enhance_summary.filled_missing},
                      {"dropped_forbidden", r.value().enhance_summary.dropped_forbidden},
                      {"timestamp_adjustments", r.value().enhance_summary.timestamp_adjustments}}}};
        CHECK(r_back == refine);

        // grounding (structured two-field form)
        double start = double(rng() % 1000) / 10.0;
        double end = start + double(rng() % 500) / 10.0;
        json grounding{{"start", start}, {"end", end}};
        auto g = parse_grounding_answer(grounding.dump());
        REQUIRE(g);
        REQUIRE(g.value().interval.has_value());
        CHECK(json({{"start", g.value().interval->start_s},
                    {"end", g.value().interval->end_s}}) == grounding);
    }
}

TEST_CASE("parse_qa_answer accepts letters and N/A, rejects prose") {
    CHECK(parse_qa_answer(" B.").value().letter == 'B');
    CHECK(parse_qa_answer("(C)").value().letter == 'C');
    CHECK(parse_qa_answer("A").value().letter == 'A');
    CHECK_FALSE(parse_qa_answer("N/A").value().letter.has_value());
    CHECK_FALSE(parse_qa_answer("\"N/A\"").value().letter.has_value());
    CHECK_FALSE(parse_qa_answer("The answer is B because it rains."));
    CHECK_FALSE(parse_qa_answer("b"));   // lowercase is not a capital letter
    CHECK_FALSE(parse_qa_answer("AB"));
    CHECK_FALSE(parse_qa_answer(""));
}

TEST_CASE("parse_grounding_answer: structured form, fallback, N/A") {
    auto s = parse_grounding_answer(R"({"start": 4, "end": 9})");
    REQUIRE(s);
    REQUIRE(s.value().interval.has_value());
    CHECK(s.value().interval->start_s == doctest::Approx(4));
    CHECK(s.value().interval->end_s == doctest::Approx(9));

    auto fallback = parse_grounding_answer("from 4s to 9s");
    REQUIRE(fallback);
    REQUIRE(fallback.value().interval.has_value());
    CHECK(fallback.value().interval->start_s == doctest::Approx(4));
    CHECK(fallback.value().interval->end_s == doctest::Approx(9));

    auto decimals = parse_grounding_answer("roughly 4.5 until 9.25 seconds");
    REQUIRE(decimals);
    CHECK(decimals.value().interval->start_s == doctest::Approx(4.5));
    CHECK(decimals.value().interval->end_s == doctest::Approx(9.25));

    CHECK_FALSE(parse_grounding_answer("N/A").value().interval.has_value());
    CHECK_FALSE(parse_grounding_answer(R"({"start": 9, "end": 4})"));
    CHECK_FALSE(parse_grounding_answer(R"({"start": 4})"));
    CHECK_FALSE(parse_grounding_answer(R"({"start": 4, "end": 9, "why": "x"})"));
    CHECK_FALSE(parse_grounding_answer("no numbers at all"));
    CHECK_FALSE(parse_grounding_answer("only 5s mentioned"));
}
