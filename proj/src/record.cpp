#include "avcap/record.hpp"

#include <json.hpp>

namespace avcap {

using nlohmann::json;

namespace {

template <typename E>
Result<E> enum_from_string(std::string_view s, std::initializer_list<std::pair<std::string_view, E>> table,
                           const char* what) {
    for (const auto& [name, value] : table) {
        if (name == s) return Result<E>::ok(value);
    }
    return Result<E>::fail(std::string("unknown ") + what + " '" + std::string(s) + "'");
}

Result<std::string> get_string(const json& j, const char* key) {
    if (!j.contains(key)) return Result<std::string>::fail("missing field", key);
    if (!j[key].is_string()) return Result<std::string>::fail("field must be a string", key);
    return Result<std::string>::ok(j[key].get<std::string>());
}

Result<double> get_number(const json& j, const char* key) {
    if (!j.contains(key)) return Result<double>::fail("missing field", key);
    if (!j[key].is_number()) return Result<double>::fail("field must be a number", key);
    return Result<double>::ok(j[key].get<double>());
}

}  // namespace

std::string_view to_string(SourceDataset s) {
    switch (s) {
        case SourceDataset::llava_video: return "llava_video";
        case SourceDataset::finevideo: return "finevideo";
        case SourceDataset::other: return "other";
    }
    return "other";
}

std::string_view to_string(ModalityClaim m) {
    switch (m) {
        case ModalityClaim::audiovisual: return "audiovisual";
        case ModalityClaim::visual_only: return "visual_only";
        case ModalityClaim::speech_only: return "speech_only";
    }
    return "audiovisual";
}

std::string_view to_string(Provenance p) {
    switch (p) {
        case Provenance::source: return "source";
        case Provenance::ensembled: return "ensembled";
        case Provenance::completed: return "completed";
        case Provenance::refined: return "refined";
        case Provenance::decomposed: return "decomposed";
    }
    return "source";
}

std::string_view to_string(RecordStatus s) {
    switch (s) {
        case RecordStatus::ingested: return "ingested";
        case RecordStatus::annotated: return "annotated";
        case RecordStatus::ensembled: return "ensembled";
        case RecordStatus::verified: return "verified";
        case RecordStatus::audited: return "audited";
        case RecordStatus::refined: return "refined";
        case RecordStatus::retained: return "retained";
        case RecordStatus::dropped: return "dropped";
    }
    return "ingested";
}

Caption Caption::from_text(std::string text, AttributeSet attrs, Provenance prov) {
    Caption c;
    c.anchors = parse_anchors(text);
    c.text = std::move(text);
    c.attributes_present = attrs;
    c.provenance = prov;
    return c;
}

Result<bool> validate_record(const VideoRecord& record) {
    using R = Result<bool>;
    if (record.id.empty()) return R::fail("record id must be nonempty");
    if (!(record.duration_s > 0)) return R::fail("duration_s must be positive", record.id);
    double prev = -1;
    for (size_t i = 0; i < record.asr.utterances.size(); ++i) {
        const auto& u = record.asr.utterances[i];
        std::string path = record.id + ".asr[" + std::to_string(i) + "]";
        if (u.speaker.empty()) return R::fail("speaker label must be nonempty", path);
        if (u.start_s > u.end_s) return R::fail("utterance start_s > end_s", path);
        if (u.start_s < prev) return R::fail("utterances must be sorted by start_s", path);
        prev = u.start_s;
    }
    for (size_t i = 0; i < record.candidates.size(); ++i) {
        if (record.candidates[i].text.empty())
            return R::fail("candidate text must be nonempty",
                           record.id + ".candidates[" + std::to_string(i) + "]");
    }
    auto check_caption = [&](const Caption& c, const char* name) -> R {
        if (c.anchors != parse_anchors(c.text))
            return R::fail("stored anchors do not match a re-parse of the text",
                           record.id + "." + name);
        return R::ok(true);
    };
    if (record.draft_all_attr) {
        if (auto r = check_caption(*record.draft_all_attr, "draft_all_attr"); !r) return r;
    }
    if (record.verified_all_attr) {
        if (auto r = check_caption(*record.verified_all_attr, "verified_all_attr"); !r) return r;
    }
    if (record.final_all_attr) {
        if (auto r = check_caption(*record.final_all_attr, "final_all_attr"); !r) return r;
    }
    for (const auto& [attr, caption] : record.single_attr) {
        if (auto r = check_caption(caption, ("single_attr." + std::string(attribute_name(attr))).c_str());
            !r)
            return r;
    }
    if (record.status == RecordStatus::retained) {
        if (!record.final_all_attr)
            return R::fail("retained record must carry final_all_attr", record.id);
        if (record.single_attr.size() != kAttributeCount)
            return R::fail("retained record must carry all 8 single-attribute captions", record.id);
    }
    if (record.status == RecordStatus::dropped && record.drop_reason.empty())
        return R::fail("dropped record must carry a drop reason", record.id);
    return R::ok(true);
}

json caption_to_json(const Caption& caption) {
    json anchors = json::array();
    for (const auto& a : caption.anchors) {
        anchors.push_back({{"t_tenths", a.t_tenths},
                           {"decimal", a.decimal_written},
                           {"start", a.start},
                           {"end", a.end},
                           {"lexeme", a.lexeme}});
    }
    return json{{"text", caption.text},
                {"anchors", std::move(anchors)},
                {"attributes_present", caption.attributes_present.names()},
                {"provenance", std::string(to_string(caption.provenance))}};
}

Result<Caption> caption_from_json(const json& j) {
    using R = Result<Caption>;
    if (!j.is_object()) return R::fail("caption must be an object");
    Caption c;
    auto text = get_string(j, "text");
    if (!text) return R::fail(text.error().message, text.error().path);
    c.text = text.value();
    if (j.contains("attributes_present")) {
        for (const auto& name : j["attributes_present"]) {
            auto a = attribute_from_name(name.get<std::string>());
            if (!a) return R::fail("unknown attribute '" + name.get<std::string>() + "'",
                                   "attributes_present");
            c.attributes_present.insert(*a);
        }
    }
    auto prov = get_string(j, "provenance");
    if (!prov) return R::fail(prov.error().message, prov.error().path);
    auto p = enum_from_string<Provenance>(prov.value(),
                                          {{"source", Provenance::source},
                                           {"ensembled", Provenance::ensembled},
                                           {"completed", Provenance::completed},
                                           {"refined", Provenance::refined},
                                           {"decomposed", Provenance::decomposed}},
                                          "provenance");
    if (!p) return R::fail(p.error().message, "provenance");
    c.provenance = p.value();

    c.anchors = parse_anchors(c.text);
    if (j.contains("anchors")) {
        // The stored copy must match the re-parse exactly.
        std::vector<Anchor> stored;
        for (const auto& aj : j["anchors"]) {
            Anchor a;
            a.t_tenths = aj.at("t_tenths").get<int64_t>();
            a.decimal_written = aj.at("decimal").get<bool>();
            a.start = aj.at("start").get<size_t>();
            a.end = aj.at("end").get<size_t>();
            a.lexeme = aj.at("lexeme").get<std::string>();
            stored.push_back(std::move(a));
        }
        if (stored != c.anchors)
            return R::fail("stored anchors do not match a re-parse of the text", "anchors");
    }
    return R::ok(std::move(c));
}

json audit_report_to_json(const AuditReport& report) {
    json errors = json::array();
    for (const auto& f : report.errors) errors.push_back({{"snippet", f.snippet}, {"why", f.why}});
    json missing = json::array();
    for (const auto& f : report.missing) missing.push_back({{"what", f.snippet}, {"why", f.why}});
    return json{{"errors", std::move(errors)},
                {"missing", std::move(missing)},
                {"expressiveness", report.expressiveness}};
}

Result<AuditReport> audit_report_from_json(const json& j) {
    using R = Result<AuditReport>;
    AuditReport report;
    if (!j.is_object()) return R::fail("audit report must be an object");
    for (const auto& e : j.value("errors", json::array())) {
        report.errors.push_back({e.at("snippet").get<std::string>(), e.at("why").get<std::string>()});
    }
    for (const auto& m : j.value("missing", json::array())) {
        report.missing.push_back({m.at("what").get<std::string>(), m.at("why").get<std::string>()});
    }
    for (const auto& x : j.value("expressiveness", json::array())) {
        report.expressiveness.push_back(x.get<std::string>());
    }
    return R::ok(std::move(report));
}

json record_to_json(const VideoRecord& record) {
    json j{{"id", record.id},
           {"source", std::string(to_string(record.source))},
           {"duration_s", record.duration_s},
           {"media_ref", record.media_ref},
           {"status", std::string(to_string(record.status))}};
    json utterances = json::array();
    for (const auto& u : record.asr.utterances) {
        utterances.push_back(
            {{"speaker", u.speaker}, {"start_s", u.start_s}, {"end_s", u.end_s}, {"text", u.text}});
    }
    j["asr"] = json{{"utterances", std::move(utterances)}};
    json candidates = json::array();
    for (const auto& c : record.candidates) {
        candidates.push_back({{"annotator_id", c.annotator_id},
                              {"text", c.text},
                              {"modality_claim", std::string(to_string(c.modality_claim))}});
    }
    j["candidates"] = std::move(candidates);
    if (record.draft_all_attr) j["draft_all_attr"] = caption_to_json(*record.draft_all_attr);
    if (record.verified_all_attr) j["verified_all_attr"] = caption_to_json(*record.verified_all_attr);
    if (record.final_all_attr) j["final_all_attr"] = caption_to_json(*record.final_all_attr);
    if (!record.single_attr.empty()) {
        json single = json::object();
        for (const auto& [attr, caption] : record.single_attr)
            single[std::string(attribute_name(attr))] = caption_to_json(caption);
        j["single_attr"] = std::move(single);
    }
    if (!record.audits.empty()) {
        json audits = json::object();
        for (const auto& [attr, report] : record.audits)
            audits[std::string(attribute_name(attr))] = audit_report_to_json(report);
        j["audits"] = std::move(audits);
    }
    if (!record.drop_reason.empty()) j["drop_reason"] = record.drop_reason;
    if (!record.attr_divergence.empty()) j["attr_divergence"] = record.attr_divergence;
    return j;
}

Result<VideoRecord> record_from_json(const json& j) {
    using R = Result<VideoRecord>;
    if (!j.is_object()) return R::fail("record must be a JSON object");
    VideoRecord r;
    auto id = get_string(j, "id");
    if (!id) return R::fail(id.error().message, id.error().path);
    r.id = id.value();

    auto source = get_string(j, "source");
    if (!source) return R::fail(source.error().message, r.id + ".source");
    auto s = enum_from_string<SourceDataset>(source.value(),
                                             {{"llava_video", SourceDataset::llava_video},
                                              {"finevideo", SourceDataset::finevideo},
                                              {"other", SourceDataset::other}},
                                             "source");
    if (!s) return R::fail(s.error().message, r.id + ".source");
    r.source = s.value();

    auto duration = get_number(j, "duration_s");
    if (!duration) return R::fail(duration.error().message, r.id + ".duration_s");
    r.duration_s = duration.value();

    auto media = get_string(j, "media_ref");
    if (!media) return R::fail(media.error().message, r.id + ".media_ref");
    r.media_ref = media.value();

    if (j.contains("asr")) {
        const auto& asr = j["asr"];
        if (!asr.is_object() || !asr.contains("utterances") || !asr["utterances"].is_array())
            return R::fail("asr must be an object with an utterances array", r.id + ".asr");
        for (const auto& uj : asr["utterances"]) {
            AsrUtterance u;
            auto speaker = get_string(uj, "speaker");
            auto start = get_number(uj, "start_s");
            auto end = get_number(uj, "end_s");
            auto text = get_string(uj, "text");
            if (!speaker || !start || !end || !text)
                return R::fail("malformed utterance", r.id + ".asr.utterances");
            u.speaker = speaker.value();
            u.start_s = start.value();
            u.end_s = end.value();
            u.text = text.value();
            r.asr.utterances.push_back(std::move(u));
        }
    }

    for (const auto& cj : j.value("candidates", json::array())) {
        CandidateCaption c;
        auto annot = get_string(cj, "annotator_id");
        auto text = get_string(cj, "text");
        if (!annot || !text) return R::fail("malformed candidate", r.id + ".candidates");
        c.annotator_id = annot.value();
        c.text = text.value();
        auto claim = get_string(cj, "modality_claim");
        if (claim) {
            auto m = enum_from_string<ModalityClaim>(claim.value(),
                                                     {{"audiovisual", ModalityClaim::audiovisual},
                                                      {"visual_only", ModalityClaim::visual_only},
                                                      {"speech_only", ModalityClaim::speech_only}},
                                                     "modality_claim");
            if (!m) return R::fail(m.error().message, r.id + ".candidates");
            c.modality_claim = m.value();
        }
        r.candidates.push_back(std::move(c));
    }

    auto load_caption = [&](const char* key, std::optional<Caption>& out) -> R {
        if (!j.contains(key)) return R::ok(VideoRecord{});
        auto c = caption_from_json(j[key]);
        if (!c) return R::fail(c.error().message, r.id + "." + key);
        out = c.take();
        return R::ok(VideoRecord{});
    };
    if (auto ok = load_caption("draft_all_attr", r.draft_all_attr); !ok) return ok;
    if (auto ok = load_caption("verified_all_attr", r.verified_all_attr); !ok) return ok;
    if (auto ok = load_caption("final_all_attr", r.final_all_attr); !ok) return ok;

    if (j.contains("single_attr")) {
        for (const auto& [name, cj] : j["single_attr"].items()) {
            auto attr = attribute_from_name(name);
            if (!attr) return R::fail("unknown attribute '" + name + "'", r.id + ".single_attr");
            auto c = caption_from_json(cj);
            if (!c) return R::fail(c.error().message, r.id + ".single_attr." + name);
            r.single_attr.emplace(*attr, c.take());
        }
    }
    if (j.contains("audits")) {
        for (const auto& [name, aj] : j["audits"].items()) {
            auto attr = attribute_from_name(name);
            if (!attr) return R::fail("unknown attribute '" + name + "'", r.id + ".audits");
            auto rep = audit_report_from_json(aj);
            if (!rep) return R::fail(rep.error().message, r.id + ".audits." + name);
            r.audits.emplace(*attr, rep.take());
        }
    }

    auto status = get_string(j, "status");
    if (status) {
        auto st = enum_from_string<RecordStatus>(status.value(),
                                                 {{"ingested", RecordStatus::ingested},
                                                  {"annotated", RecordStatus::annotated},
                                                  {"ensembled", RecordStatus::ensembled},
                                                  {"verified", RecordStatus::verified},
                                                  {"audited", RecordStatus::audited},
                                                  {"refined", RecordStatus::refined},
                                                  {"retained", RecordStatus::retained},
                                                  {"dropped", RecordStatus::dropped}},
                                                 "status");
        if (!st) return R::fail(st.error().message, r.id + ".status");
        r.status = st.value();
    }
    r.drop_reason = j.value("drop_reason", "");
    for (const auto& d : j.value("attr_divergence", json::array()))
        r.attr_divergence.push_back(d.get<std::string>());

    if (auto valid = validate_record(r); !valid)
        return R::fail(valid.error().message, valid.error().path);
    return R::ok(std::move(r));
}

}  // namespace avcap
