#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "avcap/attributes.hpp"
#include "avcap/grammar.hpp"
#include "avcap/result.hpp"

namespace avcap {

enum class SourceDataset : uint8_t { llava_video, finevideo, other };
enum class ModalityClaim : uint8_t { audiovisual, visual_only, speech_only };
enum class Provenance : uint8_t { source, ensembled, completed, refined, decomposed };

enum class RecordStatus : uint8_t {
    ingested = 0,
    annotated,
    ensembled,
    verified,
    audited,
    refined,
    retained,
    dropped,
};

std::string_view to_string(SourceDataset);
std::string_view to_string(ModalityClaim);
std::string_view to_string(Provenance);
std::string_view to_string(RecordStatus);

struct AsrUtterance {
    std::string speaker;
    double start_s = 0;
    double end_s = 0;
    std::string text;

    bool operator==(const AsrUtterance&) const = default;
};

struct AsrTranscript {
    std::vector<AsrUtterance> utterances;  // sorted by start_s

    bool operator==(const AsrTranscript&) const = default;
};

struct CandidateCaption {
    std::string annotator_id;
    std::string text;
    ModalityClaim modality_claim = ModalityClaim::audiovisual;

    bool operator==(const CandidateCaption&) const = default;
};

// A timestamped narrative. `anchors` is derivable from `text`; the stored
// copy must match a re-parse exactly, which decode enforces.
struct Caption {
    std::string text;
    std::vector<Anchor> anchors;
    AttributeSet attributes_present;
    Provenance provenance = Provenance::source;

    static Caption from_text(std::string text, AttributeSet attrs, Provenance prov);
    bool operator==(const Caption&) const = default;
};

// Per-attribute audit findings, the strict three-list schema.
struct AuditFinding {
    std::string snippet;  // for errors: verbatim caption text
    std::string why;

    bool operator==(const AuditFinding&) const = default;
};

struct AuditReport {
    std::vector<AuditFinding> errors;    // snippet + why
    std::vector<AuditFinding> missing;   // what + why (snippet field holds "what")
    std::vector<std::string> expressiveness;

    bool clean() const { return errors.empty() && missing.empty(); }
    bool operator==(const AuditReport&) const = default;
};

struct VideoRecord {
    std::string id;
    SourceDataset source = SourceDataset::other;
    double duration_s = 0;
    std::string media_ref;
    AsrTranscript asr;
    std::vector<CandidateCaption> candidates;

    std::optional<Caption> draft_all_attr;     // stage-2 merged draft
    std::optional<Caption> verified_all_attr;  // stage-2 verified + completed
    std::optional<Caption> final_all_attr;     // stage-3 refined
    std::map<Attribute, Caption> single_attr;
    std::map<Attribute, AuditReport> audits;

    RecordStatus status = RecordStatus::ingested;
    std::string drop_reason;  // set iff status == dropped
    // Attributes whose stored single-attribute caption is not contained in
    // the final caption; kept for inspection instead of guessing intent.
    std::vector<std::string> attr_divergence;

    bool operator==(const VideoRecord&) const = default;
};

// Structural validation per the record invariants (positive duration, sorted
// transcript, retained-record completeness, anchors match re-parse).
Result<bool> validate_record(const VideoRecord& record);

nlohmann::json record_to_json(const VideoRecord& record);
Result<VideoRecord> record_from_json(const nlohmann::json& j);

nlohmann::json caption_to_json(const Caption& caption);
Result<Caption> caption_from_json(const nlohmann::json& j);

nlohmann::json audit_report_to_json(const AuditReport& report);
Result<AuditReport> audit_report_from_json(const nlohmann::json& j);

}  // namespace avcap
