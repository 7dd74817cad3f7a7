#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "avcap/backend.hpp"
#include "avcap/consistency.hpp"
#include "avcap/metrics.hpp"
#include "avcap/prompts.hpp"
#include "avcap/store.hpp"

namespace avcap {

// Drop reasons, also the keys accepted by StageConfig::drop_on.
inline constexpr const char* kDropAnnotationFailed = "annotation_failed";
inline constexpr const char* kDropEnsembleFailed = "ensemble_failed";
inline constexpr const char* kDropFormatFailed = "format_failed";
inline constexpr const char* kDropAuditFailed = "audit_failed";
inline constexpr const char* kDropRefineFailed = "refine_failed";
inline constexpr const char* kDropRefineExhausted = "refine_exhausted";
inline constexpr const char* kDropDecomposeFailed = "decompose_failed";

std::set<std::string> all_drop_reasons();

struct StageBackends {
    std::vector<std::string> annotators;
    std::string integrator;  // stage-2 merge
    std::string verifier;    // stage-2 verify + complete
    std::string auditor;     // stage-3 per-attribute audit
    std::string refiner;     // stage-3 targeted refinement
    std::string decomposer;  // stage-3 single-attribute decomposition
};

struct StageConfig {
    StageBackends backends;
    int max_refine_rounds = 2;
    // Failure kinds that terminate a record as dropped; kinds not listed
    // leave the record parked at its current status for a later rerun.
    std::set<std::string> drop_on = all_drop_reasons();
    int max_concurrency = 1;
    // Stage-2 format gate: more unfixable violations than this drops the record.
    size_t max_unfixed_violations = 8;
    FormatPolicy format_policy;
    ConsistencyPolicy consistency_policy;
    // Per-attribute VERIFY lists; empty falls back to the built-in defaults.
    std::map<Attribute, std::vector<std::string>> verify_rules;
};

struct TraceEvent {
    std::string record_id;
    uint64_t seq = 0;  // per-record, monotonically increasing
    std::string stage;
    std::string op;
    std::vector<std::string> cache_keys;
    std::vector<std::string> findings;
    std::string outcome;
};

// Append-only JSONL trace beside the record store. compact() rewrites it
// sorted by (record_id, seq) so reruns compare byte-identical.
class TraceLog {
public:
    explicit TraceLog(std::filesystem::path path);
    void append(TraceEvent event);
    void compact();
    uint64_t next_seq(const std::string& record_id);

private:
    std::filesystem::path path_;
    std::mutex mutex_;
    std::map<std::string, uint64_t> seq_;
    std::vector<TraceEvent> events_;
};

struct RunOptions {
    int from_stage = 1;
    int to_stage = 3;
    size_t limit = 0;  // max records to process this run; 0 = all
    bool dry_run = false;
    uint64_t seed = 0;  // work-order shuffle; 0 keeps sorted id order
};

struct RunSummary {
    std::map<std::string, size_t> status_counts;
    std::map<std::string, size_t> drop_reasons;
    size_t corpus_size = 0;
    size_t processed = 0;  // records advanced at least one step this run
    size_t stalled = 0;    // failures whose kind was not in drop_on
    std::vector<std::string> planned;  // dry-run work list
    std::optional<StageQuality> quality;  // over records that carry audits
    ClientStats backend;
};

class Pipeline {
public:
    Pipeline(RecordStore& store, BackendClient& client, TemplateSet templates, StageConfig config,
             TraceLog* trace = nullptr);

    // Stage operations on an in-memory record. On failure the record comes
    // back dropped (reason set) when the failure kind is in drop_on,
    // untouched otherwise.
    VideoRecord stage1_annotate(VideoRecord record);
    VideoRecord stage2_ensemble(VideoRecord record);  // merge + verify/complete
    VideoRecord stage3_audit(VideoRecord record);     // fills record.audits
    VideoRecord stage3_refine(VideoRecord record);    // refine loop + decomposition

    // Batch driver with per-record checkpointing; rerunning resumes from the
    // last checkpointed status.
    RunSummary run(const RunOptions& options);

    const StageConfig& config() const { return config_; }

private:
    struct StepOutcome {
        VideoRecord record;
        std::optional<std::string> failure;  // drop-reason kind on failure
    };

    StepOutcome step_annotate(VideoRecord record);
    StepOutcome step_merge(VideoRecord record);
    StepOutcome step_verify(VideoRecord record);
    StepOutcome step_audit(VideoRecord record);
    StepOutcome step_refine(VideoRecord record);
    StepOutcome step_decompose(VideoRecord record);
    StepOutcome gate_final_format(VideoRecord record);

    // Applies drop_on to a failed step.
    VideoRecord settle(StepOutcome outcome, bool* stalled_out = nullptr);

    const std::vector<std::string>& verify_rules_for(Attribute a) const;
    std::string render_or_throw(PromptId id, const Bindings& bindings) const;
    void trace(const std::string& record_id, const char* stage, std::string op,
               std::vector<std::string> cache_keys, std::vector<std::string> findings,
               std::string outcome);

    RecordStore& store_;
    BackendClient& client_;
    TemplateSet templates_;
    StageConfig config_;
    TraceLog* trace_log_;
};

}  // namespace avcap
