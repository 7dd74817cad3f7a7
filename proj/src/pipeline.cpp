#include "avcap/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <deque>
#include <fstream>
#include <random>
#include <thread>

#include <json.hpp>

#include "avcap/grammar.hpp"
#include "avcap/schemas.hpp"

namespace avcap {

using nlohmann::json;

std::set<std::string> all_drop_reasons() {
    return {kDropAnnotationFailed, kDropEnsembleFailed, kDropFormatFailed,
            kDropAuditFailed,      kDropRefineFailed,   kDropRefineExhausted,
            kDropDecomposeFailed};
}

TraceLog::TraceLog(std::filesystem::path path) : path_(std::move(path)) {
    // Pick up prior events so a rerun keeps per-record sequences monotone.
    std::ifstream in(path_, std::ios::binary);
    std::string line;
    while (in && std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) continue;
        TraceEvent e;
        e.record_id = j.value("record_id", "");
        e.seq = j.value("seq", uint64_t(0));
        e.stage = j.value("stage", "");
        e.op = j.value("op", "");
        for (const auto& k : j.value("cache_keys", json::array())) e.cache_keys.push_back(k);
        for (const auto& f : j.value("findings", json::array())) e.findings.push_back(f);
        e.outcome = j.value("outcome", "");
        seq_[e.record_id] = std::max(seq_[e.record_id], e.seq + 1);
        events_.push_back(std::move(e));
    }
}

uint64_t TraceLog::next_seq(const std::string& record_id) {
    std::lock_guard<std::mutex> lock(mutex_);
    return seq_[record_id]++;
}

void TraceLog::append(TraceEvent event) {
    std::lock_guard<std::mutex> lock(mutex_);
    json j{{"record_id", event.record_id}, {"seq", event.seq},         {"stage", event.stage},
           {"op", event.op},               {"cache_keys", event.cache_keys},
           {"findings", event.findings},   {"outcome", event.outcome}};
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    out << j.dump() << "\n";
    events_.push_back(std::move(event));
}

void TraceLog::compact() {
    std::lock_guard<std::mutex> lock(mutex_);
    std::stable_sort(events_.begin(), events_.end(), [](const TraceEvent& a, const TraceEvent& b) {
        if (a.record_id != b.record_id) return a.record_id < b.record_id;
        return a.seq < b.seq;
    });
    auto tmp = path_;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        for (const auto& e : events_) {
            json j{{"record_id", e.record_id}, {"seq", e.seq},         {"stage", e.stage},
                   {"op", e.op},               {"cache_keys", e.cache_keys},
                   {"findings", e.findings},   {"outcome", e.outcome}};
            out << j.dump() << "\n";
        }
    }
    std::filesystem::rename(tmp, path_);
}

Pipeline::Pipeline(RecordStore& store, BackendClient& client, TemplateSet templates,
                   StageConfig config, TraceLog* trace)
    : store_(store),
      client_(client),
      templates_(std::move(templates)),
      config_(std::move(config)),
      trace_log_(trace) {}

const std::vector<std::string>& Pipeline::verify_rules_for(Attribute a) const {
    auto it = config_.verify_rules.find(a);
    if (it != config_.verify_rules.end() && !it->second.empty()) return it->second;
    return default_verify_rules(a);
}

std::string Pipeline::render_or_throw(PromptId id, const Bindings& bindings) const {
    auto rendered = templates_.render(id, bindings);
    if (!rendered)
        throw std::runtime_error("template render failed: " + rendered.error().to_string());
    return rendered.take();
}

void Pipeline::trace(const std::string& record_id, const char* stage, std::string op,
                     std::vector<std::string> cache_keys, std::vector<std::string> findings,
                     std::string outcome) {
    if (!trace_log_) return;
    TraceEvent e;
    e.record_id = record_id;
    e.seq = trace_log_->next_seq(record_id);
    e.stage = stage;
    e.op = std::move(op);
    e.cache_keys = std::move(cache_keys);
    e.findings = std::move(findings);
    e.outcome = std::move(outcome);
    trace_log_->append(std::move(e));
}

VideoRecord Pipeline::settle(StepOutcome outcome, bool* stalled_out) {
    if (!outcome.failure) return std::move(outcome.record);
    if (config_.drop_on.count(*outcome.failure)) {
        outcome.record.status = RecordStatus::dropped;
        outcome.record.drop_reason = *outcome.failure;
    } else if (stalled_out) {
        *stalled_out = true;
    }
    return std::move(outcome.record);
}

// ---------------------------------------------------------------------------
// Stage 1: multi-source annotation intake
// ---------------------------------------------------------------------------

Pipeline::StepOutcome Pipeline::step_annotate(VideoRecord record) {
    std::vector<std::string> keys;
    size_t failures = 0;
    for (const auto& backend_id : config_.backends.annotators) {
        bool supplied = std::any_of(record.candidates.begin(), record.candidates.end(),
                                    [&](const CandidateCaption& c) {
                                        return c.annotator_id == backend_id;
                                    });
        if (supplied) continue;
        BackendCall call{backend_id,
                         render_or_throw(PromptId::subtitle_caption,
                                         {{"duration_s", canonical_time_lexeme(
                                               int64_t(record.duration_s * 10.0 + 0.5))},
                                          {"asr", serialize_asr(record.asr)}}),
                         {record.media_ref}};
        const BackendSpec* spec = client_.spec(backend_id);
        if (spec) keys.push_back(cache_key(*spec, call));
        auto response = client_.call(call);
        if (!response || response.value().raw_text.empty()) {
            ++failures;
            continue;
        }
        record.candidates.push_back(
            {backend_id, response.value().raw_text, ModalityClaim::audiovisual});
    }

    if (record.candidates.size() < 2) {
        trace(record.id, "s1", "annotate", keys, {},
              "failed: fewer than 2 candidates (" + std::to_string(failures) +
                  " annotator failure(s))");
        return {std::move(record), kDropAnnotationFailed};
    }
    record.status = RecordStatus::annotated;
    trace(record.id, "s1", "annotate", keys, {},
          "ok: " + std::to_string(record.candidates.size()) + " candidates");
    return {std::move(record), std::nullopt};
}

VideoRecord Pipeline::stage1_annotate(VideoRecord record) {
    return settle(step_annotate(std::move(record)));
}

// ---------------------------------------------------------------------------
// Stage 2: ensembling, deterministic verification, completion
// ---------------------------------------------------------------------------

Pipeline::StepOutcome Pipeline::step_merge(VideoRecord record) {
    BackendCall call{config_.backends.integrator,
                     render_or_throw(PromptId::merge,
                                     {{"duration_s", canonical_time_lexeme(
                                           int64_t(record.duration_s * 10.0 + 0.5))},
                                      {"asr", serialize_asr(record.asr)},
                                      {"candidates", serialize_candidates(record.candidates)}}),
                     {record.media_ref}};
    std::vector<std::string> keys;
    if (const BackendSpec* spec = client_.spec(call.backend_id)) keys.push_back(cache_key(*spec, call));
    auto response = client_.call(call);
    if (!response || response.value().raw_text.empty()) {
        trace(record.id, "s2", "merge", keys, {},
              "failed: " + (response ? "empty draft" : response.error().to_string()));
        return {std::move(record), kDropEnsembleFailed};
    }
    record.draft_all_attr =
        Caption::from_text(response.value().raw_text, AttributeSet::all(), Provenance::ensembled);
    record.status = RecordStatus::ensembled;
    trace(record.id, "s2", "merge", keys, {}, "ok");
    return {std::move(record), std::nullopt};
}

Pipeline::StepOutcome Pipeline::step_verify(VideoRecord record) {
    const Caption& draft = *record.draft_all_attr;

    // Deterministic checks run before the judge call; findings are recorded,
    // not fatal (they feed the stage-3 refinement context).
    std::vector<std::string> findings;
    for (const auto& v :
         check_temporal(draft, record.duration_s, record.asr, config_.consistency_policy)) {
        findings.push_back(std::string(violation_kind_name(v.kind)) + ": " + v.detail);
    }
    auto alignment = align_quotes(draft, record.asr, config_.consistency_policy);
    if (alignment.unmatched_count > 0) {
        findings.push_back(std::to_string(alignment.unmatched_count) +
                           " quoted speech span(s) not grounded in the transcript");
    }

    BackendCall call{config_.backends.verifier,
                     render_or_throw(PromptId::verify_complete,
                                     {{"current_caption", draft.text},
                                      {"asr", serialize_asr(record.asr)},
                                      {"candidates", serialize_candidates(record.candidates)}}),
                     {record.media_ref}};
    std::vector<std::string> keys;
    if (const BackendSpec* spec = client_.spec(call.backend_id)) keys.push_back(cache_key(*spec, call));
    auto outcome = client_.call_structured(call, verification_schema());
    if (!outcome.ok) {
        trace(record.id, "s2", "verify_complete", keys, findings, "failed: " + outcome.error);
        return {std::move(record), kDropEnsembleFailed};
    }
    auto report = parse_verification(outcome.response.raw_text);
    for (const auto& d : report.value().non_speech_deficiency_specific)
        findings.push_back("non-speech deficiency: " + d);
    for (const auto& d : report.value().speech_deficiency_specific)
        findings.push_back("speech deficiency: " + d);

    auto normalized =
        normalize_caption(report.value().caption, record.duration_s, config_.format_policy);
    if (normalized.unfixed.size() > config_.max_unfixed_violations) {
        trace(record.id, "s2", "verify_complete", keys, findings,
              "failed: " + std::to_string(normalized.unfixed.size()) +
                  " unfixable format violations");
        return {std::move(record), kDropFormatFailed};
    }
    for (const auto& v : normalized.unfixed)
        findings.push_back(std::string("unfixed ") + std::string(violation_kind_name(v.kind)) +
                           ": " + v.detail);

    record.verified_all_attr =
        Caption::from_text(normalized.text, AttributeSet::all(), Provenance::completed);
    record.status = RecordStatus::verified;
    trace(record.id, "s2", "verify_complete", keys, findings, "ok");
    return {std::move(record), std::nullopt};
}

VideoRecord Pipeline::stage2_ensemble(VideoRecord record) {
    auto merged = step_merge(std::move(record));
    if (merged.failure) return settle(std::move(merged));
    return settle(step_verify(std::move(merged.record)));
}

// ---------------------------------------------------------------------------
// Stage 3: attribute-wise audit, targeted refinement, decomposition
// ---------------------------------------------------------------------------


Pipeline::StepOutcome Pipeline::step_audit(VideoRecord record) {
    const std::string& caption = record.verified_all_attr->text;
    for (Attribute attr : kAllAttributes) {
        BackendCall call{config_.backends.auditor,
                         render_or_throw(PromptId::audit,
                                         {{"attribute", std::string(attribute_name(attr))},
                                          {"verify_list",
                                           serialize_verify_list(verify_rules_for(attr))},
                                          {"asr", serialize_asr(record.asr)},
                                          {"caption", caption}}),
                         {record.media_ref}};
        std::vector<std::string> keys;
        if (const BackendSpec* spec = client_.spec(call.backend_id))
            keys.push_back(cache_key(*spec, call));
        auto outcome = client_.call_structured(call, audit_schema(caption));
        if (!outcome.ok) {
            trace(record.id, "s3", std::string("audit:") + std::string(attribute_name(attr)), keys,
                  outcome.raw_attempts, "failed: " + outcome.error);
            return {std::move(record), kDropAuditFailed};
        }
        auto report = parse_audit(outcome.response.raw_text, caption);
        record.audits[attr] = report.take();
        trace(record.id, "s3", std::string("audit:") + std::string(attribute_name(attr)), keys, {},
              record.audits[attr].clean() ? "ok: clean" : "ok: findings");
    }
    record.status = RecordStatus::audited;
    return {std::move(record), std::nullopt};
}

VideoRecord Pipeline::stage3_audit(VideoRecord record) {
    return settle(step_audit(std::move(record)));
}

Pipeline::StepOutcome Pipeline::step_refine(VideoRecord record) {
    auto dirty_attrs = [&]() {
        std::vector<Attribute> out;
        for (const auto& [attr, report] : record.audits) {
            if (!report.clean()) out.push_back(attr);
        }
        return out;
    };

    Caption current = *record.verified_all_attr;
    std::vector<Attribute> dirty = dirty_attrs();

    if (dirty.empty()) {
        // Clean audits short-circuit: the final caption IS the verified one.
        record.final_all_attr = current;
        record.status = RecordStatus::refined;
        trace(record.id, "s3", "refine", {}, {}, "ok: clean audits, no refinement");
        return {std::move(record), std::nullopt};
    }

    // Deterministic consistency findings join the judge findings as extra
    // error entries in the edit specification.
    std::string consistency_block;
    for (const auto& v :
         check_temporal(current, record.duration_s, record.asr, config_.consistency_policy)) {
        consistency_block += "  error: " + std::string(violation_kind_name(v.kind)) + " (" +
                             v.detail + ")\n";
    }

    for (int round = 1; round <= config_.max_refine_rounds; ++round) {
        std::map<Attribute, AuditReport> dirty_reports;
        for (Attribute a : dirty) dirty_reports[a] = record.audits[a];
        std::string audit_payload = serialize_audit_reports(dirty_reports);
        if (!consistency_block.empty())
            audit_payload += "Temporal consistency:\n" + consistency_block;

        BackendCall call{config_.backends.refiner,
                         render_or_throw(PromptId::refine, {{"caption", current.text},
                                                            {"audit_report", audit_payload}}),
                         {record.media_ref}};
        std::vector<std::string> keys;
        if (const BackendSpec* spec = client_.spec(call.backend_id))
            keys.push_back(cache_key(*spec, call));
        auto outcome = client_.call_structured(call, refine_schema(current.text));
        if (!outcome.ok) {
            trace(record.id, "s3", "refine round " + std::to_string(round), keys,
                  outcome.raw_attempts, "failed: " + outcome.error);
            return {std::move(record), kDropRefineFailed};
        }
        auto refined = parse_refine(outcome.response.raw_text);
        const RefineOutput& output = refined.value();

        auto normalized =
            normalize_caption(output.improved_caption, record.duration_s, config_.format_policy);
        current = Caption::from_text(normalized.text, AttributeSet::all(), Provenance::refined);
        trace(record.id, "s3", "refine round " + std::to_string(round), keys,
              {std::to_string(output.enhance_summary.fixed_errors.size()) + " fixed, " +
               std::to_string(output.enhance_summary.filled_missing.size()) + " filled, " +
               std::to_string(output.enhance_summary.timestamp_adjustments.size()) +
               " timestamp adjustment(s)"},
              "ok");

        // Re-audit only the previously dirty attributes.
        for (Attribute attr : dirty) {
            BackendCall audit_call{
                config_.backends.auditor,
                render_or_throw(PromptId::audit,
                                {{"attribute", std::string(attribute_name(attr))},
                                 {"verify_list", serialize_verify_list(verify_rules_for(attr))},
                                 {"asr", serialize_asr(record.asr)},
                                 {"caption", current.text}}),
                {record.media_ref}};
            auto audit_outcome = client_.call_structured(audit_call, audit_schema(current.text));
            if (!audit_outcome.ok) {
                trace(record.id, "s3",
                      "re-audit:" + std::string(attribute_name(attr)) + " round " +
                          std::to_string(round),
                      {}, audit_outcome.raw_attempts, "failed: " + audit_outcome.error);
                return {std::move(record), kDropAuditFailed};
            }
            record.audits[attr] =
                parse_audit(audit_outcome.response.raw_text, current.text).take();
        }
        dirty = dirty_attrs();
        consistency_block.clear();  // round 1 carried the stage-2 findings
        if (dirty.empty()) break;
    }

    if (!dirty.empty()) {
        std::vector<std::string> names;
        for (Attribute a : dirty) names.emplace_back(attribute_name(a));
        trace(record.id, "s3", "refine", {}, names,
              "failed: audits still dirty after " + std::to_string(config_.max_refine_rounds) +
                  " round(s)");
        return {std::move(record), kDropRefineExhausted};
    }

    record.final_all_attr = std::move(current);
    record.status = RecordStatus::refined;
    return {std::move(record), std::nullopt};
}

// Retention gate: a retained record's final caption must validate with zero
// violations. Fixable kinds were already repaired by normalization, so
// anything left is a violation normalization could not fix.
Pipeline::StepOutcome Pipeline::gate_final_format(VideoRecord record) {
    auto violations = validate_caption(record.final_all_attr->text, record.duration_s,
                                       config_.format_policy);
    if (!violations.empty()) {
        std::vector<std::string> findings;
        for (const auto& v : violations)
            findings.push_back(std::string(violation_kind_name(v.kind)) + ": " + v.detail);
        trace(record.id, "s3", "format_gate", {}, findings,
              "failed: final caption still has violations");
        return {std::move(record), kDropFormatFailed};
    }
    return {std::move(record), std::nullopt};
}

Pipeline::StepOutcome Pipeline::step_decompose(VideoRecord record) {
    auto gated = gate_final_format(std::move(record));
    if (gated.failure) return gated;
    record = std::move(gated.record);
    const std::string& final_text = record.final_all_attr->text;
    for (Attribute attr : kAllAttributes) {
        BackendCall call{config_.backends.decomposer,
                         render_or_throw(PromptId::decompose,
                                         {{"attribute", std::string(attribute_name(attr))},
                                          {"caption", final_text}}),
                         {record.media_ref}};
        std::vector<std::string> keys;
        if (const BackendSpec* spec = client_.spec(call.backend_id))
            keys.push_back(cache_key(*spec, call));
        auto outcome = client_.call_structured(call, decompose_schema(final_text));
        if (!outcome.ok) {
            trace(record.id, "s3", "decompose:" + std::string(attribute_name(attr)), keys,
                  outcome.raw_attempts, "failed: " + outcome.error);
            return {std::move(record), kDropDecomposeFailed};
        }
        AttributeSet only;
        only.insert(attr);
        record.single_attr[attr] =
            Caption::from_text(outcome.response.raw_text, only, Provenance::decomposed);
        trace(record.id, "s3", "decompose:" + std::string(attribute_name(attr)), keys, {}, "ok");
    }

    // Divergence flag: a stored single-attribute caption not contained in the
    // final caption is kept but reported.
    record.attr_divergence.clear();
    auto squash = [](std::string_view s) {
        std::string out;
        bool space = false;
        for (char c : s) {
            if (c == ' ' || c == '\n' || c == '\t') {
                space = true;
                continue;
            }
            if (space && !out.empty()) out += ' ';
            space = false;
            out += c;
        }
        return out;
    };
    std::string squashed_final = squash(final_text);
    for (const auto& [attr, caption] : record.single_attr) {
        if (!caption.text.empty() && squashed_final.find(squash(caption.text)) == std::string::npos)
            record.attr_divergence.emplace_back(attribute_name(attr));
    }

    record.status = RecordStatus::retained;
    return {std::move(record), std::nullopt};
}

VideoRecord Pipeline::stage3_refine(VideoRecord record) {
    auto refined = step_refine(std::move(record));
    if (refined.failure) return settle(std::move(refined));
    return settle(step_decompose(std::move(refined.record)));
}

// ---------------------------------------------------------------------------
// Batch driver
// ---------------------------------------------------------------------------

namespace {

// Which micro-step a record in `status` needs next, expressed as the stage
// number it belongs to; 0 when the record is terminal.
int stage_of_next_step(RecordStatus status) {
    switch (status) {
        case RecordStatus::ingested: return 1;
        case RecordStatus::annotated: return 2;
        case RecordStatus::ensembled: return 2;
        case RecordStatus::verified: return 3;
        case RecordStatus::audited: return 3;
        case RecordStatus::refined: return 3;
        case RecordStatus::retained:
        case RecordStatus::dropped: return 0;
    }
    return 0;
}

}  // namespace

RunSummary Pipeline::run(const RunOptions& options) {
    RunSummary summary;

    std::vector<std::string> work;
    for (const auto& id : store_.ids()) {
        auto record = store_.load_record(id);
        if (!record) continue;
        int next = stage_of_next_step(record.value().status);
        if (next != 0 && next >= options.from_stage && next <= options.to_stage) work.push_back(id);
    }
    if (options.seed != 0) {
        std::mt19937_64 rng(options.seed);
        std::shuffle(work.begin(), work.end(), rng);
    }
    if (options.limit > 0 && work.size() > options.limit) work.resize(options.limit);

    if (options.dry_run) {
        for (const auto& id : work) {
            auto record = store_.load_record(id);
            summary.planned.push_back(id + ": next stage " +
                                      std::to_string(stage_of_next_step(record.value().status)) +
                                      " (status " +
                                      std::string(to_string(record.value().status)) + ")");
        }
    } else {
        std::deque<std::string> queue(work.begin(), work.end());
        std::mutex queue_mutex;
        std::atomic<size_t> processed{0};
        std::atomic<size_t> stalled{0};

        auto worker = [&]() {
            while (true) {
                std::string id;
                {
                    std::lock_guard<std::mutex> lock(queue_mutex);
                    if (queue.empty()) return;
                    id = std::move(queue.front());
                    queue.pop_front();
                }
                // One record's failure never aborts the run: unexpected
                // exceptions park the record like a non-dropping failure.
                bool advanced = false;
                try {
                    VideoRecord record = store_.load_record(id).take();
                    while (true) {
                        int next = stage_of_next_step(record.status);
                        if (next == 0 || next < options.from_stage || next > options.to_stage)
                            break;
                        StepOutcome outcome;
                        switch (record.status) {
                            case RecordStatus::ingested:
                                outcome = step_annotate(std::move(record));
                                break;
                            case RecordStatus::annotated:
                                outcome = step_merge(std::move(record));
                                break;
                            case RecordStatus::ensembled:
                                outcome = step_verify(std::move(record));
                                break;
                            case RecordStatus::verified:
                                outcome = step_audit(std::move(record));
                                break;
                            case RecordStatus::audited:
                                outcome = step_refine(std::move(record));
                                break;
                            case RecordStatus::refined:
                                outcome = step_decompose(std::move(record));
                                break;
                            default: outcome = {std::move(record), std::nullopt}; break;
                        }
                        bool stall = false;
                        record = settle(std::move(outcome), &stall);
                        if (stall) {
                            stalled.fetch_add(1);
                            break;  // parked at current status for a later rerun
                        }
                        store_.save_record(record);  // checkpoint
                        advanced = true;
                        if (record.status == RecordStatus::dropped) break;
                    }
                } catch (const std::exception& e) {
                    trace(id, "run", "record", {}, {e.what()}, "failed: unexpected exception");
                    stalled.fetch_add(1);
                }
                if (advanced) processed.fetch_add(1);
            }
        };

        size_t n_threads = std::max(1, config_.max_concurrency);
        std::vector<std::thread> pool;
        pool.reserve(n_threads);
        for (size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
        summary.processed = processed.load();
        summary.stalled = stalled.load();

        store_.compact();
        if (trace_log_) trace_log_->compact();
    }

    auto manifest = store_.manifest();
    summary.status_counts = manifest.status_counts;
    summary.corpus_size = 0;
    for (const auto& [_, count] : manifest.status_counts) summary.corpus_size += count;

    std::vector<AuditSet> audit_sets;
    for (const auto& id : store_.ids()) {
        auto record = store_.load_record(id);
        if (!record) continue;
        if (record.value().status == RecordStatus::dropped)
            summary.drop_reasons[record.value().drop_reason]++;
        if (!record.value().audits.empty()) {
            AuditSet set;
            for (const auto& [attr, report] : record.value().audits) set[attr] = report;
            audit_sets.push_back(std::move(set));
        }
    }
    if (!audit_sets.empty()) {
        if (auto q = stage_quality(audit_sets)) summary.quality = q.value();
    }
    summary.backend = client_.stats();
    return summary;
}

}  // namespace avcap
