// avcap: batch curation of timestamped audiovisual captions.
//
// Subcommands map onto the library stages: ingest, run, audit-only, finalize,
// stats, build-curriculum, eval-qa, eval-grounding, validate-captions.
// Every command prints a JSON summary to stdout and human-readable tables to
// stderr; exit code 0 means success.

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "avcap/config.hpp"
#include "avcap/curriculum.hpp"
#include "avcap/grammar.hpp"
#include "avcap/metrics.hpp"
#include "avcap/pipeline.hpp"
#include "avcap/schemas.hpp"
#include "avcap/store.hpp"

using namespace avcap;
using nlohmann::json;

namespace {

struct CommonOptions {
    std::string config_path;
    std::string format = "json";
    uint64_t seed = 0;
    size_t limit = 0;
    bool dry_run = false;
};

int fail(const std::string& message) {
    json err{{"error", message}};
    std::cout << err.dump() << std::endl;
    std::cerr << "error: " << message << std::endl;
    return 1;
}

PipelineConfig require_config(const CommonOptions& options) {
    auto config = load_config(options.config_path);
    if (!config) throw std::runtime_error("bad config: " + config.error().to_string());
    return config.take();
}

// JSON always goes to stdout (pretty by default, compact under
// --format table for log-line consumption); tables go to stderr.
int g_json_indent = 2;

void emit(const json& summary, const std::string& table) {
    std::cout << summary.dump(g_json_indent) << std::endl;
    std::cerr << table;
}

json summary_to_json(const RunSummary& summary) {
    json j{{"status_counts", summary.status_counts},
           {"drop_reasons", summary.drop_reasons},
           {"corpus_size", summary.corpus_size},
           {"processed", summary.processed},
           {"stalled", summary.stalled},
           {"backend",
            {{"calls", summary.backend.calls},
             {"transport_sends", summary.backend.transport_sends},
             {"cache_hits", summary.backend.cache_hits},
             {"structured_retries", summary.backend.structured_retries}}}};
    if (!summary.planned.empty()) j["planned"] = summary.planned;
    if (summary.quality) {
        j["stage_quality"] = {{"no_error_rate", summary.quality->no_error_rate},
                              {"no_missing_rate", summary.quality->no_missing_rate},
                              {"clean_rate", summary.quality->clean_rate},
                              {"expressiveness_rate", summary.quality->expressiveness_rate},
                              {"n", summary.quality->n}};
    }
    return j;
}

std::string summary_table(const RunSummary& summary) {
    std::ostringstream out;
    out << "status            count\n";
    out << "----------------  -----\n";
    for (const auto& [status, count] : summary.status_counts) {
        out << status;
        for (size_t i = status.size(); i < 18; ++i) out << ' ';
        out << count << "\n";
    }
    for (const auto& [reason, count] : summary.drop_reasons)
        out << "  dropped(" << reason << "): " << count << "\n";
    if (summary.quality) {
        out << "no-error " << summary.quality->no_error_rate << "  no-missing "
            << summary.quality->no_missing_rate << "  clean " << summary.quality->clean_rate
            << "  (n=" << summary.quality->n << ")\n";
    }
    return out.str();
}

struct Runtime {
    std::unique_ptr<StoreLock> lock;
    std::unique_ptr<RecordStore> store;
    std::unique_ptr<BackendClient> client;
    std::unique_ptr<TraceLog> trace;
    std::unique_ptr<Pipeline> pipeline;
};

Runtime open_runtime(const PipelineConfig& config) {
    Runtime rt;
    rt.lock = std::make_unique<StoreLock>(config.store_root);
    rt.store = std::make_unique<RecordStore>(config.store_root);
    rt.store->open();
    rt.client = std::make_unique<BackendClient>(config.cache_root, system_clock());
    for (const auto& spec : config.backends) rt.client->register_backend(spec);
    rt.trace = std::make_unique<TraceLog>(config.store_root / "trace.jsonl");
    rt.pipeline = std::make_unique<Pipeline>(*rt.store, *rt.client, load_templates(config),
                                             config.stage, rt.trace.get());
    return rt;
}

std::string solver_id(const PipelineConfig& config, BackendKind kind) {
    for (const auto& spec : config.backends) {
        if (spec.kind == kind) return spec.id;
    }
    return "";
}

// Solver-backed evaluation over a JSONL task file.
int run_eval(const CommonOptions& common, const std::string& input, bool grounding) {
    auto config = require_config(common);
    auto rt = open_runtime(config);
    auto templates = load_templates(config);

    std::ifstream in(input, std::ios::binary);
    if (!in) return fail("cannot read eval file " + input);
    std::string backend = solver_id(
        config, grounding ? BackendKind::grounding_solver : BackendKind::qa_solver);
    if (backend.empty()) return fail("config has no solver backend for this evaluation");

    std::vector<QaOutcome> qa_answers;
    std::vector<char> qa_golds;
    std::vector<GroundingPrediction> preds;
    std::vector<Interval> golds;
    size_t parse_failures = 0;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) return fail("bad JSON at line " + std::to_string(line_no));

        if (grounding) {
            auto rendered = templates.render(PromptId::grounding_judge,
                                             {{"caption", j.at("caption").get<std::string>()},
                                              {"query", j.at("query").get<std::string>()}});
            if (!rendered) return fail(rendered.error().to_string());
            auto response = rt.client->call({backend, rendered.take(), {}});
            if (!response) return fail(response.error().to_string());
            auto answer = parse_grounding_answer(response.value().raw_text);
            if (!answer) {
                ++parse_failures;
                preds.push_back(std::nullopt);  // scored as IoU 0
            } else {
                preds.push_back(answer.value().interval);
            }
            golds.push_back({j.at("gold_start").get<double>(), j.at("gold_end").get<double>()});
        } else {
            auto rendered = templates.render(PromptId::qa_judge,
                                             {{"caption", j.at("caption").get<std::string>()},
                                              {"question", j.at("question").get<std::string>()},
                                              {"choices", j.at("choices").get<std::string>()}});
            if (!rendered) return fail(rendered.error().to_string());
            auto response = rt.client->call({backend, rendered.take(), {}});
            if (!response) return fail(response.error().to_string());
            auto answer = parse_qa_answer(response.value().raw_text);
            if (!answer) {
                ++parse_failures;
                qa_answers.push_back({std::nullopt});  // scored incorrect
            } else {
                qa_answers.push_back({answer.value().letter});
            }
            qa_golds.push_back(j.at("gold").get<std::string>()[0]);
        }
    }

    if (grounding) {
        auto result = grounding_eval(preds, golds);
        if (!result) return fail(result.error().to_string());
        json r1 = json::object();
        for (const auto& [tau, recall] : result.value().r1) {
            std::ostringstream key;
            key << "R1@" << tau;
            r1[key.str()] = recall;
        }
        json out{{"n", golds.size()},
                 {"miou", result.value().miou},
                 {"r1", r1},
                 {"parse_failures", parse_failures}};
        std::ostringstream table;
        table << "n=" << golds.size() << "  mIoU=" << result.value().miou;
        for (const auto& [tau, recall] : result.value().r1)
            table << "  R1@" << tau << "=" << recall;
        table << "\n";
        emit(out, table.str());
    } else {
        auto accuracy = qa_eval(qa_answers, qa_golds);
        if (!accuracy) return fail(accuracy.error().to_string());
        json out{{"n", qa_golds.size()},
                 {"accuracy", accuracy.value()},
                 {"parse_failures", parse_failures}};
        std::ostringstream table;
        table << "n=" << qa_golds.size() << "  accuracy=" << accuracy.value() << "\n";
        emit(out, table.str());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Audiovisual caption curation pipeline"};
    app.require_subcommand(1);

    CommonOptions common;
    app.add_option("--config", common.config_path, "Pipeline config file (JSON)");
    app.add_option("--format", common.format, "Output format: json|table")->default_val("json");
    app.add_option("--seed", common.seed, "Deterministic work-order seed");
    app.add_option("--limit", common.limit, "Process at most N records");
    app.add_flag("--dry-run", common.dry_run, "Plan work without calling any backend");

    auto* ingest_cmd = app.add_subcommand("ingest", "Load a JSONL corpus into the record store");
    std::string ingest_file;
    std::string ingest_source = "other";
    ingest_cmd->add_option("file", ingest_file, "Corpus JSONL file")->required();
    ingest_cmd->add_option("--source", ingest_source, "Default source dataset tag");

    auto* run_cmd = app.add_subcommand("run", "Run pipeline stages over pending records");
    std::string stages = "1..3";
    run_cmd->add_option("--stages", stages, "Stage range, e.g. 1..3 or 2");

    auto* audit_cmd = app.add_subcommand("audit-only", "Audit verified records, skip refinement");
    auto* finalize_cmd =
        app.add_subcommand("finalize", "Refine and decompose audited records to retention");
    auto* stats_cmd = app.add_subcommand("stats", "Report store counts and stage quality");

    auto* curriculum_cmd =
        app.add_subcommand("build-curriculum", "Materialize S1/S2/S3 supervision shards");
    std::string shard_dir = "shards";
    curriculum_cmd->add_option("--out", shard_dir, "Output directory");

    auto* qa_cmd = app.add_subcommand("eval-qa", "Caption-grounded QA accuracy via the qa solver");
    std::string qa_file;
    qa_cmd->add_option("file", qa_file, "JSONL with {caption, question, choices, gold}")->required();

    auto* grounding_cmd =
        app.add_subcommand("eval-grounding", "Temporal grounding mIoU/R1 via the grounding solver");
    std::string grounding_file;
    grounding_cmd->add_option("file", grounding_file,
                              "JSONL with {caption, query, gold_start, gold_end}")
        ->required();

    auto* validate_cmd =
        app.add_subcommand("validate-captions", "Check caption format for a JSONL file");
    std::string validate_file;
    bool fail_on_violations = false;
    validate_cmd->add_option("file", validate_file, "JSONL with {id, caption, duration_s}")
        ->required();
    validate_cmd->add_flag("--fail-on-violations", fail_on_violations,
                           "Exit nonzero when violations are found");

    CLI11_PARSE(app, argc, argv);
    if (common.format == "table") g_json_indent = -1;

    try {
        if (ingest_cmd->parsed()) {
            auto config = require_config(common);
            auto rt = open_runtime(config);
            SourceDataset source = SourceDataset::other;
            if (ingest_source == "llava_video") source = SourceDataset::llava_video;
            if (ingest_source == "finevideo") source = SourceDataset::finevideo;
            auto result = ingest_manifest(ingest_file, source, *rt.store);
            if (!result) return fail(result.error().to_string());
            json invalid = json::array();
            for (const auto& line : result.value().invalid)
                invalid.push_back({{"line", line.line_no}, {"error", line.error}});
            json out{{"ingested", result.value().ingested},
                     {"already_present", result.value().already_present},
                     {"invalid_lines", invalid},
                     {"status_counts", result.value().manifest.status_counts}};
            std::ostringstream table;
            table << "ingested " << result.value().ingested << ", already present "
                  << result.value().already_present << ", invalid "
                  << result.value().invalid.size() << "\n";
            emit(out, table.str());
            return result.value().invalid.empty() ? 0 : 2;
        }

        if (run_cmd->parsed() || finalize_cmd->parsed()) {
            auto config = require_config(common);
            auto rt = open_runtime(config);
            RunOptions options;
            options.limit = common.limit;
            options.dry_run = common.dry_run;
            options.seed = common.seed;
            if (run_cmd->parsed()) {
                auto sep = stages.find("..");
                if (sep == std::string::npos) {
                    options.from_stage = options.to_stage = std::stoi(stages);
                } else {
                    options.from_stage = std::stoi(stages.substr(0, sep));
                    options.to_stage = std::stoi(stages.substr(sep + 2));
                }
                if (options.from_stage < 1 || options.to_stage > 3 ||
                    options.from_stage > options.to_stage)
                    return fail("invalid --stages range: " + stages);
            } else {
                // finalize: refinement/decomposition over audited records
                options.from_stage = 3;
                options.to_stage = 3;
            }
            auto summary = rt.pipeline->run(options);
            emit(summary_to_json(summary), summary_table(summary));
            return 0;
        }

        if (audit_cmd->parsed()) {
            // Audit verified records, then stop; `finalize` picks them up later.
            auto config = require_config(common);
            auto rt = open_runtime(config);
            RunSummary summary;
            size_t audited = 0;
            for (const auto& id : rt.store->ids_with_status(RecordStatus::verified)) {
                if (common.limit && audited >= common.limit) break;
                if (common.dry_run) {
                    summary.planned.push_back(id + ": audit");
                    continue;
                }
                auto record = rt.pipeline->stage3_audit(rt.store->load_record(id).take());
                rt.store->save_record(record);
                ++audited;
            }
            if (!common.dry_run) rt.store->compact();
            summary.processed = audited;
            auto manifest = rt.store->manifest();
            summary.status_counts = manifest.status_counts;
            summary.backend = rt.client->stats();
            emit(summary_to_json(summary), summary_table(summary));
            return 0;
        }

        if (stats_cmd->parsed()) {
            auto config = require_config(common);
            auto rt = open_runtime(config);
            RunOptions options;
            options.dry_run = true;
            auto summary = rt.pipeline->run(options);
            summary.planned.clear();
            emit(summary_to_json(summary), summary_table(summary));
            return 0;
        }

        if (curriculum_cmd->parsed()) {
            auto config = require_config(common);
            auto rt = open_runtime(config);
            auto shards = build_shards(*rt.store);
            if (!shards) return fail(shards.error().to_string());
            write_shards(shards.value(), shard_dir);
            json out{{"s1", shards.value().s1.size()},
                     {"s2", shards.value().s2.size()},
                     {"s3", shards.value().s3.size()},
                     {"out", shard_dir}};
            std::ostringstream table;
            table << "s1 " << shards.value().s1.size() << ", s2 " << shards.value().s2.size()
                  << ", s3 " << shards.value().s3.size() << " -> " << shard_dir << "\n";
            emit(out, table.str());
            return 0;
        }

        if (qa_cmd->parsed()) return run_eval(common, qa_file, false);
        if (grounding_cmd->parsed()) return run_eval(common, grounding_file, true);

        if (validate_cmd->parsed()) {
            FormatPolicy policy;
            if (!common.config_path.empty()) {
                auto config = require_config(common);
                policy = config.stage.format_policy;
            }
            std::ifstream in(validate_file, std::ios::binary);
            if (!in) return fail("cannot read " + validate_file);
            json report = json::array();
            size_t total_violations = 0;
            std::string line;
            size_t line_no = 0;
            while (std::getline(in, line)) {
                ++line_no;
                if (line.empty()) continue;
                json j = json::parse(line, nullptr, false);
                if (j.is_discarded()) return fail("bad JSON at line " + std::to_string(line_no));
                std::string text =
                    j.contains("caption") ? j["caption"].get<std::string>() : j.value("text", "");
                double duration = j.value("duration_s", 1e9);
                auto violations = validate_caption(text, duration, policy);
                total_violations += violations.size();
                json entry{{"id", j.value("id", "line " + std::to_string(line_no))},
                           {"violations", json::array()}};
                for (const auto& v : violations) {
                    entry["violations"].push_back(
                        {{"kind", std::string(violation_kind_name(v.kind))},
                         {"start", v.start},
                         {"end", v.end},
                         {"detail", v.detail},
                         {"fixable", v.fixable}});
                }
                report.push_back(std::move(entry));
            }
            json out{{"records", report.size()},
                     {"violations", total_violations},
                     {"report", report}};
            std::ostringstream table;
            table << report.size() << " record(s), " << total_violations << " violation(s)\n";
            emit(out, table.str());
            return (fail_on_violations && total_violations > 0) ? 3 : 0;
        }
    } catch (const std::exception& e) {
        return fail(e.what());
    }
    return fail("no subcommand");
}
