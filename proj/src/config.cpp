#include "avcap/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace avcap {

using nlohmann::json;

namespace {

FormatPolicy format_policy_from_json(const json& j) {
    FormatPolicy p;
    p.ngram = j.value("ngram", p.ngram);
    p.min_repeats = j.value("min_repeats", p.min_repeats);
    p.allowed_extra = j.value("allowed_extra", p.allowed_extra);
    p.ts_tolerance_s = j.value("ts_tolerance_s", p.ts_tolerance_s);
    p.replacement = j.value("replacement", p.replacement);
    return p;
}

ConsistencyPolicy consistency_policy_from_json(const json& j) {
    ConsistencyPolicy p;
    p.min_sim = j.value("min_sim", p.min_sim);
    p.speech_delta_s = j.value("speech_delta_s", p.speech_delta_s);
    p.ts_tolerance_s = j.value("ts_tolerance_s", p.ts_tolerance_s);
    return p;
}

}  // namespace

Result<PipelineConfig> load_config(const std::filesystem::path& path) {
    using R = Result<PipelineConfig>;
    std::ifstream in(path, std::ios::binary);
    if (!in) return R::fail("cannot read config file", path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    json j = json::parse(buf.str(), nullptr, false);
    if (j.is_discarded()) return R::fail("config is not valid JSON", path.string());

    PipelineConfig config;
    if (!j.contains("store_root") || !j.contains("cache_root"))
        return R::fail("config must set store_root and cache_root", path.string());
    config.store_root = j["store_root"].get<std::string>();
    config.cache_root = j["cache_root"].get<std::string>();
    config.template_dir = j.value("template_dir", std::string{});
    json checksums = j.value("template_checksums", json::object());
    for (const auto& [id, sum] : checksums.items())
        config.template_checksums[id] = sum.get<std::string>();

    for (const auto& bj : j.value("backends", json::array())) {
        BackendSpec spec;
        spec.id = bj.value("id", "");
        auto kind = backend_kind_from_name(bj.value("kind", ""));
        if (!kind) return R::fail("unknown backend kind for '" + spec.id + "'", "backends");
        spec.kind = *kind;
        spec.endpoint = bj.value("endpoint", "");
        spec.model_name = bj.value("model_name", "");
        spec.max_retries = bj.value("max_retries", spec.max_retries);
        spec.timeout_s = bj.value("timeout_s", spec.timeout_s);
        spec.rate_limit_per_min = bj.value("rate_limit_per_min", spec.rate_limit_per_min);
        config.backends.push_back(std::move(spec));
    }

    const json& sj = j.value("stage", json::object());
    for (const auto& a : sj.value("annotators", json::array()))
        config.stage.backends.annotators.push_back(a.get<std::string>());
    config.stage.backends.integrator = sj.value("integrator", "");
    config.stage.backends.verifier = sj.value("verifier", "");
    config.stage.backends.auditor = sj.value("auditor", "");
    config.stage.backends.refiner = sj.value("refiner", "");
    config.stage.backends.decomposer = sj.value("decomposer", "");
    config.stage.max_refine_rounds = sj.value("max_refine_rounds", config.stage.max_refine_rounds);
    config.stage.max_concurrency = sj.value("max_concurrency", config.stage.max_concurrency);
    config.stage.max_unfixed_violations =
        sj.value("max_unfixed_violations", config.stage.max_unfixed_violations);
    if (sj.contains("drop_on")) {
        config.stage.drop_on.clear();
        for (const auto& d : sj["drop_on"]) config.stage.drop_on.insert(d.get<std::string>());
    }
    config.stage.format_policy = format_policy_from_json(j.value("format_policy", json::object()));
    config.stage.consistency_policy =
        consistency_policy_from_json(j.value("consistency_policy", json::object()));
    if (j.contains("verify_rules")) {
        for (const auto& [name, rules] : j["verify_rules"].items()) {
            auto attr = attribute_from_name(name);
            if (!attr) return R::fail("unknown attribute '" + name + "'", "verify_rules");
            std::vector<std::string> list;
            for (const auto& r : rules) list.push_back(r.get<std::string>());
            config.stage.verify_rules[*attr] = std::move(list);
        }
    }

    if (auto valid = validate_config(config); !valid)
        return R::fail(valid.error().message, valid.error().path);
    return R::ok(std::move(config));
}

Result<bool> validate_config(const PipelineConfig& config) {
    using R = Result<bool>;
    if (config.store_root.empty()) return R::fail("store_root must be set");
    if (config.cache_root.empty()) return R::fail("cache_root must be set");

    std::set<std::string> ids;
    for (const auto& spec : config.backends) {
        if (spec.id.empty()) return R::fail("backend id must be nonempty", "backends");
        if (!ids.insert(spec.id).second) return R::fail("duplicate backend id", spec.id);
        if (spec.endpoint.empty()) return R::fail("backend endpoint must be set", spec.id);
        if (spec.max_retries < 0) return R::fail("max_retries must be >= 0", spec.id);
        if (spec.rate_limit_per_min <= 0) return R::fail("rate_limit must be positive", spec.id);
    }

    auto check_role = [&](const std::string& id, const char* role) -> Result<bool> {
        if (id.empty()) return R::ok(true);  // role unused in this run
        if (!ids.count(id))
            return R::fail(std::string("stage role '") + role + "' references unknown backend", id);
        return R::ok(true);
    };
    for (const auto& a : config.stage.backends.annotators) {
        if (auto ok = check_role(a, "annotator"); !ok) return ok;
    }
    if (auto ok = check_role(config.stage.backends.integrator, "integrator"); !ok) return ok;
    if (auto ok = check_role(config.stage.backends.verifier, "verifier"); !ok) return ok;
    if (auto ok = check_role(config.stage.backends.auditor, "auditor"); !ok) return ok;
    if (auto ok = check_role(config.stage.backends.refiner, "refiner"); !ok) return ok;
    if (auto ok = check_role(config.stage.backends.decomposer, "decomposer"); !ok) return ok;

    if (config.stage.max_refine_rounds < 0) return R::fail("max_refine_rounds must be >= 0");
    if (config.stage.max_concurrency < 1) return R::fail("max_concurrency must be >= 1");
    for (const auto& reason : config.stage.drop_on) {
        if (!all_drop_reasons().count(reason))
            return R::fail("unknown drop_on kind '" + reason + "'", "stage.drop_on");
    }

    // Template checksums are pinned; verify them against the assets now so a
    // prompt edit cannot slip into a run unnoticed.
    if (!config.template_dir.empty()) {
        TemplateSet set;
        try {
            set = TemplateSet::load(config.template_dir);
        } catch (const std::exception& e) {
            return R::fail(e.what(), "template_dir");
        }
        for (size_t i = 0; i < kPromptCount; ++i) {
            auto id = PromptId(i);
            auto it = config.template_checksums.find(std::string(prompt_id_name(id)));
            if (it == config.template_checksums.end())
                return R::fail("missing template checksum", std::string(prompt_id_name(id)));
            if (it->second != set.checksum(id))
                return R::fail("template checksum mismatch (expected " + it->second + ", found " +
                                   set.checksum(id) + ")",
                               std::string(prompt_id_name(id)));
        }
    }
    return R::ok(true);
}

TemplateSet load_templates(const PipelineConfig& config) {
    if (config.template_dir.empty()) return TemplateSet::builtin();
    return TemplateSet::load(config.template_dir);
}

json config_to_json(const PipelineConfig& config) {
    json backends = json::array();
    for (const auto& spec : config.backends) {
        backends.push_back({{"id", spec.id},
                            {"kind", std::string(to_string(spec.kind))},
                            {"endpoint", spec.endpoint},
                            {"model_name", spec.model_name},
                            {"max_retries", spec.max_retries},
                            {"timeout_s", spec.timeout_s},
                            {"rate_limit_per_min", spec.rate_limit_per_min}});
    }
    json stage{{"annotators", config.stage.backends.annotators},
               {"integrator", config.stage.backends.integrator},
               {"verifier", config.stage.backends.verifier},
               {"auditor", config.stage.backends.auditor},
               {"refiner", config.stage.backends.refiner},
               {"decomposer", config.stage.backends.decomposer},
               {"max_refine_rounds", config.stage.max_refine_rounds},
               {"max_concurrency", config.stage.max_concurrency},
               {"max_unfixed_violations", config.stage.max_unfixed_violations},
               {"drop_on", config.stage.drop_on}};
    return json{{"store_root", config.store_root.string()},
                {"cache_root", config.cache_root.string()},
                {"template_dir", config.template_dir.string()},
                {"template_checksums", config.template_checksums},
                {"backends", std::move(backends)},
                {"stage", std::move(stage)},
                {"format_policy",
                 {{"ngram", config.stage.format_policy.ngram},
                  {"min_repeats", config.stage.format_policy.min_repeats},
                  {"allowed_extra", config.stage.format_policy.allowed_extra},
                  {"ts_tolerance_s", config.stage.format_policy.ts_tolerance_s},
                  {"replacement", config.stage.format_policy.replacement}}},
                {"consistency_policy",
                 {{"min_sim", config.stage.consistency_policy.min_sim},
                  {"speech_delta_s", config.stage.consistency_policy.speech_delta_s},
                  {"ts_tolerance_s", config.stage.consistency_policy.ts_tolerance_s}}}};
}

}  // namespace avcap
