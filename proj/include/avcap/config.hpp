#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "avcap/backend.hpp"
#include "avcap/pipeline.hpp"
#include "avcap/result.hpp"

namespace avcap {

// One declarative document describing a whole run; secrets stay in the
// environment (<BACKEND_ID>_API_KEY).
struct PipelineConfig {
    std::filesystem::path store_root;
    std::filesystem::path cache_root;
    std::filesystem::path template_dir;
    // Pinned sha256 per template id; loading fails on any mismatch so prompt
    // changes are always a visible config diff.
    std::map<std::string, std::string> template_checksums;
    std::vector<BackendSpec> backends;
    StageConfig stage;
};

// Parses and validates the config: paths present, backend ids unique, every
// role reference resolvable, checksums matching the template assets.
Result<PipelineConfig> load_config(const std::filesystem::path& path);

// Validation only (also used on programmatically built configs).
Result<bool> validate_config(const PipelineConfig& config);

// The loaded template set for a validated config.
TemplateSet load_templates(const PipelineConfig& config);

nlohmann::json config_to_json(const PipelineConfig& config);

}  // namespace avcap
