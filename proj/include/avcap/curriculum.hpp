#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "avcap/attributes.hpp"
#include "avcap/result.hpp"
#include "avcap/store.hpp"

namespace avcap {

enum class TrainingStage : uint8_t { S1, S2, S3 };

std::string_view to_string(TrainingStage);

// One (input, attribute-condition, target) supervision tuple.
struct SupervisionItem {
    std::string video_id;
    TrainingStage stage = TrainingStage::S1;
    AttributeSet condition;        // singleton for S1, the full set for S2/S3
    std::string instruction_text;  // rendered attribute-conditioned instruction
    std::string target_text;       // the single- or all-attribute caption
};

struct ShardSet {
    std::vector<SupervisionItem> s1;  // one item per (retained record, attribute)
    std::vector<SupervisionItem> s2;  // all-attribute, duration in [0, 30)
    std::vector<SupervisionItem> s3;  // all-attribute, duration in [30, 180]
};

// Deterministic attribute-conditioned instruction; attributes are listed in
// canonical order and any subset size 1..8 is supported.
Result<std::string> render_condition(const AttributeSet& attrs);

// Materializes the three supervision shards from retained records, ordered by
// (video_id, attribute). Records longer than 180 s fall outside every shard.
Result<ShardSet> build_shards(const RecordStore& store);

// Writes shards/s1.jsonl, s2.jsonl, s3.jsonl plus a counts.json sidecar.
void write_shards(const ShardSet& shards, const std::filesystem::path& dir);

}  // namespace avcap
