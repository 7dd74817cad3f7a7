#include "avcap/curriculum.hpp"

#include <fstream>

#include <json.hpp>

namespace avcap {

using nlohmann::json;

namespace {
constexpr double kShortMax = 30.0;   // S2: [0, 30)
constexpr double kGlobalCap = 180.0; // S3: [30, 180], closed at the cap
}

std::string_view to_string(TrainingStage s) {
    switch (s) {
        case TrainingStage::S1: return "S1";
        case TrainingStage::S2: return "S2";
        case TrainingStage::S3: return "S3";
    }
    return "S1";
}

Result<std::string> render_condition(const AttributeSet& attrs) {
    using R = Result<std::string>;
    if (attrs.empty()) return R::fail("attribute condition must be nonempty");
    auto names = attrs.names();
    std::string list;
    for (size_t i = 0; i < names.size(); ++i) {
        if (i > 0) list += (i + 1 == names.size()) ? " and " : ", ";
        list += names[i];
    }
    std::string text = "Describe the video, covering ";
    text += (names.size() == 1) ? "only the following aspect: " : "the following aspects: ";
    text += list;
    text += ". Embed timestamps as \"At Xs\" anchors in chronological order.";
    return R::ok(std::move(text));
}

Result<ShardSet> build_shards(const RecordStore& store) {
    using R = Result<ShardSet>;
    ShardSet shards;
    size_t retained = 0;
    for (const auto& id : store.ids()) {  // ids() is sorted, so output order is deterministic
        auto loaded = store.load_record(id);
        if (!loaded) continue;
        const VideoRecord& record = loaded.value();
        if (record.status != RecordStatus::retained) continue;
        ++retained;
        if (record.duration_s > kGlobalCap) continue;

        for (Attribute attr : kAllAttributes) {
            AttributeSet condition;
            condition.insert(attr);
            SupervisionItem item;
            item.video_id = record.id;
            item.stage = TrainingStage::S1;
            item.condition = condition;
            item.instruction_text = render_condition(condition).take();
            item.target_text = record.single_attr.at(attr).text;
            shards.s1.push_back(std::move(item));
        }

        SupervisionItem all;
        all.video_id = record.id;
        all.condition = AttributeSet::all();
        all.instruction_text = render_condition(all.condition).take();
        all.target_text = record.final_all_attr->text;
        if (record.duration_s < kShortMax) {
            all.stage = TrainingStage::S2;
            shards.s2.push_back(std::move(all));
        } else {
            all.stage = TrainingStage::S3;
            shards.s3.push_back(std::move(all));
        }
    }
    if (retained == 0) return R::fail("no retained records in the store");
    return R::ok(std::move(shards));
}

namespace {

void write_shard(const std::vector<SupervisionItem>& shard, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    for (const auto& item : shard) {
        json j{{"video_id", item.video_id},
               {"stage", std::string(to_string(item.stage))},
               {"condition", item.condition.names()},
               {"instruction", item.instruction_text},
               {"target", item.target_text}};
        out << j.dump() << "\n";
    }
}

}  // namespace

void write_shards(const ShardSet& shards, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_shard(shards.s1, dir / "s1.jsonl");
    write_shard(shards.s2, dir / "s2.jsonl");
    write_shard(shards.s3, dir / "s3.jsonl");
    json counts{{"s1", shards.s1.size()}, {"s2", shards.s2.size()}, {"s3", shards.s3.size()}};
    std::ofstream out(dir / "counts.json", std::ios::binary | std::ios::trunc);
    out << counts.dump(2) << "\n";
}

}  // namespace avcap
