#include "avcap/store.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

namespace avcap {

using nlohmann::json;

namespace {

void atomic_write(const std::filesystem::path& path, const std::string& content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw std::runtime_error("write failure on " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace

RecordStore::RecordStore(std::filesystem::path root)
    : root_(std::move(root)),
      log_path_(root_ / "records.jsonl"),
      manifest_path_(root_ / "manifest.json") {}

void RecordStore::open() {
    std::unique_lock lock(mutex_);
    std::filesystem::create_directories(root_);
    records_.clear();
    offsets_.clear();

    if (!std::filesystem::exists(log_path_)) {
        std::ofstream out(log_path_, std::ios::binary);
        json head{{"schema_version", kStoreSchemaVersion}};
        out << head.dump() << "\n";
        opened_ = true;
        rewrite_manifest_locked();
        return;
    }

    std::ifstream in(log_path_, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read record log " + log_path_.string());
    std::string line;
    uint64_t offset = 0;
    bool first = true;
    while (std::getline(in, line)) {
        uint64_t line_start = offset;
        offset += line.size() + 1;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw std::runtime_error("corrupt record log line at byte " + std::to_string(line_start));
        if (first) {
            first = false;
            int version = j.value("schema_version", -1);
            if (version != kStoreSchemaVersion)
                throw std::runtime_error("store schema_version mismatch: expected " +
                                         std::to_string(kStoreSchemaVersion) + ", found " +
                                         std::to_string(version));
            continue;
        }
        auto record = record_from_json(j);
        if (!record)
            throw std::runtime_error("corrupt record in log: " + record.error().to_string());
        // Last line per id wins; earlier lines are history.
        offsets_[record.value().id] = line_start;
        records_[record.value().id] = record.take();
    }
    opened_ = true;
    rewrite_manifest_locked();
}

void RecordStore::save_record(const VideoRecord& record) {
    if (auto valid = validate_record(record); !valid)
        throw std::runtime_error("invalid record: " + valid.error().to_string());

    std::unique_lock lock(mutex_);
    if (!opened_) throw std::runtime_error("store not opened");

    auto it = records_.find(record.id);
    if (it != records_.end()) {
        // Status moves forward along the stage order; any state may drop.
        RecordStatus prev = it->second.status;
        if (record.status != RecordStatus::dropped && record.status < prev)
            throw std::runtime_error("status regression for " + record.id + ": " +
                                     std::string(to_string(prev)) + " -> " +
                                     std::string(to_string(record.status)));
    }

    std::ofstream out(log_path_, std::ios::binary | std::ios::app);
    if (!out) throw std::runtime_error("cannot append to record log");
    uint64_t offset = std::filesystem::file_size(log_path_);
    out << record_to_json(record).dump() << "\n";
    out.flush();
    if (!out) throw std::runtime_error("write failure on record log");

    offsets_[record.id] = offset;
    records_[record.id] = record;
    rewrite_manifest_locked();
}

Result<VideoRecord> RecordStore::load_record(const std::string& id) const {
    std::shared_lock lock(mutex_);
    auto it = records_.find(id);
    if (it == records_.end()) return Result<VideoRecord>::fail("unknown record id", id);
    return Result<VideoRecord>::ok(it->second);
}

bool RecordStore::contains(const std::string& id) const {
    std::shared_lock lock(mutex_);
    return records_.count(id) > 0;
}

std::vector<std::string> RecordStore::ids() const {
    std::shared_lock lock(mutex_);
    std::vector<std::string> out;
    out.reserve(records_.size());
    for (const auto& [id, _] : records_) out.push_back(id);
    return out;
}

std::vector<std::string> RecordStore::ids_with_status(RecordStatus status) const {
    std::shared_lock lock(mutex_);
    std::vector<std::string> out;
    for (const auto& [id, record] : records_) {
        if (record.status == status) out.push_back(id);
    }
    return out;
}

CorpusManifest RecordStore::manifest() const {
    std::shared_lock lock(mutex_);
    CorpusManifest m;
    for (const auto& [id, offset] : offsets_) m.records.push_back({id, offset});
    for (const auto& [id, record] : records_) {
        m.status_counts[std::string(to_string(record.status))]++;
    }
    return m;
}

void RecordStore::rewrite_manifest_locked() {
    json entries = json::array();
    for (const auto& [id, offset] : offsets_) entries.push_back({{"id", id}, {"offset", offset}});
    json counts = json::object();
    for (const auto& [id, record] : records_) {
        std::string key(to_string(record.status));
        counts[key] = counts.value(key, 0) + 1;
    }
    json m{{"schema_version", kStoreSchemaVersion},
           {"records", std::move(entries)},
           {"status_counts", std::move(counts)}};
    atomic_write(manifest_path_, m.dump(2) + "\n");
}

void RecordStore::compact() {
    std::unique_lock lock(mutex_);
    if (!opened_) throw std::runtime_error("store not opened");
    std::ostringstream out;
    out << json{{"schema_version", kStoreSchemaVersion}}.dump() << "\n";
    uint64_t offset = uint64_t(out.str().size());
    offsets_.clear();
    for (const auto& [id, record] : records_) {
        std::string line = record_to_json(record).dump() + "\n";
        offsets_[id] = offset;
        offset += line.size();
        out << line;
    }
    atomic_write(log_path_, out.str());
    rewrite_manifest_locked();
}

Result<IngestResult> ingest_manifest(const std::filesystem::path& input, SourceDataset default_source,
                                     RecordStore& store) {
    using R = Result<IngestResult>;
    std::ifstream in(input, std::ios::binary);
    if (!in) return R::fail("unreadable corpus file", input.string());

    IngestResult result;
    std::unordered_set<std::string> seen;
    std::vector<std::string> duplicates;
    std::string line;
    size_t line_no = 0;
    bool head_seen = false;
    std::vector<VideoRecord> accepted;

    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            result.invalid.push_back({line_no, "not valid JSON"});
            continue;
        }
        if (!head_seen) {
            head_seen = true;
            if (j.contains("schema_version") && !j.contains("id")) {
                int version = j.value("schema_version", -1);
                if (version != kStoreSchemaVersion)
                    return R::fail("schema_version mismatch: expected " +
                                       std::to_string(kStoreSchemaVersion) + ", found " +
                                       std::to_string(version),
                                   input.string() + ":1");
                continue;
            }
            // No head line: treat the first line as a record.
        }
        if (j.is_object() && !j.contains("source")) j["source"] = std::string(to_string(default_source));
        auto record = record_from_json(j);
        if (!record) {
            result.invalid.push_back({line_no, record.error().to_string()});
            continue;
        }
        VideoRecord r = record.take();
        if (r.status != RecordStatus::ingested) {
            result.invalid.push_back({line_no, "corpus records must start in status 'ingested'"});
            continue;
        }
        if (!seen.insert(r.id).second) {
            duplicates.push_back(r.id);
            continue;
        }
        accepted.push_back(std::move(r));
    }

    if (!duplicates.empty()) {
        std::string msg = "duplicate record id(s):";
        for (const auto& id : duplicates) msg += " " + id;
        return R::fail(std::move(msg), input.string());
    }

    for (auto& r : accepted) {
        if (store.contains(r.id)) {
            ++result.already_present;
            continue;
        }
        store.save_record(r);
        ++result.ingested;
    }
    result.manifest = store.manifest();
    return R::ok(std::move(result));
}

std::vector<std::string> filter_by_duration(const RecordStore& store, double lo_s, double hi_s) {
    std::vector<std::string> out;
    for (const auto& id : store.ids()) {
        auto record = store.load_record(id);
        if (!record) continue;
        double d = record.value().duration_s;
        if (d >= lo_s && d < hi_s) out.push_back(id);
    }
    return out;
}

StoreLock::StoreLock(const std::filesystem::path& root) : path_(root / ".lock") {
    std::filesystem::create_directories(root);
    fd_ = ::open(path_.c_str(), O_CREAT | O_RDWR, 0644);
    if (fd_ < 0) throw std::runtime_error("cannot open store lock " + path_.string());
    if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
        ::close(fd_);
        fd_ = -1;
        throw std::runtime_error("store is locked by another process: " + path_.string());
    }
}

StoreLock::~StoreLock() {
    if (fd_ >= 0) {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }
}

}  // namespace avcap
