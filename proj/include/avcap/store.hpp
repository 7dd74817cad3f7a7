#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <vector>

#include "avcap/record.hpp"

namespace avcap {

inline constexpr int kStoreSchemaVersion = 1;

struct ManifestEntry {
    std::string id;
    uint64_t offset = 0;  // byte offset of the latest record line in the log
};

struct CorpusManifest {
    int schema_version = kStoreSchemaVersion;
    std::vector<ManifestEntry> records;           // sorted by id
    std::map<std::string, size_t> status_counts;  // status name -> count
};

struct InvalidLine {
    size_t line_no = 0;  // 1-based
    std::string error;
};

struct IngestResult {
    CorpusManifest manifest;
    std::vector<InvalidLine> invalid;  // malformed lines, collected not skipped
    size_t ingested = 0;
    size_t already_present = 0;  // ids skipped because the store has them; reruns are no-ops
};

// Append-only JSONL record log with a separate manifest index. Writers are
// serialized; readers take a shared lock over the in-memory index. Manifest
// updates go through write-temp-then-rename.
class RecordStore {
public:
    explicit RecordStore(std::filesystem::path root);

    // Opens (or creates) the store. Throws std::runtime_error on version
    // mismatch or unreadable files.
    void open();

    void save_record(const VideoRecord& record);  // throws on invariant violation
    Result<VideoRecord> load_record(const std::string& id) const;
    bool contains(const std::string& id) const;

    std::vector<std::string> ids() const;                      // sorted
    std::vector<std::string> ids_with_status(RecordStatus) const;
    CorpusManifest manifest() const;

    // Compacts the log to one line per record, sorted by id, and rewrites the
    // manifest. Produces byte-identical stores for identical content.
    void compact();

    const std::filesystem::path& root() const { return root_; }

private:
    void rewrite_manifest_locked();  // requires exclusive lock held

    std::filesystem::path root_;
    std::filesystem::path log_path_;
    std::filesystem::path manifest_path_;
    mutable std::shared_mutex mutex_;
    std::map<std::string, VideoRecord> records_;
    std::map<std::string, uint64_t> offsets_;
    bool opened_ = false;
};

// Reads a JSONL corpus file (schema_version head line, one record per line)
// into the store with all records in status `ingested`. Lines that fail
// validation are reported, not silently skipped. Duplicate ids and a
// schema_version mismatch abort the ingest.
Result<IngestResult> ingest_manifest(const std::filesystem::path& input, SourceDataset default_source,
                                     RecordStore& store);

// Ids whose duration lies in the half-open interval [lo_s, hi_s).
std::vector<std::string> filter_by_duration(const RecordStore& store, double lo_s, double hi_s);

// Serializes writers across processes; throws on contention.
class StoreLock {
public:
    explicit StoreLock(const std::filesystem::path& root);
    ~StoreLock();
    StoreLock(const StoreLock&) = delete;
    StoreLock& operator=(const StoreLock&) = delete;

private:
    int fd_ = -1;
    std::filesystem::path path_;
};

}  // namespace avcap
