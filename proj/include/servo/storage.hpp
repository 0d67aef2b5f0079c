#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "servo/latency.hpp"
#include "servo/world.hpp"

namespace servo {

std::string blob_key(ChunkCoord c);
std::optional<ChunkCoord> parse_blob_key(const std::string& key);

// Persistent block store. Reads and writes return a modeled latency in
// milliseconds; the payload itself is available immediately (callers gate
// visibility on the logical clock).
class StorageBackend {
public:
    virtual ~StorageBackend() = default;
    virtual const char* name() const = 0;
    // nullopt when the key does not exist (latency is still charged).
    virtual std::optional<std::vector<uint8_t>> read(const std::string& key) = 0;
    virtual void write(const std::string& key, const std::vector<uint8_t>& bytes) = 0;
    virtual double sample_read_latency(Rng& rng, uint64_t index) = 0;
    virtual double sample_write_latency(Rng& rng, uint64_t index) = 0;
};

// Files in a directory, local-disk latency profile.
class LocalDiskBackend : public StorageBackend {
public:
    explicit LocalDiskBackend(std::filesystem::path dir,
                              DistSpec latency = DistSpec::lognormal(2.0, 0.74));
    const char* name() const override { return "local_disk"; }
    std::optional<std::vector<uint8_t>> read(const std::string& key) override;
    void write(const std::string& key, const std::vector<uint8_t>& bytes) override;
    double sample_read_latency(Rng& rng, uint64_t index) override;
    double sample_write_latency(Rng& rng, uint64_t index) override;

private:
    std::filesystem::path dir_;
    DistSpec latency_;
};

// In-memory map with a remote blob store latency profile: a lognormal body
// plus a rare heavy tail, calibrated so the 99.9th read percentile lands near
// 226 ms.
class EmulatedBlobBackend : public StorageBackend {
public:
    explicit EmulatedBlobBackend(
        DistSpec latency = DistSpec::mixture(6.0, 0.45, 0.002, 140.0, 484.0));
    const char* name() const override { return "emulated_blob"; }
    std::optional<std::vector<uint8_t>> read(const std::string& key) override;
    void write(const std::string& key, const std::vector<uint8_t>& bytes) override;
    double sample_read_latency(Rng& rng, uint64_t index) override;
    double sample_write_latency(Rng& rng, uint64_t index) override;

    // Test/setup access without latency accounting.
    void preload(const std::string& key, std::vector<uint8_t> bytes);
    size_t size() const { return blobs_.size(); }

private:
    std::map<std::string, std::vector<uint8_t>> blobs_;
    DistSpec latency_;
};

// Remote blob store over HTTP (GET/PUT /blob/<key>). Real network latency;
// manual experiments only.
std::unique_ptr<StorageBackend> make_http_blob_backend(const std::string& host, int port);

struct CachePolicy {
    int prefetch_margin_blocks = 32;
    double eviction_idle_s = 300.0;
    double write_back_interval_s = 30.0;
};

struct StorageReadRecord {
    int64_t at_ms = 0;
    std::string key;
    double latency_ms = 0;
    bool hit = false;
};

struct StorageWriteRecord {
    int64_t at_ms = 0;
    std::string key;
    double latency_ms = 0;
};

// Write-back chunk cache in front of a storage backend. Cached entries are
// mirrored to files under cache_dir together with a manifest of dirty keys,
// so a restart picks up unflushed writes. Reads that hit the cache pay a
// local-disk latency; misses pay the backend's. Eviction drops clean entries
// from memory only; their cache files remain and still count as hits.
class ChunkStore {
public:
    ChunkStore(std::filesystem::path cache_dir, std::unique_ptr<StorageBackend> backend,
               CachePolicy policy, uint64_t seed,
               DistSpec local_latency = DistSpec::lognormal(2.0, 0.74));

    struct ReadResult {
        std::vector<uint8_t> bytes;
        double latency_ms = 0;
        int64_t available_at_ms = 0;
        bool hit = false;
    };

    // nullopt when the key exists nowhere (callers fall back to generation).
    std::optional<ReadResult> read_chunk(const std::string& key, int64_t now_ms);

    // Stores bytes in the cache and marks them dirty; the backend write
    // happens at the next flush.
    void write_chunk(const std::string& key, std::vector<uint8_t> bytes, int64_t now_ms);

    // Fetches every chunk in the ring between view_blocks and view_blocks +
    // prefetch_margin around (x, z) that is not already cached or known
    // missing. Returns the number of backend reads issued.
    size_t prefetch(int32_t x, int32_t z, int view_blocks, int64_t now_ms);

    // Writes all dirty entries to the backend. Returns how many were written.
    size_t flush(int64_t now_ms);

    size_t evict_idle(int64_t now_ms);

    bool cached(const std::string& key) const;
    bool dirty(const std::string& key) const;
    size_t dirty_count() const;
    size_t resident_count() const { return entries_.size(); }

    StorageBackend& backend() { return *backend_; }
    const CachePolicy& policy() const { return policy_; }

    std::vector<StorageReadRecord> drain_reads();
    std::vector<StorageWriteRecord> drain_writes();

private:
    struct Entry {
        std::vector<uint8_t> bytes;
        bool dirty = false;
        int64_t last_access_ms = 0;
    };

    std::filesystem::path file_for(const std::string& key) const;
    std::filesystem::path manifest_path() const;
    void persist_manifest() const;
    void load_cache_dir();
    double sample_local(const std::string& key);
    Rng op_rng(const std::string& key);

    std::filesystem::path cache_dir_;
    std::unique_ptr<StorageBackend> backend_;
    CachePolicy policy_;
    uint64_t seed_;
    DistSpec local_latency_;
    std::map<std::string, Entry> entries_;
    std::set<std::string> on_disk_;       // keys mirrored to cache files
    std::set<std::string> dirty_keys_;    // superset view persisted in manifest
    std::set<std::string> known_missing_;
    std::vector<StorageReadRecord> reads_;
    std::vector<StorageWriteRecord> writes_;
    uint64_t op_counter_ = 0;
};

}  // namespace servo
