#include "servo/storage.hpp"

#include <fstream>

#include "servo/rng.hpp"

namespace servo {

namespace fs = std::filesystem;

std::string blob_key(ChunkCoord c) {
    return "c_" + std::to_string(c.cx) + "_" + std::to_string(c.cz);
}

std::optional<ChunkCoord> parse_blob_key(const std::string& key) {
    if (key.size() < 5 || key[0] != 'c' || key[1] != '_') return std::nullopt;
    size_t second = key.find('_', 2);
    if (second == std::string::npos || second + 1 >= key.size()) return std::nullopt;
    try {
        ChunkCoord c;
        c.cx = std::stoi(key.substr(2, second - 2));
        c.cz = std::stoi(key.substr(second + 1));
        return c;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

static std::optional<std::vector<uint8_t>> read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) return std::nullopt;
    std::vector<uint8_t> out((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
    return out;
}

static void write_file(const fs::path& p, const std::vector<uint8_t>& bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

LocalDiskBackend::LocalDiskBackend(fs::path dir, DistSpec latency)
    : dir_(std::move(dir)), latency_(latency) {
    fs::create_directories(dir_);
}

std::optional<std::vector<uint8_t>> LocalDiskBackend::read(const std::string& key) {
    return read_file(dir_ / key);
}

void LocalDiskBackend::write(const std::string& key, const std::vector<uint8_t>& bytes) {
    write_file(dir_ / key, bytes);
}

double LocalDiskBackend::sample_read_latency(Rng& rng, uint64_t index) {
    return latency_.sample(rng, index);
}

double LocalDiskBackend::sample_write_latency(Rng& rng, uint64_t index) {
    return latency_.sample(rng, index);
}

EmulatedBlobBackend::EmulatedBlobBackend(DistSpec latency) : latency_(latency) {}

std::optional<std::vector<uint8_t>> EmulatedBlobBackend::read(const std::string& key) {
    auto it = blobs_.find(key);
    if (it == blobs_.end()) return std::nullopt;
    return it->second;
}

void EmulatedBlobBackend::write(const std::string& key, const std::vector<uint8_t>& bytes) {
    blobs_[key] = bytes;
}

double EmulatedBlobBackend::sample_read_latency(Rng& rng, uint64_t index) {
    return latency_.sample(rng, index);
}

double EmulatedBlobBackend::sample_write_latency(Rng& rng, uint64_t index) {
    return latency_.sample(rng, index);
}

void EmulatedBlobBackend::preload(const std::string& key, std::vector<uint8_t> bytes) {
    blobs_[key] = std::move(bytes);
}

ChunkStore::ChunkStore(fs::path cache_dir, std::unique_ptr<StorageBackend> backend,
                       CachePolicy policy, uint64_t seed, DistSpec local_latency)
    : cache_dir_(std::move(cache_dir)),
      backend_(std::move(backend)),
      policy_(policy),
      seed_(seed),
      local_latency_(local_latency) {
    fs::create_directories(cache_dir_);
    load_cache_dir();
}

fs::path ChunkStore::file_for(const std::string& key) const { return cache_dir_ / key; }

fs::path ChunkStore::manifest_path() const { return cache_dir_ / "dirty.manifest"; }

void ChunkStore::persist_manifest() const {
    std::ofstream out(manifest_path(), std::ios::trunc);
    for (const std::string& key : dirty_keys_) out << key << "\n";
}

void ChunkStore::load_cache_dir() {
    for (const auto& entry : fs::directory_iterator(cache_dir_)) {
        if (!entry.is_regular_file()) continue;
        std::string name = entry.path().filename().string();
        if (name == "dirty.manifest") continue;
        on_disk_.insert(name);
    }
    std::ifstream in(manifest_path());
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        dirty_keys_.insert(line);
        auto bytes = read_file(file_for(line));
        if (!bytes) continue;
        Entry e;
        e.bytes = std::move(*bytes);
        e.dirty = true;
        entries_[line] = std::move(e);
    }
}

Rng ChunkStore::op_rng(const std::string& key) {
    return Rng(derive_seed(seed_, "storage", fnv1a64_str(key), op_counter_++));
}

double ChunkStore::sample_local(const std::string& key) {
    Rng rng = op_rng(key);
    return local_latency_.sample(rng, op_counter_);
}

std::optional<ChunkStore::ReadResult> ChunkStore::read_chunk(const std::string& key,
                                                             int64_t now_ms) {
    auto it = entries_.find(key);
    if (it != entries_.end()) {
        it->second.last_access_ms = now_ms;
        ReadResult res;
        res.bytes = it->second.bytes;
        res.latency_ms = sample_local(key);
        res.available_at_ms = now_ms + static_cast<int64_t>(res.latency_ms);
        res.hit = true;
        reads_.push_back({now_ms, key, res.latency_ms, true});
        return res;
    }

    if (on_disk_.count(key)) {
        auto bytes = read_file(file_for(key));
        if (bytes) {
            Entry e;
            e.bytes = *bytes;
            e.dirty = dirty_keys_.count(key) != 0;
            e.last_access_ms = now_ms;
            entries_[key] = std::move(e);
            ReadResult res;
            res.bytes = std::move(*bytes);
            res.latency_ms = sample_local(key);
            res.available_at_ms = now_ms + static_cast<int64_t>(res.latency_ms);
            res.hit = true;
            reads_.push_back({now_ms, key, res.latency_ms, true});
            return res;
        }
        on_disk_.erase(key);
    }

    if (known_missing_.count(key)) return std::nullopt;

    Rng rng = op_rng(key);
    double latency = backend_->sample_read_latency(rng, op_counter_);
    auto bytes = backend_->read(key);
    if (!bytes) {
        known_missing_.insert(key);
        return std::nullopt;
    }
    reads_.push_back({now_ms, key, latency, false});

    Entry e;
    e.bytes = *bytes;
    e.dirty = false;
    e.last_access_ms = now_ms;
    entries_[key] = std::move(e);
    write_file(file_for(key), *bytes);
    on_disk_.insert(key);

    ReadResult res;
    res.bytes = std::move(*bytes);
    res.latency_ms = latency;
    res.available_at_ms = now_ms + static_cast<int64_t>(latency);
    res.hit = false;
    return res;
}

void ChunkStore::write_chunk(const std::string& key, std::vector<uint8_t> bytes,
                             int64_t now_ms) {
    Entry& e = entries_[key];
    e.bytes = std::move(bytes);
    e.dirty = true;
    e.last_access_ms = now_ms;
    write_file(file_for(key), e.bytes);
    on_disk_.insert(key);
    dirty_keys_.insert(key);
    known_missing_.erase(key);
    persist_manifest();
}

size_t ChunkStore::flush(int64_t now_ms) {
    size_t written = 0;
    for (auto& [key, e] : entries_) {
        if (!e.dirty) continue;
        Rng rng = op_rng(key);
        double latency = backend_->sample_write_latency(rng, op_counter_);
        backend_->write(key, e.bytes);
        writes_.push_back({now_ms, key, latency});
        e.dirty = false;
        dirty_keys_.erase(key);
        ++written;
    }
    if (written > 0) persist_manifest();
    return written;
}

size_t ChunkStore::evict_idle(int64_t now_ms) {
    int64_t idle_ms = static_cast<int64_t>(policy_.eviction_idle_s * 1000.0);
    size_t evicted = 0;
    for (auto it = entries_.begin(); it != entries_.end();) {
        if (!it->second.dirty && now_ms - it->second.last_access_ms > idle_ms) {
            it = entries_.erase(it);
            ++evicted;
        } else {
            ++it;
        }
    }
    return evicted;
}

size_t ChunkStore::prefetch(int32_t x, int32_t z, int view_blocks, int64_t now_ms) {
    size_t fetched = 0;
    auto outer = chunks_within(x, z, view_blocks + policy_.prefetch_margin_blocks);
    auto inner = chunks_within(x, z, view_blocks);
    for (ChunkCoord c : outer) {
        if (inner.count(c)) continue;
        std::string key = blob_key(c);
        if (entries_.count(key) || on_disk_.count(key) || known_missing_.count(key))
            continue;
        auto res = read_chunk(key, now_ms);
        if (res && !res->hit) ++fetched;
    }
    return fetched;
}

bool ChunkStore::cached(const std::string& key) const {
    return entries_.count(key) != 0 || on_disk_.count(key) != 0;
}

bool ChunkStore::dirty(const std::string& key) const {
    return dirty_keys_.count(key) != 0;
}

size_t ChunkStore::dirty_count() const { return dirty_keys_.size(); }

std::vector<StorageReadRecord> ChunkStore::drain_reads() {
    return std::exchange(reads_, {});
}

std::vector<StorageWriteRecord> ChunkStore::drain_writes() {
    return std::exchange(writes_, {});
}

}  // namespace servo
