#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "servo/bench.hpp"
#include "servo/config.hpp"
#include "servo/faas.hpp"
#include "servo/protocol.hpp"
#include "servo/registry.hpp"
#include "servo/sc_engine.hpp"
#include "servo/speculation.hpp"
#include "servo/storage.hpp"
#include "servo/terrain.hpp"
#include "servo/world.hpp"

namespace servo {

enum class TerrainMode {
    LocalSync,   // generate on the tick thread within the tick budget
    LocalAsync,  // generate off the tick path; results load in later
    Offloaded,   // generate through the function runtime
};

const char* terrain_mode_name(TerrainMode m);
TerrainMode parse_terrain_mode(const std::string& s);

enum class StorageMode {
    LocalDisk,
    EmulatedBlob,
};

const char* storage_mode_name(StorageMode m);
StorageMode parse_storage_mode(const std::string& s);

class ServerFull : public std::runtime_error {
public:
    ServerFull() : std::runtime_error("server is at its player limit") {}
};

struct ServerConfig {
    int tick_rate_hz = 20;
    double tick_budget_ms = 50.0;
    ScMode sc_mode = ScMode::Offloaded;
    TerrainMode terrain_mode = TerrainMode::Offloaded;
    StorageMode storage_mode = StorageMode::LocalDisk;
    std::filesystem::path data_dir;  // cache/ and blob/ live here
    WorldSeed world;
    int view_distance_blocks = 128;
    int gen_margin_blocks = 32;
    int max_chunk_loads_per_tick = 16;
    int prefetch_cadence_ticks = 10;
    size_t max_construct_blocks = 4096;
    int max_players = 256;
    bool realtime = false;
    OffloadPolicy policy;
    LatencyModel sc_latency;
    LatencyModel gen_latency;
    HandlerCosts handler_costs;
    CachePolicy cache;
    EmulationCosts costs;
    uint64_t seed = 1;
    std::string listen_host = "127.0.0.1";
    int listen_port = 4070;

    int64_t tick_period_ms() const { return 1000 / tick_rate_hz; }
};

ServerConfig server_config_from_kv(const KVConfig& kv);

// Fixed-rate authoritative game server. Each tick: deliver function replies
// and finished chunk loads, apply player actions, advance avatars, update
// simulated constructs (locally or speculatively via the function runtime),
// dispatch terrain and storage work, then emit state to sessions. In
// realtime mode ticks are paced to the wall clock grid and an overrun tick
// is followed immediately by the next one, with no catch-up burst.
class Server {
public:
    explicit Server(ServerConfig cfg);
    ~Server();

    // In-process sessions. If lite, emitted frames are counted and dropped
    // instead of queued (bots that only need positional introspection).
    PlayerId connect_player(const std::string& name, bool lite = false);
    void disconnect_player(PlayerId id);
    void submit_action(PlayerId id, const PlayerAction& action);
    bool action_idle(PlayerId id) const;  // nothing queued and nothing active
    Pos avatar_pos(PlayerId id) const;
    std::vector<std::pair<MsgTag, std::vector<uint8_t>>> drain_outbox(PlayerId id);

    void run_ticks(int64_t count);
    int64_t current_tick() const { return next_tick_; }

    // Blocking TCP loop (realtime); returns after stop().
    void serve();
    void stop();

    // Generates and loads every chunk within radius of (x, z) immediately,
    // without charges or storage traffic. Scenario setup helper standing in
    // for a world that existed before the run.
    void preload_view(int32_t x, int32_t z, int radius_blocks);

    // Moves component records (efficiency, invocations, storage, ticks) into
    // the metrics log. Called automatically as runs progress; call once more
    // before reading.
    void collect_metrics();

    WorldState& world() { return world_; }
    ConstructRegistry& registry() { return registry_; }
    SpeculativeExecutor* executor() { return exec_.get(); }
    FaasEmulator& faas() { return *faas_; }
    ChunkStore& store() { return *store_; }
    MetricsLog& metrics() { return metrics_; }
    const ServerConfig& config() const { return cfg_; }

    uint64_t world_content_hash() const;
    uint64_t constructs_hash() const;

    struct Diag {
        uint64_t actions_applied = 0;
        uint64_t actions_rejected = 0;
        uint64_t chunks_loaded = 0;
        uint64_t chunks_generated_sync = 0;
        uint64_t gen_dispatched = 0;
        uint64_t emitted_frames = 0;
        uint64_t emitted_bytes = 0;
        uint64_t flushes = 0;
    };
    const Diag& diag() const { return diag_; }

private:
    struct ActiveMove {
        Pos target;
        uint8_t speed;
    };

    struct Session {
        PlayerId id = 0;
        std::string name;
        bool lite = false;
        int fd = -1;
        double ax = 0, az = 0;
        std::deque<PlayerAction> queue;
        std::optional<ActiveMove> move;
        int64_t stand_remaining = 0;
        uint16_t item = 0;
        std::set<ChunkCoord> sent_chunks;
        ChunkCoord last_chunk{INT32_MIN, INT32_MIN};
        bool needs_full_view = true;
        std::deque<std::pair<MsgTag, std::vector<uint8_t>>> outbox;
        bool dead = false;
    };

    void tick(int64_t t);
    void phase_drain(int64_t t, TickSample& sample);
    void phase_actions(int64_t t, TickSample& sample);
    void phase_constructs(int64_t t, TickSample& sample);
    void phase_terrain_storage(int64_t t, TickSample& sample);
    void phase_emit(int64_t t, TickSample& sample);

    void start_action(Session& s, const PlayerAction& a, int64_t t);
    void advance_move(Session& s);
    void apply_set_block(const Pos& p, Block b, int64_t t);
    void load_chunk_bytes(const std::vector<uint8_t>& bytes, bool mark_dirty);
    void refresh_required();
    void flush_world(int64_t now_ms);
    void queue_frame(Session& s, MsgTag tag, const std::vector<uint8_t>& payload);
    void flush_fd(Session& s);
    PlayerId connect_locked(const std::string& name, bool lite, int fd);
    void accept_loop();
    void conn_reader(int fd);
    Pos spawn_pos() const;
    int distance_sample() const;

    ServerConfig cfg_;
    WorldState world_;
    ConstructRegistry registry_;
    std::unique_ptr<SpeculativeExecutor> exec_;
    std::unique_ptr<FaasEmulator> faas_;
    std::unique_ptr<ChunkStore> store_;
    MetricsLog metrics_;
    Diag diag_;

    std::map<PlayerId, Session> sessions_;
    mutable std::mutex sessions_mu_;  // guards joins/actions from TCP threads
    std::vector<BlockChangeMsg> block_changes_;  // broadcast this tick
    std::vector<ChatBroadcastMsg> chat_queue_;
    bool loaded_this_tick_ = false;

    struct PendingLoad {
        ChunkCoord coord;
        std::vector<uint8_t> bytes;
        bool mark_dirty = false;
    };
    std::map<std::pair<int64_t, ChunkCoord>, PendingLoad> load_queue_;
    std::set<ChunkCoord> in_flight_;
    std::vector<GenReply> gen_replies_;

    std::set<ChunkCoord> required_cache_;  // view squares
    std::set<ChunkCoord> wanted_cache_;    // view + generation margin
    std::set<ChunkCoord> missing_required_;
    std::map<PlayerId, ChunkCoord> avatar_chunks_;
    bool required_dirty_ = true;

    double gen_credit_ms_ = 0;
    int64_t last_flush_ms_ = 0;
    int64_t next_tick_ = 0;
    PlayerId next_player_id_ = 1;
    std::atomic<bool> stop_{false};

    std::chrono::steady_clock::time_point run_start_{};
    std::chrono::steady_clock::time_point next_deadline_{};
    bool run_start_set_ = false;

    int listen_fd_ = -1;
    std::vector<std::thread> conn_threads_;
};

}  // namespace servo
