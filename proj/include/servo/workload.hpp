#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "servo/config.hpp"
#include "servo/construct.hpp"
#include "servo/rng.hpp"
#include "servo/server.hpp"

namespace servo {

enum class BotBehavior {
    StarWalk,       // out-and-back legs at evenly spaced angles, fixed speed
    FrontierWalk,   // walks outward along +x forever; speed ramps up over time
    RandomActions,  // categorical mix of move/break/place/stand/chat
    BoundedMove,    // move-only inside a radius around spawn
};

const char* bot_behavior_name(BotBehavior b);
BotBehavior parse_bot_behavior(const std::string& s);

struct BotConfig {
    BotBehavior behavior = BotBehavior::RandomActions;
    uint8_t speed = 2;            // StarWalk / BoundedMove
    int leg_blocks = 64;          // StarWalk leg length, FrontierWalk stride
    double speed_interval_s = 200.0;  // FrontierWalk: +1 speed per interval
    int bound_radius = 64;        // RandomActions / BoundedMove target square
    std::vector<BlockBox> exclusions;  // boxes break/place must not touch
};

// Scripted player. Call pump() after every server tick; issues the next
// action once the previous one has finished. Fully deterministic given the
// seed and the server's responses.
class Bot {
public:
    Bot(PlayerId id, int index, uint64_t root_seed, BotConfig cfg);

    PlayerId id() const { return id_; }
    void pump(Server& server);

private:
    void issue_star_walk(Server& server);
    void issue_frontier_walk(Server& server);
    void issue_random_action(Server& server);
    void issue_bounded_move(Server& server);
    bool excluded(const Pos& p) const;

    PlayerId id_;
    BotConfig cfg_;
    Rng rng_;
    int ray_ = 0;
    bool outbound_ = true;
    int64_t frontier_x_ = 0;
    int last_speed_ = 0;
};

// A serpentine inverter-plus-wire chain of exactly `cells` stateful blocks,
// packed into one chunk footprint starting at base. The inverter keeps the
// chain oscillating forever, so the construct never settles into a fixed
// point; its state sequence is periodic.
struct FixtureSpec {
    std::vector<std::pair<Pos, Block>> blocks;
    BlockBox bounds;
};

FixtureSpec clock_fixture(int cells, Pos base);

// Writes the fixture's blocks straight into already loaded chunks and has
// the registry discover it as a single construct. Returns the construct id.
ConstructId install_fixture(Server& server, const FixtureSpec& fix);

// Chunk-aligned fixture bases spiraling outward from the world origin,
// skipping the spawn chunk. One fixture per chunk.
std::vector<Pos> fixture_grid(int count, int base_y = 8);

struct ScenarioConfig {
    ServerConfig server;
    int players = 1;
    BotConfig bot;
    double join_interval_s = 0;  // 0 joins everyone before the first tick
    int sc_count = 0;
    int sc_cells = 252;
    double duration_s = 60;
    double warmup_s = 30;
    int preload_radius = -1;  // -1 sizes it from behavior and view distance
};

ScenarioConfig scenario_from_kv(const KVConfig& kv);

struct ScenarioResult {
    MetricsLog metrics;
    int64_t warmup_ticks = 0;
    int64_t total_ticks = 0;
    uint64_t world_hash = 0;
    uint64_t constructs_hash = 0;
    Server::Diag diag;
    SpeculativeExecutor::Counters exec_counters;
};

ScenarioResult run_scenario(const ScenarioConfig& cfg);

}  // namespace servo
