#include <doctest.h>

#include <filesystem>
#include <set>

#include "servo/workload.hpp"

using namespace servo;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
    auto p = fs::temp_directory_path() / ("servo_wltest_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

ServerConfig flat_config(const std::string& tag) {
    ServerConfig cfg;
    cfg.world = WorldSeed{1, TerrainKind::Flat};
    cfg.view_distance_blocks = 32;
    cfg.sc_mode = ScMode::LocalOnly;
    cfg.terrain_mode = TerrainMode::LocalSync;
    cfg.data_dir = fresh_dir(tag);
    cfg.seed = 7;
    return cfg;
}

}  // namespace

TEST_CASE("clock fixtures are connected chains of the requested size") {
    auto fix = clock_fixture(40, Pos{16, 8, 0});
    REQUIRE(fix.blocks.size() == 40);
    CHECK(fix.blocks[0].second.type == BlockType::Inverter);
    for (size_t i = 1; i < fix.blocks.size(); ++i) {
        CHECK(fix.blocks[i].second.type == BlockType::Wire);
    }

    // Consecutive path cells are orthogonally adjacent, so the registry will
    // see one connected construct.
    for (size_t i = 1; i < fix.blocks.size(); ++i) {
        Pos a = fix.blocks[i - 1].first;
        Pos b = fix.blocks[i].first;
        int d = std::abs(a.x - b.x) + std::abs(a.y - b.y) + std::abs(a.z - b.z);
        CHECK(d == 1);
    }

    std::set<Pos> unique;
    for (const auto& [p, b] : fix.blocks) {
        CHECK(fix.bounds.contains(p));
        unique.insert(p);
    }
    CHECK(unique.size() == 40);

    // Stays within one chunk footprint.
    auto big = clock_fixture(300, Pos{0, 8, 0});
    for (const auto& [p, b] : big.blocks) {
        CHECK(chunk_of(p) == ChunkCoord{0, 0});
    }

    CHECK_THROWS_AS(clock_fixture(1, Pos{0, 8, 0}), std::invalid_argument);
    CHECK_THROWS_AS(clock_fixture(5000, Pos{0, 8, 0}), std::invalid_argument);
}

TEST_CASE("an installed clock fixture oscillates forever") {
    Server srv(flat_config("clock"));
    srv.preload_view(0, 0, 32);
    auto fix = clock_fixture(12, Pos{2, 8, 2});
    ConstructId id = install_fixture(srv, fix);
    REQUIRE(id != 0);
    REQUIRE(srv.registry().constructs().size() == 1);
    CHECK(srv.registry().find(id)->cells.size() == 12);

    std::set<uint64_t> seen;
    for (int i = 0; i < 16; ++i) {
        srv.run_ticks(1);
        seen.insert(state_hash(*srv.registry().find(id)));
    }
    CHECK(seen.size() >= 2);
}

TEST_CASE("fixture bases land on distinct chunks away from spawn") {
    auto bases = fixture_grid(20);
    REQUIRE(bases.size() == 20);
    std::set<ChunkCoord> coords;
    for (Pos b : bases) {
        CHECK(b.y == 8);
        CHECK(floor_mod(b.x, 16) == 0);
        CHECK(floor_mod(b.z, 16) == 0);
        ChunkCoord c = chunk_of(b.x, b.z);
        CHECK(c != ChunkCoord{0, 0});
        coords.insert(c);
    }
    CHECK(coords.size() == 20);
}

TEST_CASE("star walk covers all directions and keeps returning home") {
    Server srv(flat_config("star"));
    srv.preload_view(0, 0, 80);
    PlayerId id = srv.connect_player("star", true);
    BotConfig bc;
    bc.behavior = BotBehavior::StarWalk;
    bc.speed = 8;
    bc.leg_blocks = 32;
    Bot bot(id, 0, 7, bc);

    int at_origin = 0;
    bool east = false, west = false, north = false, south = false;
    for (int t = 0; t < 1400; ++t) {
        srv.run_ticks(1);
        bot.pump(srv);
        Pos p = srv.avatar_pos(id);
        if (p.x == 0 && p.z == 0) ++at_origin;
        east |= p.x > 20;
        west |= p.x < -20;
        north |= p.z > 20;
        south |= p.z < -20;
    }
    CHECK(at_origin >= 8);
    CHECK(east);
    CHECK(west);
    CHECK(north);
    CHECK(south);
}

TEST_CASE("frontier walk only moves outward and speeds up") {
    Server srv(flat_config("frontier"));
    srv.preload_view(0, 0, 150);
    PlayerId id = srv.connect_player("frontier", true);
    BotConfig bc;
    bc.behavior = BotBehavior::FrontierWalk;
    bc.leg_blocks = 16;
    bc.speed_interval_s = 2.0;  // +1 speed every 40 ticks
    Bot bot(id, 0, 7, bc);

    std::vector<int32_t> xs;
    for (int t = 0; t < 300; ++t) {
        srv.run_ticks(1);
        bot.pump(srv);
        xs.push_back(srv.avatar_pos(id).x);
    }
    for (size_t i = 1; i < xs.size(); ++i) CHECK(xs[i] >= xs[i - 1]);
    int early = xs[40] - xs[0];
    int late = xs[280] - xs[240];
    CHECK(late > early);
    CHECK(xs.back() > 30);
}

TEST_CASE("bounded movement never leaves its square") {
    Server srv(flat_config("bounded"));
    srv.preload_view(0, 0, 64);
    PlayerId id = srv.connect_player("bounded", true);
    BotConfig bc;
    bc.behavior = BotBehavior::BoundedMove;
    bc.speed = 6;
    bc.bound_radius = 20;
    Bot bot(id, 0, 7, bc);

    for (int t = 0; t < 400; ++t) {
        srv.run_ticks(1);
        bot.pump(srv);
        Pos p = srv.avatar_pos(id);
        CHECK(std::abs(p.x) <= 20);
        CHECK(std::abs(p.z) <= 20);
    }
}

TEST_CASE("random action bots edit the world unless excluded") {
    Server srv(flat_config("random"));
    srv.preload_view(0, 0, 64);
    PlayerId observer = srv.connect_player("observer");
    PlayerId id = srv.connect_player("rando", true);
    BotConfig bc;
    bc.behavior = BotBehavior::RandomActions;
    bc.bound_radius = 24;
    Bot bot(id, 0, 7, bc);

    for (int t = 0; t < 500; ++t) {
        srv.run_ticks(1);
        bot.pump(srv);
    }
    size_t edits = 0;
    for (const auto& [tag, p] : srv.drain_outbox(observer)) {
        if (tag == MsgTag::BlockChange) ++edits;
    }
    CHECK(edits > 0);
    CHECK(srv.diag().actions_applied > 0);

    // Same behavior with an exclusion box over the whole play area stops all
    // block edits.
    Server srv2(flat_config("random_excl"));
    srv2.preload_view(0, 0, 64);
    PlayerId obs2 = srv2.connect_player("observer");
    PlayerId id2 = srv2.connect_player("rando", true);
    BotConfig bc2 = bc;
    bc2.exclusions.push_back(BlockBox{{-100, 0, -100}, {100, 255, 100}});
    Bot bot2(id2, 0, 7, bc2);
    for (int t = 0; t < 300; ++t) {
        srv2.run_ticks(1);
        bot2.pump(srv2);
    }
    for (const auto& [tag, p] : srv2.drain_outbox(obs2)) {
        CHECK(tag != MsgTag::BlockChange);
    }
}

TEST_CASE("scenario configs parse from flat key values") {
    auto kv = KVConfig::from_string(
        "players = 12\n"
        "behavior = star_walk\n"
        "bot_leg_blocks = 48\n"
        "sc_count = 3\n"
        "sc_cells = 100\n"
        "duration_s = 15\n"
        "warmup_s = 5\n"
        "sc_mode = local_only\n"
        "terrain_mode = local_async\n");
    auto sc = scenario_from_kv(kv);
    CHECK(sc.players == 12);
    CHECK(sc.bot.behavior == BotBehavior::StarWalk);
    CHECK(sc.bot.leg_blocks == 48);
    CHECK(sc.sc_count == 3);
    CHECK(sc.sc_cells == 100);
    CHECK(sc.duration_s == 15);
    CHECK(sc.warmup_s == 5);
    CHECK(sc.server.sc_mode == ScMode::LocalOnly);
    CHECK(sc.server.terrain_mode == TerrainMode::LocalAsync);
}

TEST_CASE("identical scenario seeds reproduce the run bit for bit") {
    auto make = [](const std::string& tag) {
        ScenarioConfig sc;
        sc.server = flat_config(tag);
        sc.server.sc_mode = ScMode::Offloaded;
        sc.players = 2;
        sc.bot.behavior = BotBehavior::RandomActions;
        sc.bot.bound_radius = 24;
        sc.sc_count = 2;
        sc.sc_cells = 12;
        sc.duration_s = 6;
        sc.warmup_s = 2;
        return sc;
    };
    auto a = run_scenario(make("det_a"));
    auto b = run_scenario(make("det_b"));

    CHECK(a.total_ticks == 120);
    CHECK(a.warmup_ticks == 40);
    CHECK(a.world_hash == b.world_hash);
    CHECK(a.constructs_hash == b.constructs_hash);

    REQUIRE(a.metrics.ticks.size() == b.metrics.ticks.size());
    for (size_t i = 0; i < a.metrics.ticks.size(); ++i) {
        CHECK(a.metrics.ticks[i].emulated_ms == b.metrics.ticks[i].emulated_ms);
    }
    REQUIRE(a.metrics.efficiency.size() == b.metrics.efficiency.size());
    for (size_t i = 0; i < a.metrics.efficiency.size(); ++i) {
        const auto& x = a.metrics.efficiency[i];
        const auto& y = b.metrics.efficiency[i];
        CHECK(x.seq == y.seq);
        CHECK(x.construct_id == y.construct_id);
        CHECK(x.total_steps == y.total_steps);
        CHECK(x.duplicated_steps == y.duplicated_steps);
        CHECK(x.efficiency == y.efficiency);
    }
    REQUIRE(a.metrics.invocations.size() == b.metrics.invocations.size());
    for (size_t i = 0; i < a.metrics.invocations.size(); ++i) {
        CHECK(a.metrics.invocations[i].end_to_end_ms ==
              b.metrics.invocations[i].end_to_end_ms);
        CHECK(a.metrics.invocations[i].enqueue_ms == b.metrics.invocations[i].enqueue_ms);
    }
    REQUIRE(a.metrics.distance.size() == b.metrics.distance.size());
    for (size_t i = 0; i < a.metrics.distance.size(); ++i) {
        CHECK(a.metrics.distance[i].distance_blocks ==
              b.metrics.distance[i].distance_blocks);
    }
}
