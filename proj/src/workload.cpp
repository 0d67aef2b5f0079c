#include "servo/workload.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace servo {

namespace {
constexpr double kTau = 6.283185307179586476925;
constexpr int kStarRays = 8;
}  // namespace

const char* bot_behavior_name(BotBehavior b) {
    switch (b) {
        case BotBehavior::StarWalk: return "star_walk";
        case BotBehavior::FrontierWalk: return "frontier_walk";
        case BotBehavior::RandomActions: return "random_actions";
        case BotBehavior::BoundedMove: return "bounded_move";
    }
    return "?";
}

BotBehavior parse_bot_behavior(const std::string& s) {
    if (s == "star_walk") return BotBehavior::StarWalk;
    if (s == "frontier_walk") return BotBehavior::FrontierWalk;
    if (s == "random_actions") return BotBehavior::RandomActions;
    if (s == "bounded_move") return BotBehavior::BoundedMove;
    throw std::invalid_argument("unknown bot behavior: " + s);
}

Bot::Bot(PlayerId id, int index, uint64_t root_seed, BotConfig cfg)
    : id_(id), cfg_(std::move(cfg)),
      rng_(derive_seed(root_seed, "bot", (uint64_t)index)) {}

void Bot::pump(Server& server) {
    // FrontierWalk re-issues its move when the speed ramp crosses a step, so
    // it pumps even while a leg is still in progress.
    if (cfg_.behavior == BotBehavior::FrontierWalk) {
        issue_frontier_walk(server);
        return;
    }
    if (!server.action_idle(id_)) return;
    switch (cfg_.behavior) {
        case BotBehavior::StarWalk: issue_star_walk(server); break;
        case BotBehavior::FrontierWalk: break;
        case BotBehavior::RandomActions: issue_random_action(server); break;
        case BotBehavior::BoundedMove: issue_bounded_move(server); break;
    }
}

bool Bot::excluded(const Pos& p) const {
    for (const BlockBox& box : cfg_.exclusions) {
        if (box.contains(p)) return true;
    }
    return false;
}

void Bot::issue_star_walk(Server& server) {
    PlayerAction a;
    a.kind = PlayerAction::Kind::Move;
    a.speed = cfg_.speed;
    if (outbound_) {
        double ang = kTau * ray_ / kStarRays;
        a.target = Pos{(int32_t)std::llround(std::cos(ang) * cfg_.leg_blocks), 0,
                       (int32_t)std::llround(std::sin(ang) * cfg_.leg_blocks)};
        outbound_ = false;
    } else {
        a.target = Pos{0, 0, 0};
        outbound_ = true;
        ray_ = (ray_ + 1) % kStarRays;
    }
    server.submit_action(id_, a);
}

void Bot::issue_frontier_walk(Server& server) {
    int64_t interval_ticks =
        std::max<int64_t>(1, (int64_t)std::llround(cfg_.speed_interval_s *
                                                   server.config().tick_rate_hz));
    int speed = std::clamp((int)(1 + server.current_tick() / interval_ticks), 1, 8);
    bool idle = server.action_idle(id_);
    if (!idle && speed == last_speed_) return;
    if (idle) frontier_x_ += cfg_.leg_blocks;
    PlayerAction a;
    a.kind = PlayerAction::Kind::Move;
    a.speed = (uint8_t)speed;
    a.target = Pos{(int32_t)frontier_x_, 0, 0};
    last_speed_ = speed;
    server.submit_action(id_, a);
}

void Bot::issue_random_action(Server& server) {
    Pos my = server.avatar_pos(id_);
    PlayerAction a;
    double u = rng_.next_double();
    if (u < 0.40) {
        // Short hops so the bot interleaves edits with movement instead of
        // committing to one long trek across the play area.
        auto hop = [&](int32_t from) {
            int32_t t = from + (int32_t)rng_.uniform_int(-8, 8);
            return std::clamp(t, -cfg_.bound_radius, cfg_.bound_radius);
        };
        a.kind = PlayerAction::Kind::Move;
        a.target = Pos{hop(my.x), 0, hop(my.z)};
        a.speed = (uint8_t)rng_.uniform_int(2, 8);
    } else if (u < 0.70) {
        a.kind = PlayerAction::Kind::Break;
        a.target = Pos{my.x + (int32_t)rng_.uniform_int(-3, 3), my.y - 1,
                       my.z + (int32_t)rng_.uniform_int(-3, 3)};
        if (excluded(a.target)) {
            a.kind = PlayerAction::Kind::Stand;
            a.stand_ticks = 1;
        }
    } else if (u < 0.90) {
        a.kind = PlayerAction::Kind::Place;
        a.target = Pos{my.x + (int32_t)rng_.uniform_int(-3, 3), my.y,
                       my.z + (int32_t)rng_.uniform_int(-3, 3)};
        double v = rng_.next_double();
        if (v < 0.6) a.place_type = BlockType::Solid;
        else if (v < 0.7) a.place_type = BlockType::Wire;
        else if (v < 0.8) a.place_type = BlockType::Source;
        else if (v < 0.9) a.place_type = BlockType::Inverter;
        else a.place_type = BlockType::Lamp;
        if (excluded(a.target)) {
            a.kind = PlayerAction::Kind::Stand;
            a.stand_ticks = 1;
        }
    } else if (u < 0.95) {
        a.kind = PlayerAction::Kind::Stand;
        a.stand_ticks = (uint16_t)rng_.uniform_int(10, 40);
    } else {
        a.kind = PlayerAction::Kind::Chat;
        a.text = "ping";
    }
    server.submit_action(id_, a);
}

void Bot::issue_bounded_move(Server& server) {
    PlayerAction a;
    a.kind = PlayerAction::Kind::Move;
    a.speed = cfg_.speed;
    a.target = Pos{(int32_t)rng_.uniform_int(-cfg_.bound_radius, cfg_.bound_radius), 0,
                   (int32_t)rng_.uniform_int(-cfg_.bound_radius, cfg_.bound_radius)};
    server.submit_action(id_, a);
}

FixtureSpec clock_fixture(int cells, Pos base) {
    if (cells < 2) throw std::invalid_argument("clock fixture needs at least 2 cells");
    if (cells > 16 * 16 * 16) throw std::invalid_argument("clock fixture too large");

    // One layer's serpentine order; odd layers replay it in reverse so the
    // vertical step between layers is always between adjacent path cells.
    std::vector<std::pair<int, int>> order;
    order.reserve(256);
    for (int z = 0; z < 16; ++z) {
        for (int i = 0; i < 16; ++i) {
            order.emplace_back(z % 2 == 0 ? i : 15 - i, z);
        }
    }

    std::vector<Pos> path;
    path.reserve(cells);
    for (int layer = 0; (int)path.size() < cells; ++layer) {
        if (layer % 2 == 0) {
            for (auto [x, z] : order) {
                if ((int)path.size() >= cells) break;
                path.push_back(Pos{base.x + x, base.y + layer, base.z + z});
            }
        } else {
            for (auto it = order.rbegin(); it != order.rend(); ++it) {
                if ((int)path.size() >= cells) break;
                path.push_back(Pos{base.x + it->first, base.y + layer, base.z + it->second});
            }
        }
    }

    FixtureSpec fix;
    fix.bounds = BlockBox{path[0], path[0]};
    for (const Pos& p : path) {
        fix.bounds.min.x = std::min(fix.bounds.min.x, p.x);
        fix.bounds.min.y = std::min(fix.bounds.min.y, p.y);
        fix.bounds.min.z = std::min(fix.bounds.min.z, p.z);
        fix.bounds.max.x = std::max(fix.bounds.max.x, p.x);
        fix.bounds.max.y = std::max(fix.bounds.max.y, p.y);
        fix.bounds.max.z = std::max(fix.bounds.max.z, p.z);
    }
    fix.blocks.reserve(path.size());
    fix.blocks.emplace_back(path[0], make_block(BlockType::Inverter));
    for (size_t i = 1; i < path.size(); ++i) {
        fix.blocks.emplace_back(path[i], make_block(BlockType::Wire));
    }
    return fix;
}

ConstructId install_fixture(Server& server, const FixtureSpec& fix) {
    WorldState& world = server.world();
    std::set<ChunkCoord> touched;
    for (const auto& [p, b] : fix.blocks) {
        Chunk& ch = world.chunk_or_throw(chunk_of(p));
        ch.set_local(floor_mod(p.x, kChunkSizeX), p.y, floor_mod(p.z, kChunkSizeZ), b);
        ch.dirty = true;
        touched.insert(ch.coord);
    }
    ConstructId created = 0;
    for (ChunkCoord c : touched) {
        auto changes = server.registry().on_chunk_loaded(world, c);
        for (const auto& rc : changes) {
            if (rc.kind == RegistryChange::Kind::Created) created = rc.id;
        }
        route_registry_changes(changes, server.registry(), server.executor());
    }
    return created;
}

std::vector<Pos> fixture_grid(int count, int base_y) {
    // Every other chunk, so fixtures in neighboring grid slots can never be
    // block-adjacent and flood into one construct.
    std::vector<Pos> bases;
    bases.reserve(count);
    for (int r = 1; (int)bases.size() < count && r <= 64; ++r) {
        std::vector<ChunkCoord> ring;
        for (int cx = -r; cx <= r; ++cx) {
            for (int cz = -r; cz <= r; ++cz) {
                if (std::max(std::abs(cx), std::abs(cz)) == r) {
                    ring.push_back(ChunkCoord{2 * cx, 2 * cz});
                }
            }
        }
        std::sort(ring.begin(), ring.end());
        for (ChunkCoord c : ring) {
            if ((int)bases.size() >= count) break;
            bases.push_back(Pos{c.cx * kChunkSizeX, base_y, c.cz * kChunkSizeZ});
        }
    }
    if ((int)bases.size() < count) throw std::invalid_argument("fixture grid overflow");
    return bases;
}

ScenarioConfig scenario_from_kv(const KVConfig& kv) {
    ScenarioConfig sc;
    sc.server = server_config_from_kv(kv);
    sc.players = (int)kv.get_int("players", sc.players);
    sc.bot.behavior =
        parse_bot_behavior(kv.get_str("behavior", bot_behavior_name(sc.bot.behavior)));
    sc.bot.speed = (uint8_t)kv.get_int("bot_speed", sc.bot.speed);
    sc.bot.leg_blocks = (int)kv.get_int("bot_leg_blocks", sc.bot.leg_blocks);
    sc.bot.speed_interval_s = kv.get_double("speed_interval_s", sc.bot.speed_interval_s);
    sc.bot.bound_radius = (int)kv.get_int("bot_bound_radius", sc.bot.bound_radius);
    sc.join_interval_s = kv.get_double("join_interval_s", sc.join_interval_s);
    sc.sc_count = (int)kv.get_int("sc_count", sc.sc_count);
    sc.sc_cells = (int)kv.get_int("sc_cells", sc.sc_cells);
    sc.duration_s = kv.get_double("duration_s", sc.duration_s);
    sc.warmup_s = kv.get_double("warmup_s", sc.warmup_s);
    sc.preload_radius = (int)kv.get_int("preload_radius", sc.preload_radius);
    return sc;
}

ScenarioResult run_scenario(const ScenarioConfig& cfg) {
    Server srv(cfg.server);

    int preload = cfg.preload_radius;
    if (preload < 0) {
        preload = cfg.server.view_distance_blocks;
        if (cfg.bot.behavior != BotBehavior::FrontierWalk) {
            preload += std::max(cfg.bot.bound_radius, cfg.bot.leg_blocks) + 32;
        }
    }
    if (preload > 0) srv.preload_view(0, 0, preload);

    BotConfig bc = cfg.bot;
    if (cfg.sc_count > 0) {
        auto bases = fixture_grid(cfg.sc_count);
        for (Pos base : bases) {
            if (!srv.world().is_loaded(chunk_of(base.x, base.z))) {
                srv.preload_view(base.x + kChunkSizeX / 2, base.z + kChunkSizeZ / 2, 8);
            }
            auto fix = clock_fixture(cfg.sc_cells, base);
            install_fixture(srv, fix);
            bc.exclusions.push_back(fix.bounds);
        }
    }

    int rate = srv.config().tick_rate_hz;
    int64_t total_ticks = (int64_t)std::llround(cfg.duration_s * rate);
    int64_t join_every = (int64_t)std::llround(cfg.join_interval_s * rate);

    std::vector<Bot> bots;
    bots.reserve(cfg.players);
    auto join_one = [&](int i) {
        PlayerId id = srv.connect_player("bot" + std::to_string(i), true);
        bots.emplace_back(id, i, cfg.server.seed, bc);
    };
    int joined = 0;
    if (join_every <= 0) {
        while (joined < cfg.players) join_one(joined++);
    }

    for (int64_t t = 0; t < total_ticks; ++t) {
        while (join_every > 0 && joined < cfg.players &&
               t >= (int64_t)joined * join_every) {
            join_one(joined++);
        }
        srv.run_ticks(1);
        for (auto& b : bots) b.pump(srv);
    }

    srv.collect_metrics();
    ScenarioResult res;
    res.metrics = std::move(srv.metrics());
    res.warmup_ticks = (int64_t)std::llround(cfg.warmup_s * rate);
    res.total_ticks = total_ticks;
    res.world_hash = srv.world_content_hash();
    res.constructs_hash = srv.constructs_hash();
    res.diag = srv.diag();
    if (srv.executor()) res.exec_counters = srv.executor()->counters();
    return res;
}

}  // namespace servo
