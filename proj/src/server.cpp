#include "servo/server.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>

#include "servo/rng.hpp"

namespace servo {

namespace {

using Clock = std::chrono::steady_clock;

double ms_between(Clock::time_point a, Clock::time_point b) {
    return std::chrono::duration<double, std::milli>(b - a).count();
}

uint64_t pack_coord(ChunkCoord c) {
    return (uint64_t(uint32_t(c.cx)) << 32) | uint64_t(uint32_t(c.cz));
}

int chunk_distance_to(ChunkCoord c, const Pos& p) {
    int32_t x0 = c.cx * kChunkSizeX, x1 = x0 + kChunkSizeX - 1;
    int32_t z0 = c.cz * kChunkSizeZ, z1 = z0 + kChunkSizeZ - 1;
    int32_t dx = p.x < x0 ? x0 - p.x : (p.x > x1 ? p.x - x1 : 0);
    int32_t dz = p.z < z0 ? z0 - p.z : (p.z > z1 ? p.z - z1 : 0);
    return std::max(dx, dz);
}

}  // namespace

const char* terrain_mode_name(TerrainMode m) {
    switch (m) {
        case TerrainMode::LocalSync: return "local_sync";
        case TerrainMode::LocalAsync: return "local_async";
        case TerrainMode::Offloaded: return "offloaded";
    }
    return "?";
}

TerrainMode parse_terrain_mode(const std::string& s) {
    if (s == "local_sync") return TerrainMode::LocalSync;
    if (s == "local_async") return TerrainMode::LocalAsync;
    if (s == "offloaded") return TerrainMode::Offloaded;
    throw std::invalid_argument("unknown terrain mode: " + s);
}

const char* storage_mode_name(StorageMode m) {
    return m == StorageMode::LocalDisk ? "local_disk" : "emulated_blob";
}

StorageMode parse_storage_mode(const std::string& s) {
    if (s == "local_disk") return StorageMode::LocalDisk;
    if (s == "emulated_blob") return StorageMode::EmulatedBlob;
    throw std::invalid_argument("unknown storage mode: " + s);
}

ServerConfig server_config_from_kv(const KVConfig& kv) {
    ServerConfig cfg;
    cfg.tick_rate_hz = (int)kv.get_int("tick_rate_hz", cfg.tick_rate_hz);
    cfg.tick_budget_ms = kv.get_double("tick_budget_ms", cfg.tick_budget_ms);
    cfg.sc_mode = parse_sc_mode(kv.get_str("sc_mode", sc_mode_name(cfg.sc_mode)));
    cfg.terrain_mode =
        parse_terrain_mode(kv.get_str("terrain_mode", terrain_mode_name(cfg.terrain_mode)));
    cfg.storage_mode =
        parse_storage_mode(kv.get_str("storage_mode", storage_mode_name(cfg.storage_mode)));
    cfg.data_dir = kv.get_str("data_dir", "");
    cfg.world.seed = (uint64_t)kv.get_int("world_seed", 1);
    cfg.world.kind = kv.get_str("world_kind", "flat") == "hills" ? TerrainKind::Hills
                                                                 : TerrainKind::Flat;
    cfg.view_distance_blocks = (int)kv.get_int("view_distance", cfg.view_distance_blocks);
    cfg.gen_margin_blocks = (int)kv.get_int("gen_margin", cfg.gen_margin_blocks);
    cfg.max_chunk_loads_per_tick =
        (int)kv.get_int("max_chunk_loads_per_tick", cfg.max_chunk_loads_per_tick);
    cfg.prefetch_cadence_ticks =
        (int)kv.get_int("prefetch_cadence_ticks", cfg.prefetch_cadence_ticks);
    cfg.max_construct_blocks =
        (size_t)kv.get_int("max_construct_blocks", (int64_t)cfg.max_construct_blocks);
    cfg.max_players = (int)kv.get_int("max_players", cfg.max_players);
    cfg.realtime = kv.get_bool("realtime", cfg.realtime);
    cfg.policy.num_steps = (uint32_t)kv.get_int("offload_steps", cfg.policy.num_steps);
    cfg.policy.tick_lead = (uint32_t)kv.get_int("tick_lead", cfg.policy.tick_lead);
    cfg.policy.loop_detection = kv.get_bool("loop_detection", cfg.policy.loop_detection);
    cfg.policy.reinvoke_on_stale =
        kv.get_bool("reinvoke_on_stale", cfg.policy.reinvoke_on_stale);
    cfg.sc_latency.warm =
        DistSpec::parse(kv.get_str("faas_warm_latency", cfg.sc_latency.warm.to_string()));
    cfg.sc_latency.cold_extra = DistSpec::parse(
        kv.get_str("faas_cold_extra", cfg.sc_latency.cold_extra.to_string()));
    cfg.sc_latency.keep_warm_s =
        kv.get_double("faas_keep_warm_s", cfg.sc_latency.keep_warm_s);
    cfg.gen_latency.warm = cfg.sc_latency.warm;
    cfg.gen_latency.cold_extra = cfg.sc_latency.cold_extra;
    cfg.gen_latency.keep_warm_s = cfg.sc_latency.keep_warm_s;
    cfg.handler_costs.sc_per_step_us =
        kv.get_double("handler_sc_per_step_us", cfg.handler_costs.sc_per_step_us);
    cfg.handler_costs.sc_per_cell_step_us =
        kv.get_double("handler_sc_per_cell_step_us", cfg.handler_costs.sc_per_cell_step_us);
    cfg.handler_costs.gen_per_chunk_ms =
        kv.get_double("handler_gen_per_chunk_ms", cfg.handler_costs.gen_per_chunk_ms);
    cfg.cache.prefetch_margin_blocks =
        (int)kv.get_int("prefetch_margin", cfg.cache.prefetch_margin_blocks);
    cfg.cache.eviction_idle_s = kv.get_double("eviction_idle_s", cfg.cache.eviction_idle_s);
    cfg.cache.write_back_interval_s =
        kv.get_double("write_back_interval_s", cfg.cache.write_back_interval_s);
    cfg.costs.player_cost_us_per_tick =
        kv.get_double("player_cost_us_per_tick", cfg.costs.player_cost_us_per_tick);
    cfg.costs.sc_step_us_per_cell =
        kv.get_double("sc_step_us_per_cell", cfg.costs.sc_step_us_per_cell);
    cfg.costs.gen_local_ms = kv.get_double("gen_local_ms", cfg.costs.gen_local_ms);
    cfg.seed = (uint64_t)kv.get_int("seed", 1);
    cfg.listen_host = kv.get_str("listen_host", cfg.listen_host);
    cfg.listen_port = (int)kv.get_int("listen_port", cfg.listen_port);
    return cfg;
}

Server::Server(ServerConfig cfg)
    : cfg_(std::move(cfg)), registry_(cfg_.max_construct_blocks) {
    if (cfg_.data_dir.empty()) {
        cfg_.data_dir = std::filesystem::temp_directory_path() /
                        ("servo_" + std::to_string(::getpid()) + "_" +
                         std::to_string(derive_seed(cfg_.seed, "run_dir")));
    }
    std::filesystem::create_directories(cfg_.data_dir);
    world_.set_view_distance_blocks(cfg_.view_distance_blocks);

    std::unique_ptr<StorageBackend> backend;
    if (cfg_.storage_mode == StorageMode::LocalDisk) {
        auto dir = cfg_.data_dir / "blob";
        std::filesystem::create_directories(dir);
        backend = std::make_unique<LocalDiskBackend>(dir);
    } else {
        backend = std::make_unique<EmulatedBlobBackend>();
    }
    store_ = std::make_unique<ChunkStore>(cfg_.data_dir / "cache", std::move(backend),
                                          cfg_.cache, derive_seed(cfg_.seed, "storage"));

    FaasConfig fc;
    fc.sc = cfg_.sc_latency;
    fc.gen = cfg_.gen_latency;
    fc.costs = cfg_.handler_costs;
    fc.world = cfg_.world;
    fc.seed = derive_seed(cfg_.seed, "faas");
    faas_ = std::make_unique<FaasEmulator>(fc);

    if (cfg_.sc_mode == ScMode::Offloaded) {
        exec_ = std::make_unique<SpeculativeExecutor>(cfg_.policy);
    }
}

Server::~Server() {
    stop();
    try {
        flush_world(next_tick_ * cfg_.tick_period_ms());
    } catch (...) {
    }
    for (auto& th : conn_threads_) {
        if (th.joinable()) th.join();
    }
}

Pos Server::spawn_pos() const {
    return Pos{0, surface_height(cfg_.world, 0, 0), 0};
}

PlayerId Server::connect_locked(const std::string& name, bool lite, int fd) {
    if ((int)sessions_.size() >= cfg_.max_players) throw ServerFull();
    PlayerId id = next_player_id_++;
    Session s;
    s.id = id;
    s.name = name;
    s.lite = lite;
    s.fd = fd;
    Pos spawn = spawn_pos();
    s.ax = spawn.x;
    s.az = spawn.z;
    world_.avatars()[id] = spawn;
    required_dirty_ = true;
    Session& ref = sessions_.emplace(id, std::move(s)).first->second;
    WelcomeMsg w{id, (uint8_t)cfg_.tick_rate_hz, spawn};
    queue_frame(ref, MsgTag::Welcome, encode_welcome(w));
    if (ref.fd >= 0) flush_fd(ref);
    return id;
}

PlayerId Server::connect_player(const std::string& name, bool lite) {
    std::lock_guard<std::mutex> lk(sessions_mu_);
    return connect_locked(name, lite, -1);
}

void Server::disconnect_player(PlayerId id) {
    std::lock_guard<std::mutex> lk(sessions_mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) return;
    if (it->second.fd >= 0) ::close(it->second.fd);
    sessions_.erase(it);
    world_.avatars().erase(id);
    required_dirty_ = true;
}

void Server::submit_action(PlayerId id, const PlayerAction& action) {
    std::lock_guard<std::mutex> lk(sessions_mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) return;
    // Movement is continuous intent, not a queued job: the latest move wins
    // and cancels anything still pending.
    if (action.kind == PlayerAction::Kind::Move) {
        it->second.queue.clear();
        it->second.move.reset();
        it->second.stand_remaining = 0;
    }
    it->second.queue.push_back(action);
}

bool Server::action_idle(PlayerId id) const {
    std::lock_guard<std::mutex> lk(sessions_mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) return true;
    const Session& s = it->second;
    return s.queue.empty() && !s.move && s.stand_remaining == 0;
}

Pos Server::avatar_pos(PlayerId id) const {
    auto it = world_.avatars().find(id);
    if (it == world_.avatars().end()) throw std::out_of_range("no such avatar");
    return it->second;
}

std::vector<std::pair<MsgTag, std::vector<uint8_t>>> Server::drain_outbox(PlayerId id) {
    std::lock_guard<std::mutex> lk(sessions_mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) return {};
    std::vector<std::pair<MsgTag, std::vector<uint8_t>>> out(it->second.outbox.begin(),
                                                             it->second.outbox.end());
    it->second.outbox.clear();
    return out;
}

void Server::preload_view(int32_t x, int32_t z, int radius_blocks) {
    for (ChunkCoord c : chunks_within(x, z, radius_blocks)) {
        if (world_.is_loaded(c)) continue;
        world_.insert_chunk(generate_chunk(cfg_.world, c));
        auto changes = registry_.on_chunk_loaded(world_, c);
        route_registry_changes(changes, registry_, exec_.get());
    }
    required_dirty_ = true;
}

void Server::run_ticks(int64_t count) {
    if (!run_start_set_) {
        run_start_ = Clock::now();
        next_deadline_ = run_start_;
        run_start_set_ = true;
    }
    for (int64_t i = 0; i < count && !stop_.load(); ++i) {
        tick(next_tick_);
        ++next_tick_;
        if (cfg_.realtime) {
            next_deadline_ += std::chrono::milliseconds(cfg_.tick_period_ms());
            auto now = Clock::now();
            if (now < next_deadline_) {
                std::this_thread::sleep_until(next_deadline_);
            } else {
                next_deadline_ = now;
            }
        }
    }
    collect_metrics();
}

void Server::tick(int64_t t) {
    world_.set_tick(t);
    (void)faas_->take_handler_wall_ms();
    block_changes_.clear();
    chat_queue_.clear();
    loaded_this_tick_ = false;

    TickSample sample;
    sample.tick = t;
    auto t0 = Clock::now();
    sample.wall_offset_ms = ms_between(run_start_, t0);

    phase_drain(t, sample);
    phase_actions(t, sample);
    phase_constructs(t, sample);
    phase_terrain_storage(t, sample);
    phase_emit(t, sample);

    sample.wall_ms =
        sample.actions_ms + sample.sc_ms + sample.chunk_load_ms + sample.emit_ms;
    // Phase columns include their modeled charges; wall_ms should not.
    sample.wall_ms -= sample.emulated_ms;
    if (sample.wall_ms < 0) sample.wall_ms = 0;
    sample.duration_ms = sample.wall_ms + sample.emulated_ms;
    metrics_.ticks.push_back(sample);
    if (!world_.avatars().empty()) {
        metrics_.distance.push_back(DistanceSample{t, distance_sample()});
    }
}

void Server::phase_drain(int64_t t, TickSample& sample) {
    auto p0 = Clock::now();
    int64_t now_ms = t * cfg_.tick_period_ms();

    auto deliveries = faas_->poll(now_ms);
    gen_replies_.clear();
    route_deliveries(deliveries, exec_.get(), &gen_replies_);
    for (auto& gr : gen_replies_) {
        if (gr.error) {
            in_flight_.erase(gr.coord);
            continue;
        }
        load_queue_.emplace(std::make_pair(now_ms, gr.coord),
                            PendingLoad{gr.coord, std::move(gr.chunk_bytes), true});
    }

    int loads = 0;
    for (auto it = load_queue_.begin();
         it != load_queue_.end() && loads < cfg_.max_chunk_loads_per_tick;) {
        if (it->first.first > now_ms) break;
        PendingLoad pl = std::move(it->second);
        it = load_queue_.erase(it);
        in_flight_.erase(pl.coord);
        load_chunk_bytes(pl.bytes, pl.mark_dirty);
        ++loads;
    }

    double hw = faas_->take_handler_wall_ms();
    double w = ms_between(p0, Clock::now()) - hw;
    sample.chunk_load_ms += std::max(0.0, w);
}

void Server::load_chunk_bytes(const std::vector<uint8_t>& bytes, bool mark_dirty) {
    auto chunk = decode_chunk(bytes);
    ChunkCoord c = chunk->coord;
    if (world_.is_loaded(c)) return;
    chunk->dirty = mark_dirty;
    world_.insert_chunk(std::move(chunk));
    missing_required_.erase(c);
    auto changes = registry_.on_chunk_loaded(world_, c);
    route_registry_changes(changes, registry_, exec_.get());
    loaded_this_tick_ = true;
    ++diag_.chunks_loaded;
}

void Server::start_action(Session& s, const PlayerAction& a, int64_t t) {
    switch (a.kind) {
        case PlayerAction::Kind::Move: {
            uint8_t v = std::clamp<uint8_t>(a.speed, 1, 8);
            s.move = ActiveMove{a.target, v};
            break;
        }
        case PlayerAction::Kind::Break: {
            if (!world_.is_loaded(chunk_of(a.target)) ||
                world_.get_block(a.target).type == BlockType::Air) {
                ++diag_.actions_rejected;
                break;
            }
            apply_set_block(a.target, make_block(BlockType::Air), t);
            break;
        }
        case PlayerAction::Kind::Place: {
            if (!world_.is_loaded(chunk_of(a.target)) ||
                world_.get_block(a.target).type != BlockType::Air ||
                a.place_type == BlockType::Air) {
                ++diag_.actions_rejected;
                break;
            }
            uint8_t power = a.place_type == BlockType::Source ? kMaxPower : 0;
            apply_set_block(a.target, make_block(a.place_type, power), t);
            break;
        }
        case PlayerAction::Kind::Stand:
            s.stand_remaining = std::max<int64_t>(1, a.stand_ticks);
            break;
        case PlayerAction::Kind::Chat:
            chat_queue_.push_back(ChatBroadcastMsg{s.id, a.text});
            ++diag_.actions_applied;
            break;
        case PlayerAction::Kind::SetInventory:
            s.item = a.item;
            ++diag_.actions_applied;
            break;
    }
}

void Server::apply_set_block(const Pos& p, Block b, int64_t t) {
    auto ev = world_.set_block(p, b);
    auto changes = registry_.on_block_modified(world_, ev);
    route_registry_changes(changes, registry_, exec_.get());
    block_changes_.push_back(BlockChangeMsg{p, b, t});
    ++diag_.actions_applied;
}

void Server::advance_move(Session& s) {
    ActiveMove& mv = *s.move;
    double step = mv.speed * (cfg_.tick_period_ms() / 1000.0);
    double dx = mv.target.x - s.ax;
    double dz = mv.target.z - s.az;
    double dist = std::sqrt(dx * dx + dz * dz);
    // Epsilon absorbs accumulated per-tick rounding so a move that covers
    // its distance in exactly n ticks also completes in n ticks.
    if (dist <= step + 1e-9) {
        s.ax = mv.target.x;
        s.az = mv.target.z;
        s.move.reset();
    } else {
        s.ax += dx / dist * step;
        s.az += dz / dist * step;
    }
    auto bx = (int32_t)std::floor(s.ax + 0.5);
    auto bz = (int32_t)std::floor(s.az + 0.5);
    world_.avatars()[s.id] = Pos{bx, surface_height(cfg_.world, bx, bz), bz};
}

void Server::phase_actions(int64_t t, TickSample& sample) {
    auto p0 = Clock::now();
    std::lock_guard<std::mutex> lk(sessions_mu_);
    for (auto& [id, s] : sessions_) {
        if (!s.move && s.stand_remaining == 0 && !s.queue.empty()) {
            PlayerAction a = s.queue.front();
            s.queue.pop_front();
            start_action(s, a, t);
        }
        if (s.move) {
            advance_move(s);
        } else if (s.stand_remaining > 0) {
            --s.stand_remaining;
        }
    }
    double charge =
        (double)sessions_.size() * cfg_.costs.player_cost_us_per_tick / 1000.0;
    sample.emulated_ms += charge;
    sample.actions_ms += ms_between(p0, Clock::now()) + charge;
}

void Server::phase_constructs(int64_t t, TickSample& sample) {
    auto p0 = Clock::now();
    auto stats = advance_constructs(world_, registry_, cfg_.sc_mode, t, cfg_.costs,
                                    exec_.get(), faas_.get());
    double hw = faas_->take_handler_wall_ms();
    double w = std::max(0.0, ms_between(p0, Clock::now()) - hw);
    sample.emulated_ms += stats.emulated_ms;
    sample.sc_ms += w + stats.emulated_ms;
}

void Server::refresh_required() {
    std::map<PlayerId, ChunkCoord> fp;
    for (const auto& [id, p] : world_.avatars()) fp[id] = chunk_of(p);
    if (!required_dirty_ && fp == avatar_chunks_) return;
    avatar_chunks_ = std::move(fp);
    required_dirty_ = false;
    required_cache_ = world_.required_chunks();
    if (cfg_.terrain_mode == TerrainMode::LocalSync) {
        wanted_cache_ = required_cache_;
    } else {
        wanted_cache_ =
            world_.required_chunks(cfg_.view_distance_blocks + cfg_.gen_margin_blocks);
    }
    missing_required_.clear();
    for (ChunkCoord c : required_cache_) {
        if (!world_.is_loaded(c)) missing_required_.insert(c);
    }
}

void Server::phase_terrain_storage(int64_t t, TickSample& sample) {
    auto p0 = Clock::now();
    int64_t now_ms = t * cfg_.tick_period_ms();
    refresh_required();

    std::vector<ChunkCoord> gen_sync;
    for (ChunkCoord c : wanted_cache_) {
        if (world_.is_loaded(c) || in_flight_.count(c)) continue;
        auto rr = store_->read_chunk(blob_key(c), now_ms);
        if (rr) {
            load_queue_.emplace(std::make_pair(rr->available_at_ms, c),
                                PendingLoad{c, std::move(rr->bytes), false});
            in_flight_.insert(c);
            continue;
        }
        switch (cfg_.terrain_mode) {
            case TerrainMode::LocalSync:
                gen_sync.push_back(c);
                break;
            case TerrainMode::LocalAsync: {
                auto bytes = encode_chunk(*generate_chunk(cfg_.world, c));
                load_queue_.emplace(
                    std::make_pair(now_ms + (int64_t)cfg_.costs.gen_local_ms, c),
                    PendingLoad{c, std::move(bytes), true});
                in_flight_.insert(c);
                break;
            }
            case TerrainMode::Offloaded: {
                GenRequest req{cfg_.world, c};
                faas_->invoke(FnKind::TerrainGenerate, encode_gen_request(req), now_ms,
                              InvokeKeys{pack_coord(c), 0});
                in_flight_.insert(c);
                ++diag_.gen_dispatched;
                break;
            }
        }
    }

    if (cfg_.terrain_mode == TerrainMode::LocalSync) {
        if (gen_sync.empty()) {
            gen_credit_ms_ = 0;
        } else {
            gen_credit_ms_ += cfg_.tick_budget_ms;
            std::sort(gen_sync.begin(), gen_sync.end(), [this](ChunkCoord a, ChunkCoord b) {
                int da = INT32_MAX, db = INT32_MAX;
                for (const auto& [id, p] : world_.avatars()) {
                    da = std::min(da, chunk_distance_to(a, p));
                    db = std::min(db, chunk_distance_to(b, p));
                }
                return std::tie(da, a) < std::tie(db, b);
            });
            size_t i = 0;
            while (i < gen_sync.size() && gen_credit_ms_ >= cfg_.costs.gen_local_ms) {
                ChunkCoord c = gen_sync[i++];
                auto chunk = generate_chunk(cfg_.world, c);
                chunk->dirty = true;
                world_.insert_chunk(std::move(chunk));
                missing_required_.erase(c);
                auto changes = registry_.on_chunk_loaded(world_, c);
                route_registry_changes(changes, registry_, exec_.get());
                loaded_this_tick_ = true;
                gen_credit_ms_ -= cfg_.costs.gen_local_ms;
                sample.emulated_ms += cfg_.costs.gen_local_ms;
                sample.chunk_load_ms += cfg_.costs.gen_local_ms;
                ++diag_.chunks_generated_sync;
                ++diag_.chunks_loaded;
            }
        }
    }

    if (cfg_.prefetch_cadence_ticks > 0 && t % cfg_.prefetch_cadence_ticks == 0) {
        for (const auto& [id, p] : world_.avatars()) {
            store_->prefetch(p.x, p.z, cfg_.view_distance_blocks, now_ms);
        }
    }

    int64_t flush_every = (int64_t)(cfg_.cache.write_back_interval_s * 1000.0);
    if (flush_every > 0 && now_ms - last_flush_ms_ >= flush_every) {
        flush_world(now_ms);
        last_flush_ms_ = now_ms;
    }
    if (t % 20 == 0) store_->evict_idle(now_ms);

    double hw = faas_->take_handler_wall_ms();
    sample.chunk_load_ms += std::max(0.0, ms_between(p0, Clock::now()) - hw);
}

void Server::flush_world(int64_t now_ms) {
    if (!store_) return;
    for (const auto& [c, ch] : world_.chunks()) {
        if (!ch->dirty) continue;
        store_->write_chunk(blob_key(c), encode_chunk(*ch), now_ms);
        ch->dirty = false;
    }
    store_->flush(now_ms);
    ++diag_.flushes;
}

void Server::queue_frame(Session& s, MsgTag tag, const std::vector<uint8_t>& payload) {
    ++diag_.emitted_frames;
    diag_.emitted_bytes += payload.size() + 5;
    if (s.lite) return;
    s.outbox.emplace_back(tag, payload);
}

void Server::flush_fd(Session& s) {
    while (!s.outbox.empty()) {
        auto [tag, payload] = std::move(s.outbox.front());
        s.outbox.pop_front();
        auto frame = encode_frame(tag, payload);
        size_t off = 0;
        while (off < frame.size()) {
            ssize_t n = ::send(s.fd, frame.data() + off, frame.size() - off, MSG_NOSIGNAL);
            if (n <= 0) {
                s.dead = true;
                return;
            }
            off += (size_t)n;
        }
    }
}

void Server::phase_emit(int64_t t, TickSample& sample) {
    auto p0 = Clock::now();
    std::lock_guard<std::mutex> lk(sessions_mu_);

    std::map<ChunkCoord, std::vector<uint8_t>> encoded;
    for (auto& [id, s] : sessions_) {
        Pos pos = world_.avatars().at(id);
        ChunkCoord here = chunk_of(pos);
        if (s.needs_full_view || loaded_this_tick_ || here != s.last_chunk) {
            s.needs_full_view = false;
            s.last_chunk = here;
            for (ChunkCoord c : chunks_within(pos.x, pos.z, cfg_.view_distance_blocks)) {
                if (!world_.is_loaded(c) || s.sent_chunks.count(c)) continue;
                auto it = encoded.find(c);
                if (it == encoded.end()) {
                    it = encoded.emplace(c, encode_chunk(world_.chunk_or_throw(c))).first;
                }
                queue_frame(s, MsgTag::ChunkData, it->second);
                s.sent_chunks.insert(c);
            }
        }
        for (const auto& bc : block_changes_) {
            queue_frame(s, MsgTag::BlockChange, encode_block_change(bc));
        }
        for (const auto& cm : chat_queue_) {
            queue_frame(s, MsgTag::ChatBroadcast, encode_chat_broadcast(cm));
        }
    }

    AvatarPositionsMsg ap;
    ap.tick = t;
    for (const auto& [id, p] : world_.avatars()) ap.avatars.emplace_back(id, p);
    auto ap_bytes = encode_avatar_positions(ap);
    for (auto& [id, s] : sessions_) queue_frame(s, MsgTag::AvatarPositions, ap_bytes);

    std::vector<PlayerId> drop;
    for (auto& [id, s] : sessions_) {
        if (s.fd >= 0) {
            flush_fd(s);
            if (s.dead) drop.push_back(id);
        }
    }
    for (PlayerId id : drop) {
        auto it = sessions_.find(id);
        if (it == sessions_.end()) continue;
        ::close(it->second.fd);
        sessions_.erase(it);
        world_.avatars().erase(id);
        required_dirty_ = true;
    }

    sample.emit_ms += ms_between(p0, Clock::now());
}

int Server::distance_sample() const {
    if (missing_required_.empty()) return cfg_.view_distance_blocks;
    return distance_to_closest_unloaded(world_);
}

void Server::collect_metrics() {
    if (exec_) {
        auto recs = exec_->drain_records();
        metrics_.efficiency.insert(metrics_.efficiency.end(), recs.begin(), recs.end());
    }
    auto inv = faas_->drain_records();
    metrics_.invocations.insert(metrics_.invocations.end(), inv.begin(), inv.end());
    auto rd = store_->drain_reads();
    metrics_.storage_reads.insert(metrics_.storage_reads.end(), rd.begin(), rd.end());
    auto wr = store_->drain_writes();
    metrics_.storage_writes.insert(metrics_.storage_writes.end(), wr.begin(), wr.end());
}

uint64_t Server::world_content_hash() const {
    uint64_t h = 14695981039346656037ull;
    auto mix = [&h](const void* p, size_t n) {
        h = fnv1a64(static_cast<const uint8_t*>(p), n, h);
    };
    for (const auto& [c, ch] : world_.chunks()) {
        mix(&c.cx, sizeof c.cx);
        mix(&c.cz, sizeof c.cz);
        for (const Block& b : ch->blocks) {
            uint8_t tp[2] = {(uint8_t)b.type, b.power};
            mix(tp, 2);
        }
    }
    for (const auto& [id, p] : world_.avatars()) {
        mix(&id, sizeof id);
        mix(&p.x, sizeof p.x);
        mix(&p.y, sizeof p.y);
        mix(&p.z, sizeof p.z);
    }
    return h;
}

uint64_t Server::constructs_hash() const {
    uint64_t h = 14695981039346656037ull;
    auto mix = [&h](const void* p, size_t n) {
        h = fnv1a64(static_cast<const uint8_t*>(p), n, h);
    };
    for (const auto& [id, st] : registry_.constructs()) {
        mix(&id, sizeof id);
        int32_t bounds[6] = {st.bounds.min.x, st.bounds.min.y, st.bounds.min.z,
                             st.bounds.max.x, st.bounds.max.y, st.bounds.max.z};
        mix(bounds, sizeof bounds);
        for (const Block& b : st.cells) {
            uint8_t tp[2] = {(uint8_t)b.type, b.power};
            mix(tp, 2);
        }
        mix(&st.logical_ts, sizeof st.logical_ts);
        mix(&st.base_tick, sizeof st.base_tick);
    }
    return h;
}

void Server::stop() {
    stop_.store(true);
    if (listen_fd_ >= 0) ::shutdown(listen_fd_, SHUT_RDWR);
}

void Server::accept_loop() {
    while (!stop_.load()) {
        int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) break;
        int one = 1;
        ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
        std::lock_guard<std::mutex> lk(sessions_mu_);
        conn_threads_.emplace_back(&Server::conn_reader, this, fd);
    }
}

void Server::conn_reader(int fd) {
    FrameReader fr;
    PlayerId me = 0;
    uint8_t buf[16384];
    while (!stop_.load()) {
        ssize_t n = ::recv(fd, buf, sizeof buf, 0);
        if (n <= 0) break;
        fr.feed(buf, (size_t)n);
        while (auto frame = fr.next()) {
            auto& [tag, payload] = *frame;
            try {
                if (tag == MsgTag::Join && me == 0) {
                    JoinMsg jm = decode_join(payload);
                    std::lock_guard<std::mutex> lk(sessions_mu_);
                    me = connect_locked(jm.name, false, fd);
                } else if (tag == MsgTag::Action && me != 0) {
                    submit_action(me, decode_action(payload));
                }
            } catch (const WireError&) {
                goto done;
            } catch (const ServerFull&) {
                goto done;
            }
        }
    }
done:
    if (me != 0) disconnect_player(me);
    else ::close(fd);
}

void Server::serve() {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw std::runtime_error("socket() failed");
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons((uint16_t)cfg_.listen_port);
    addr.sin_addr.s_addr =
        cfg_.listen_host == "0.0.0.0" ? INADDR_ANY : inet_addr(cfg_.listen_host.c_str());
    if (::bind(listen_fd_, (sockaddr*)&addr, sizeof addr) != 0) {
        ::close(listen_fd_);
        listen_fd_ = -1;
        throw std::runtime_error("bind() failed on port " +
                                 std::to_string(cfg_.listen_port));
    }
    ::listen(listen_fd_, 64);
    cfg_.realtime = true;
    std::thread acceptor(&Server::accept_loop, this);
    while (!stop_.load()) run_ticks(1);
    ::close(listen_fd_);
    listen_fd_ = -1;
    acceptor.join();
    std::lock_guard<std::mutex> lk(sessions_mu_);
    for (auto& [id, s] : sessions_) {
        if (s.fd >= 0) ::shutdown(s.fd, SHUT_RDWR);
    }
}

}  // namespace servo
