#include "servo/faas.hpp"

#include <chrono>

#include "servo/rng.hpp"

namespace servo {

const char* fn_name(FnKind fn) {
    switch (fn) {
        case FnKind::ScSimulate:
            return "sc_simulate";
        case FnKind::TerrainGenerate:
            return "terrain_generate";
    }
    return "unknown";
}

std::vector<uint8_t> encode_offload_request(const OffloadRequest& req) {
    ByteWriter w;
    w.put_u64(req.seq);
    w.put_u64(req.construct_id);
    w.put_i64(req.start_tick);
    w.put_u32(req.num_steps);
    w.put_u64(req.logical_ts);
    w.put_u8(req.loop_detection ? 1 : 0);
    write_cells(w, req.state.bounds, req.state.cells);
    return w.take();
}

OffloadRequest decode_offload_request(const std::vector<uint8_t>& body) {
    ByteReader r(body);
    OffloadRequest req;
    req.seq = r.get_u64();
    req.construct_id = r.get_u64();
    req.start_tick = r.get_i64();
    req.num_steps = r.get_u32();
    req.logical_ts = r.get_u64();
    req.loop_detection = r.get_u8() != 0;
    auto [bounds, cells] = read_cells(r);
    if (!r.done()) throw WireError("offload request has trailing bytes");
    if (req.num_steps == 0) throw WireError("offload request with zero steps");
    req.state.id = req.construct_id;
    req.state.bounds = bounds;
    req.state.cells = std::move(cells);
    req.state.logical_ts = req.logical_ts;
    req.state.base_tick = req.start_tick;
    return req;
}

std::vector<uint8_t> encode_offload_reply(const OffloadReply& r) {
    ByteWriter w;
    w.put_u8(r.error ? 1 : 0);
    if (r.error) return w.take();
    w.put_u64(r.seq);
    w.put_u64(r.construct_id);
    w.put_i64(r.start_tick);
    w.put_u32(r.num_steps);
    w.put_u64(r.logical_ts);
    w.put_f64(r.worker_duration_ms);
    auto put_bounds = [&](const BlockBox& b) {
        w.put_i32(b.min.x);
        w.put_i32(b.min.y);
        w.put_i32(b.min.z);
        w.put_i32(b.max.x);
        w.put_i32(b.max.y);
        w.put_i32(b.max.z);
    };
    auto put_row = [&](const Cells& c) {
        for (const Block& b : c) {
            w.put_u8(static_cast<uint8_t>(b.type));
            w.put_u8(b.power);
        }
    };
    if (r.loop) {
        w.put_u8(1);
        put_bounds(r.loop->bounds);
        w.put_u32(static_cast<uint32_t>(r.loop->prefix.size()));
        w.put_u32(static_cast<uint32_t>(r.loop->cycle.size()));
        for (const Cells& c : r.loop->prefix) put_row(c);
        for (const Cells& c : r.loop->cycle) put_row(c);
    } else {
        w.put_u8(0);
        w.put_u32(static_cast<uint32_t>(r.states.size()));
        w.put_u32(r.states.empty() ? 0
                                   : static_cast<uint32_t>(r.states.front().size()));
        for (const Cells& c : r.states) put_row(c);
    }
    return w.take();
}

namespace {

Cells read_cell_row(ByteReader& r, size_t volume) {
    Cells cells(volume);
    for (size_t i = 0; i < volume; ++i) {
        uint8_t type = r.get_u8();
        uint8_t power = r.get_u8();
        if (type >= kBlockTypeCount) throw WireError("cell row has invalid type");
        cells[i] = Block{static_cast<BlockType>(type), power};
    }
    return cells;
}

}  // namespace

OffloadReply decode_offload_reply(const std::vector<uint8_t>& body) {
    ByteReader r(body);
    OffloadReply out;
    uint8_t status = r.get_u8();
    if (status != 0) {
        out.error = true;
        return out;
    }
    out.seq = r.get_u64();
    out.construct_id = r.get_u64();
    out.start_tick = r.get_i64();
    out.num_steps = r.get_u32();
    out.logical_ts = r.get_u64();
    out.worker_duration_ms = r.get_f64();
    uint8_t kind = r.get_u8();
    if (kind == 1) {
        LoopDescriptor d;
        d.bounds.min.x = r.get_i32();
        d.bounds.min.y = r.get_i32();
        d.bounds.min.z = r.get_i32();
        d.bounds.max.x = r.get_i32();
        d.bounds.max.y = r.get_i32();
        d.bounds.max.z = r.get_i32();
        if (d.bounds.max.x < d.bounds.min.x || d.bounds.max.y < d.bounds.min.y ||
            d.bounds.max.z < d.bounds.min.z)
            throw WireError("loop reply bounds are inverted");
        size_t volume = d.bounds.volume();
        uint32_t prefix_n = r.get_u32();
        uint32_t cycle_n = r.get_u32();
        if (cycle_n == 0) throw WireError("loop reply with empty cycle");
        if (static_cast<size_t>(prefix_n) + cycle_n > (1u << 20))
            throw WireError("loop reply state count out of range");
        for (uint32_t i = 0; i < prefix_n; ++i) d.prefix.push_back(read_cell_row(r, volume));
        for (uint32_t i = 0; i < cycle_n; ++i) d.cycle.push_back(read_cell_row(r, volume));
        d.entry_index = d.prefix.size();
        out.loop = std::move(d);
    } else {
        uint32_t n = r.get_u32();
        uint32_t volume = r.get_u32();
        if (n > (1u << 20)) throw WireError("reply state count out of range");
        for (uint32_t i = 0; i < n; ++i) out.states.push_back(read_cell_row(r, volume));
    }
    if (!r.done()) throw WireError("offload reply has trailing bytes");
    return out;
}

std::vector<uint8_t> encode_gen_request(const GenRequest& req) {
    ByteWriter w;
    w.put_u64(req.world.seed);
    w.put_u8(static_cast<uint8_t>(req.world.kind));
    w.put_i32(req.coord.cx);
    w.put_i32(req.coord.cz);
    return w.take();
}

GenRequest decode_gen_request(const std::vector<uint8_t>& body) {
    ByteReader r(body);
    GenRequest req;
    req.world.seed = r.get_u64();
    uint8_t kind = r.get_u8();
    if (kind > 1) throw WireError("gen request has unknown terrain kind");
    req.world.kind = static_cast<TerrainKind>(kind);
    req.coord.cx = r.get_i32();
    req.coord.cz = r.get_i32();
    if (!r.done()) throw WireError("gen request has trailing bytes");
    return req;
}

std::vector<uint8_t> encode_gen_reply(const GenReply& r) {
    ByteWriter w;
    w.put_u8(r.error ? 1 : 0);
    if (r.error) return w.take();
    w.put_i32(r.coord.cx);
    w.put_i32(r.coord.cz);
    w.put_u32(static_cast<uint32_t>(r.chunk_bytes.size()));
    w.put_bytes(r.chunk_bytes);
    return w.take();
}

GenReply decode_gen_reply(const std::vector<uint8_t>& body) {
    ByteReader r(body);
    GenReply out;
    if (r.get_u8() != 0) {
        out.error = true;
        return out;
    }
    out.coord.cx = r.get_i32();
    out.coord.cz = r.get_i32();
    uint32_t n = r.get_u32();
    out.chunk_bytes = r.get_bytes(n);
    if (!r.done()) throw WireError("gen reply has trailing bytes");
    return out;
}

std::vector<uint8_t> sc_simulate_handler(const std::vector<uint8_t>& body,
                                         const HandlerCosts& costs, double& worker_ms) {
    OffloadRequest req;
    try {
        req = decode_offload_request(body);
    } catch (const WireError&) {
        worker_ms = 0;
        OffloadReply err;
        err.error = true;
        return encode_offload_reply(err);
    }

    OffloadReply reply;
    reply.seq = req.seq;
    reply.construct_id = req.construct_id;
    reply.start_tick = req.start_tick;
    reply.num_steps = req.num_steps;
    reply.logical_ts = req.logical_ts;

    size_t computed = 0;
    if (req.loop_detection) {
        auto result = simulate_with_loop_detection(req.state, req.num_steps);
        if (std::holds_alternative<LoopDescriptor>(result)) {
            reply.loop = std::get<LoopDescriptor>(std::move(result));
            computed = reply.loop->prefix.size() + reply.loop->cycle.size();
        } else {
            auto& states = std::get<std::vector<ConstructState>>(result);
            reply.states.reserve(states.size());
            for (auto& st : states) reply.states.push_back(std::move(st.cells));
            computed = reply.states.size();
        }
    } else {
        auto states = simulate(req.state, req.num_steps);
        reply.states.reserve(states.size());
        for (auto& st : states) reply.states.push_back(std::move(st.cells));
        computed = reply.states.size();
    }

    worker_ms = static_cast<double>(computed) *
                (costs.sc_per_step_us +
                 static_cast<double>(req.state.cells.size()) * costs.sc_per_cell_step_us) /
                1000.0;
    reply.worker_duration_ms = worker_ms;
    return encode_offload_reply(reply);
}

std::vector<uint8_t> terrain_generate_handler(const std::vector<uint8_t>& body,
                                              const HandlerCosts& costs,
                                              double& worker_ms) {
    GenRequest req;
    try {
        req = decode_gen_request(body);
    } catch (const WireError&) {
        worker_ms = 0;
        GenReply err;
        err.error = true;
        return encode_gen_reply(err);
    }
    GenReply reply;
    reply.coord = req.coord;
    reply.chunk_bytes = encode_chunk(*generate_chunk(req.world, req.coord));
    worker_ms = costs.gen_per_chunk_ms;
    return encode_gen_reply(reply);
}

FaasEmulator::FaasEmulator(FaasConfig cfg) : cfg_(std::move(cfg)) {}

const LatencyModel& FaasEmulator::model_for(FnKind fn) const {
    return fn == FnKind::ScSimulate ? cfg_.sc : cfg_.gen;
}

uint64_t FaasEmulator::invoke(FnKind fn, std::vector<uint8_t> body, int64_t enqueue_ms,
                              InvokeKeys keys) {
    auto wall0 = std::chrono::steady_clock::now();
    double worker_ms = 0;
    std::vector<uint8_t> reply;
    switch (fn) {
        case FnKind::ScSimulate:
            reply = sc_simulate_handler(body, cfg_.costs, worker_ms);
            break;
        case FnKind::TerrainGenerate:
            reply = terrain_generate_handler(body, cfg_.costs, worker_ms);
            break;
    }
    double wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - wall0)
            .count();

    std::lock_guard<std::mutex> lock(mu_);
    handler_wall_ms_ += wall_ms;
    uint64_t seq = next_seq_++;
    ++count_;

    const LatencyModel& model = model_for(fn);
    Pool& pool = pools_[fn];
    int64_t keep_warm_ms = static_cast<int64_t>(model.keep_warm_s * 1000.0);
    while (!pool.idle_at_ms.empty() &&
           *pool.idle_at_ms.begin() < enqueue_ms - keep_warm_ms) {
        pool.idle_at_ms.erase(pool.idle_at_ms.begin());
    }
    bool cold = true;
    auto it = pool.idle_at_ms.upper_bound(enqueue_ms);
    if (it != pool.idle_at_ms.begin()) {
        --it;
        pool.idle_at_ms.erase(it);
        cold = false;
    }

    Rng rng(derive_seed(cfg_.seed, fn_name(fn), keys.a, keys.b));
    double latency_ms = model.warm.sample(rng, keys.b);
    if (cold) latency_ms += model.cold_extra.sample(rng, keys.b);
    if (latency_ms < 0) latency_ms = 0;

    double end_to_end = latency_ms + worker_ms;
    int64_t due = enqueue_ms + static_cast<int64_t>(end_to_end);
    pool.idle_at_ms.insert(due);

    InvocationRecord rec;
    rec.seq = seq;
    rec.function = fn;
    rec.enqueue_ms = enqueue_ms;
    rec.end_to_end_ms = end_to_end;
    rec.worker_ms = worker_ms;
    rec.was_cold = cold;
    rec.payload_bytes = static_cast<uint32_t>(body.size());
    rec.reply_bytes = static_cast<uint32_t>(reply.size());
    records_.push_back(rec);

    Delivery d;
    d.seq = seq;
    d.function = fn;
    d.due_ms = due;
    d.body = std::move(reply);
    queue_.emplace(std::make_pair(due, seq), std::move(d));
    return seq;
}

std::vector<Delivery> FaasEmulator::poll(int64_t now_ms) {
    std::lock_guard<std::mutex> lock(mu_);
    std::vector<Delivery> out;
    auto end = queue_.upper_bound(std::make_pair(now_ms, UINT64_MAX));
    for (auto it = queue_.begin(); it != end; ++it) out.push_back(std::move(it->second));
    queue_.erase(queue_.begin(), end);
    return out;
}

std::vector<InvocationRecord> FaasEmulator::drain_records() {
    std::lock_guard<std::mutex> lock(mu_);
    return std::exchange(records_, {});
}

size_t FaasEmulator::pending() const {
    std::lock_guard<std::mutex> lock(mu_);
    return queue_.size();
}

uint64_t FaasEmulator::invocation_count() const {
    std::lock_guard<std::mutex> lock(mu_);
    return count_;
}

double FaasEmulator::take_handler_wall_ms() {
    std::lock_guard<std::mutex> lock(mu_);
    return std::exchange(handler_wall_ms_, 0.0);
}

}  // namespace servo
