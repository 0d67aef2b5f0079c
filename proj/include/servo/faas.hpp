#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <vector>

#include "servo/latency.hpp"
#include "servo/speculation.hpp"
#include "servo/terrain.hpp"
#include "servo/wire.hpp"

namespace servo {

enum class FnKind : uint8_t {
    ScSimulate = 1,
    TerrainGenerate = 2,
};

const char* fn_name(FnKind fn);

// Per-function latency model. An invocation that finds a warm idle instance
// pays warm only; otherwise it pays warm + cold_extra and a new instance is
// provisioned. Instances are reused most-recently-idle first and are torn
// down after sitting idle longer than keep_warm_s.
struct LatencyModel {
    DistSpec warm = DistSpec::lognormal(60.0, 0.4);
    DistSpec cold_extra = DistSpec::constant(400.0);
    double keep_warm_s = 120.0;
};

// Modeled handler compute charges, reported as worker duration.
struct HandlerCosts {
    double sc_per_step_us = 200.0;
    double sc_per_cell_step_us = 2.0;
    double gen_per_chunk_ms = 700.0;
};

struct FaasConfig {
    LatencyModel sc;
    LatencyModel gen;
    HandlerCosts costs;
    WorldSeed world;
    uint64_t seed = 0;
};

struct InvocationRecord {
    uint64_t seq = 0;
    FnKind function = FnKind::ScSimulate;
    int64_t enqueue_ms = 0;
    double end_to_end_ms = 0;  // latency + worker, always >= worker_ms
    double worker_ms = 0;
    bool was_cold = false;
    uint32_t payload_bytes = 0;
    uint32_t reply_bytes = 0;
};

struct Delivery {
    uint64_t seq = 0;
    FnKind function = FnKind::ScSimulate;
    int64_t due_ms = 0;
    std::vector<uint8_t> body;
};

// Stable per-invocation identity used to derive its latency RNG stream, so
// results do not depend on interleaving.
struct InvokeKeys {
    uint64_t a = 0;
    uint64_t b = 0;
};

// Function payload wire formats. Every reply body starts with a status byte
// (0 ok, 1 malformed payload / handler failure).
std::vector<uint8_t> encode_offload_request(const OffloadRequest& req);
OffloadRequest decode_offload_request(const std::vector<uint8_t>& body);
std::vector<uint8_t> encode_offload_reply(const OffloadReply& r);
OffloadReply decode_offload_reply(const std::vector<uint8_t>& body);

struct GenRequest {
    WorldSeed world;
    ChunkCoord coord;
};
std::vector<uint8_t> encode_gen_request(const GenRequest& req);
GenRequest decode_gen_request(const std::vector<uint8_t>& body);
struct GenReply {
    bool error = false;
    ChunkCoord coord;
    std::vector<uint8_t> chunk_bytes;
};
std::vector<uint8_t> encode_gen_reply(const GenReply& r);
GenReply decode_gen_reply(const std::vector<uint8_t>& body);

// Handlers, callable directly (unit tests, HTTP adapter) or via the emulator.
// Return the reply body and report modeled compute in worker_ms.
std::vector<uint8_t> sc_simulate_handler(const std::vector<uint8_t>& body,
                                         const HandlerCosts& costs, double& worker_ms);
std::vector<uint8_t> terrain_generate_handler(const std::vector<uint8_t>& body,
                                              const HandlerCosts& costs,
                                              double& worker_ms);

// Emulated FaaS runtime. invoke() executes the handler immediately, samples
// the invocation latency from the per-function model and the instance pool
// state, and queues the reply for delivery at enqueue_ms + latency + worker
// on the logical clock. poll() releases everything due. All timestamps are
// logical milliseconds; nothing here sleeps.
class FaasEmulator {
public:
    explicit FaasEmulator(FaasConfig cfg);

    uint64_t invoke(FnKind fn, std::vector<uint8_t> body, int64_t enqueue_ms,
                    InvokeKeys keys);

    std::vector<Delivery> poll(int64_t now_ms);

    std::vector<InvocationRecord> drain_records();

    size_t pending() const;
    uint64_t invocation_count() const;

    // Wall-clock time spent running handlers, for callers that account tick
    // time and want handler execution excluded from it.
    double take_handler_wall_ms();

private:
    struct Pool {
        std::multiset<int64_t> idle_at_ms;
    };

    const LatencyModel& model_for(FnKind fn) const;

    FaasConfig cfg_;
    mutable std::mutex mu_;
    std::map<FnKind, Pool> pools_;
    std::multimap<std::pair<int64_t, uint64_t>, Delivery> queue_;
    std::vector<InvocationRecord> records_;
    uint64_t next_seq_ = 1;
    uint64_t count_ = 0;
    double handler_wall_ms_ = 0;
};

}  // namespace servo
