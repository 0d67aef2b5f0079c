#pragma once

#include <cstdint>
#include <vector>

#include "servo/faas.hpp"
#include "servo/registry.hpp"
#include "servo/speculation.hpp"
#include "servo/world.hpp"

namespace servo {

enum class ScMode {
    LocalOnly,
    Offloaded,
    LocalEveryOtherTick,
};

const char* sc_mode_name(ScMode m);
ScMode parse_sc_mode(const std::string& s);

// Modeled per-tick compute charges, in addition to measured wall time. They
// stand in for the work a production server would spend on these phases, so
// load trends reproduce at desk scale and identical seeds give identical
// duration columns.
struct EmulationCosts {
    double player_cost_us_per_tick = 350.0;
    double sc_step_us_per_cell = 1.8;
    double gen_local_ms = 200.0;  // synchronous local generation, per chunk
};

struct ScTickStats {
    uint32_t local_steps = 0;
    uint32_t speculative_steps = 0;
    uint64_t requests_issued = 0;
    double emulated_ms = 0;
};

// Advances every simulated construct to world tick `tick`. In Offloaded mode
// buffered speculative states substitute for local stepping and new
// invocations are issued through the executor's schedule. Constructs whose
// base_tick is already at `tick` (created or modified earlier in this tick)
// are left alone.
ScTickStats advance_constructs(WorldState& world, ConstructRegistry& registry,
                               ScMode mode, int64_t tick, const EmulationCosts& costs,
                               SpeculativeExecutor* exec, FaasEmulator* faas);

// Applies registry change events to the executor's tracking set.
void route_registry_changes(const std::vector<RegistryChange>& changes,
                            const ConstructRegistry& registry,
                            SpeculativeExecutor* exec);

struct DrainStats {
    uint32_t sc_replies = 0;
    uint32_t sc_errors = 0;
    uint32_t decode_failures = 0;
};

// Feeds simulation replies to the executor. Error replies count as lost:
// the covering invocation simply never resolves. Generation replies are
// appended to gen_out for the terrain pipeline.
DrainStats route_deliveries(const std::vector<Delivery>& deliveries,
                            SpeculativeExecutor* exec, std::vector<GenReply>* gen_out);

}  // namespace servo
