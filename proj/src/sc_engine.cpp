#include "servo/sc_engine.hpp"

#include <stdexcept>

namespace servo {

const char* sc_mode_name(ScMode m) {
    switch (m) {
        case ScMode::LocalOnly:
            return "local_only";
        case ScMode::Offloaded:
            return "offloaded";
        case ScMode::LocalEveryOtherTick:
            return "local_every_other_tick";
    }
    return "unknown";
}

ScMode parse_sc_mode(const std::string& s) {
    if (s == "local_only") return ScMode::LocalOnly;
    if (s == "offloaded") return ScMode::Offloaded;
    if (s == "local_every_other_tick") return ScMode::LocalEveryOtherTick;
    throw std::runtime_error("unknown sc mode: " + s);
}

ScTickStats advance_constructs(WorldState& world, ConstructRegistry& registry,
                               ScMode mode, int64_t tick, const EmulationCosts& costs,
                               SpeculativeExecutor* exec, FaasEmulator* faas) {
    ScTickStats stats;
    std::vector<ConstructId> ids;
    ids.reserve(registry.constructs().size());
    for (const auto& [id, st] : registry.constructs()) ids.push_back(id);

    for (ConstructId id : ids) {
        const ConstructState* st = registry.find(id);
        if (!st) continue;

        if (st->base_tick < tick) {
            switch (mode) {
                case ScMode::LocalOnly: {
                    Cells next = step_cells(st->bounds, st->cells);
                    stats.emulated_ms +=
                        static_cast<double>(next.size()) * costs.sc_step_us_per_cell / 1000.0;
                    ++stats.local_steps;
                    registry.apply_cells(world, id, next, tick);
                    break;
                }
                case ScMode::LocalEveryOtherTick: {
                    if (tick % 2 == 0) {
                        Cells next = step_cells(st->bounds, st->cells);
                        stats.emulated_ms += static_cast<double>(next.size()) *
                                             costs.sc_step_us_per_cell / 1000.0;
                        ++stats.local_steps;
                        registry.apply_cells(world, id, next, tick);
                    }
                    break;
                }
                case ScMode::Offloaded: {
                    auto res = exec->on_construct_tick(*st, tick);
                    if (res.from_speculation) {
                        ++stats.speculative_steps;
                    } else {
                        ++stats.local_steps;
                        stats.emulated_ms += static_cast<double>(res.cells.size()) *
                                             costs.sc_step_us_per_cell / 1000.0;
                    }
                    registry.apply_cells(world, id, res.cells, tick);
                    break;
                }
            }
        }

        if (mode == ScMode::Offloaded) {
            const ConstructState* cur = registry.find(id);
            if (auto req = exec->schedule_next(*cur, tick)) {
                faas->invoke(FnKind::ScSimulate, encode_offload_request(*req), tick * 50,
                             InvokeKeys{id, req->seq});
                ++stats.requests_issued;
            }
        }
    }
    return stats;
}

void route_registry_changes(const std::vector<RegistryChange>& changes,
                            const ConstructRegistry& registry,
                            SpeculativeExecutor* exec) {
    if (!exec) return;
    for (const RegistryChange& c : changes) {
        switch (c.kind) {
            case RegistryChange::Kind::Created:
                exec->track(*registry.find(c.id));
                break;
            case RegistryChange::Kind::Modified:
                exec->on_modified(*registry.find(c.id));
                break;
            case RegistryChange::Kind::Removed:
                exec->untrack(c.id);
                break;
        }
    }
}

DrainStats route_deliveries(const std::vector<Delivery>& deliveries,
                            SpeculativeExecutor* exec, std::vector<GenReply>* gen_out) {
    DrainStats stats;
    for (const Delivery& d : deliveries) {
        if (d.function == FnKind::ScSimulate) {
            OffloadReply reply;
            try {
                reply = decode_offload_reply(d.body);
            } catch (const WireError&) {
                ++stats.decode_failures;
                continue;
            }
            if (reply.error) {
                ++stats.sc_errors;
                continue;
            }
            if (exec) {
                exec->accept_reply(reply);
                ++stats.sc_replies;
            }
        } else {
            GenReply reply;
            try {
                reply = decode_gen_reply(d.body);
            } catch (const WireError&) {
                ++stats.decode_failures;
                continue;
            }
            if (reply.error) continue;
            if (gen_out) gen_out->push_back(std::move(reply));
        }
    }
    return stats;
}

}  // namespace servo
