#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "servo/construct.hpp"
#include "servo/world.hpp"

namespace servo {

struct RegistryChange {
    enum class Kind { Created, Modified, Removed };
    Kind kind;
    ConstructId id;
};

// Tracks every simulated construct in the loaded world: each orthogonally
// connected component of Wire/Source/Inverter/Lamp blocks. Keeps construct
// identity stable across modifications where possible, assigns fresh ids to
// split-off remainders, and bumps logical_ts whenever a construct's cells
// change through anything other than simulation stepping.
//
// Components larger than max_blocks are ignored entirely: their blocks stay
// in the world but are never simulated.
class ConstructRegistry {
public:
    explicit ConstructRegistry(size_t max_blocks = 4096) : max_blocks_(max_blocks) {}

    size_t max_blocks() const { return max_blocks_; }
    const std::map<ConstructId, ConstructState>& constructs() const { return constructs_; }
    ConstructState* find(ConstructId id);
    const ConstructState* find(ConstructId id) const;

    // Number of times discovery hit an over-limit component and skipped it.
    uint64_t oversize_skips() const { return oversize_skips_; }

    // Re-derives the components around a block modification. The world must
    // already contain the new block value.
    std::vector<RegistryChange> on_block_modified(WorldState& world,
                                                  const ModificationEvent& ev);

    // Discovers constructs in a freshly loaded chunk, merging with components
    // that continue into already loaded neighbors.
    std::vector<RegistryChange> on_chunk_loaded(WorldState& world, ChunkCoord coord);

    // Removes every construct touching the chunk. Call before the chunk is
    // actually removed from the world.
    std::vector<RegistryChange> on_chunk_unloading(WorldState& world, ChunkCoord coord);

    // Writes simulated cell powers back into the world (marking touched
    // chunks dirty, without emitting modification events) and advances the
    // construct's base_tick. logical_ts is untouched.
    void apply_cells(WorldState& world, ConstructId id, const Cells& cells,
                     int64_t new_base_tick);

private:
    struct Component {
        std::vector<Pos> members;  // sorted
        BlockBox bounds;
        bool oversize = false;
    };

    Component flood(const WorldState& world, Pos seed, std::map<Pos, bool>& visited) const;
    std::vector<RegistryChange> integrate(WorldState& world, std::vector<Component> comps,
                                          std::vector<ConstructId> touched_ids);
    ConstructState build_state(const WorldState& world, const Component& comp) const;
    std::vector<Pos> members_of(const ConstructState& st) const;

    std::map<ConstructId, ConstructState> constructs_;
    std::map<Pos, ConstructId> cell_index_;
    uint64_t next_id_ = 1;
    size_t max_blocks_;
    uint64_t oversize_skips_ = 0;
};

}  // namespace servo
