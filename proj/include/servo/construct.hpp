#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <variant>
#include <vector>

#include "servo/wire.hpp"
#include "servo/world.hpp"

namespace servo {

using ConstructId = uint64_t;
using Cells = std::vector<Block>;

// Inclusive axis-aligned bounding box in world block coordinates.
struct BlockBox {
    Pos min;
    Pos max;

    bool operator==(const BlockBox&) const = default;

    int32_t size_x() const { return max.x - min.x + 1; }
    int32_t size_y() const { return max.y - min.y + 1; }
    int32_t size_z() const { return max.z - min.z + 1; }
    size_t volume() const {
        return static_cast<size_t>(size_x()) * static_cast<size_t>(size_y()) *
               static_cast<size_t>(size_z());
    }
    bool contains(const Pos& p) const {
        return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y &&
               p.z >= min.z && p.z <= max.z;
    }
    bool intersects(const BlockBox& o) const {
        return min.x <= o.max.x && max.x >= o.min.x && min.y <= o.max.y &&
               max.y >= o.min.y && min.z <= o.max.z && max.z >= o.min.z;
    }

    // Cell storage order inside the box: x fastest, then z, then y.
    size_t index_of(const Pos& p) const {
        return static_cast<size_t>(p.x - min.x) +
               static_cast<size_t>(size_x()) * static_cast<size_t>(p.z - min.z) +
               static_cast<size_t>(size_x()) * static_cast<size_t>(size_z()) *
                   static_cast<size_t>(p.y - min.y);
    }
    Pos pos_of(size_t index) const {
        auto sx = static_cast<size_t>(size_x());
        auto sz = static_cast<size_t>(size_z());
        return Pos{min.x + static_cast<int32_t>(index % sx),
                   min.y + static_cast<int32_t>(index / (sx * sz)),
                   min.z + static_cast<int32_t>((index / sx) % sz)};
    }
};

// Snapshot of one simulated construct. Cells are a dense row of the bounding
// box; blocks inside the box that are not part of the construct's connected
// component are masked to Air. logical_ts orders competing computations for
// the same construct and base_tick is the world tick the cells correspond to.
struct ConstructState {
    ConstructId id = 0;
    BlockBox bounds;
    Cells cells;
    uint64_t logical_ts = 0;
    int64_t base_tick = 0;
};

// One synchronous update of the power automaton. Every cell's next power is a
// function of its own type and the previous powers of its orthogonal
// neighbors (neighbors outside the box read as Air):
//   Source    15
//   Wire      max(neighbor power) - 1, floored at 0
//   Inverter  15 if every neighbor power is 0, else 0
//   Lamp      max(neighbor power)
//   Air/Solid always 0
// Cell types never change; only power does.
Cells step_cells(const BlockBox& bounds, const Cells& cells);
ConstructState step(const ConstructState& s);

// n successive states after s; result[k] has base_tick = s.base_tick + k + 1.
std::vector<ConstructState> simulate(const ConstructState& s, uint32_t n);

// Canonical serialization: six int32 bounds, then one (type, power) byte pair
// per cell in storage order. The digest covers exactly these bytes, so id,
// base_tick and logical_ts never influence it.
std::vector<uint8_t> serialize_cells(const BlockBox& bounds, const Cells& cells);
void write_cells(ByteWriter& w, const BlockBox& bounds, const Cells& cells);
std::pair<BlockBox, Cells> read_cells(ByteReader& r);
uint64_t state_hash(const BlockBox& bounds, const Cells& cells);
uint64_t state_hash(const ConstructState& s);

// A trajectory that entered a cycle. The full trajectory from the start state
// is prefix[0..entry_index) followed by cycle repeated forever. entry_index ==
// prefix.size().
struct LoopDescriptor {
    BlockBox bounds;
    std::vector<Cells> prefix;
    std::vector<Cells> cycle;
    size_t entry_index = 0;
};

// State k steps after the loop's start state (k = 0 is one step after it),
// computed without running the automaton.
Cells expand(const LoopDescriptor& d, uint64_t k);

using CellsHasher = std::function<uint64_t(const BlockBox&, const Cells&)>;

// Runs up to n steps, hashing each state. When a state's hash matches an
// earlier one the two are compared cell by cell; only true repeats terminate
// the run early with a LoopDescriptor, hash collisions are skipped. The
// hasher parameter exists for tests; production callers use the default.
std::variant<std::vector<ConstructState>, LoopDescriptor> simulate_with_loop_detection(
    const ConstructState& s, uint32_t n, const CellsHasher& hasher = {});

}  // namespace servo
