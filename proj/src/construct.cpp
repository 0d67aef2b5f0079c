#include "servo/construct.hpp"

#include <unordered_map>

#include "servo/rng.hpp"

namespace servo {

Cells step_cells(const BlockBox& bounds, const Cells& cells) {
    const int32_t sx = bounds.size_x();
    const int32_t sz = bounds.size_z();
    const int32_t sy = bounds.size_y();
    const size_t stride_z = static_cast<size_t>(sx);
    const size_t stride_y = static_cast<size_t>(sx) * static_cast<size_t>(sz);

    Cells next = cells;
    size_t i = 0;
    for (int32_t y = 0; y < sy; ++y) {
        for (int32_t z = 0; z < sz; ++z) {
            for (int32_t x = 0; x < sx; ++x, ++i) {
                BlockType t = cells[i].type;
                if (t == BlockType::Air || t == BlockType::Solid) continue;
                if (t == BlockType::Source) {
                    next[i].power = kMaxPower;
                    continue;
                }
                uint8_t best = 0;
                if (x > 0) best = std::max(best, cells[i - 1].power);
                if (x + 1 < sx) best = std::max(best, cells[i + 1].power);
                if (z > 0) best = std::max(best, cells[i - stride_z].power);
                if (z + 1 < sz) best = std::max(best, cells[i + stride_z].power);
                if (y > 0) best = std::max(best, cells[i - stride_y].power);
                if (y + 1 < sy) best = std::max(best, cells[i + stride_y].power);
                if (t == BlockType::Wire) {
                    next[i].power = best > 0 ? static_cast<uint8_t>(best - 1) : 0;
                } else if (t == BlockType::Inverter) {
                    next[i].power = best == 0 ? kMaxPower : 0;
                } else {  // Lamp
                    next[i].power = best;
                }
            }
        }
    }
    return next;
}

ConstructState step(const ConstructState& s) {
    ConstructState out = s;
    out.cells = step_cells(s.bounds, s.cells);
    out.base_tick = s.base_tick + 1;
    return out;
}

std::vector<ConstructState> simulate(const ConstructState& s, uint32_t n) {
    std::vector<ConstructState> out;
    out.reserve(n);
    Cells cur = s.cells;
    for (uint32_t k = 0; k < n; ++k) {
        cur = step_cells(s.bounds, cur);
        ConstructState st;
        st.id = s.id;
        st.bounds = s.bounds;
        st.cells = cur;
        st.logical_ts = s.logical_ts;
        st.base_tick = s.base_tick + k + 1;
        out.push_back(std::move(st));
    }
    return out;
}

void write_cells(ByteWriter& w, const BlockBox& bounds, const Cells& cells) {
    w.put_i32(bounds.min.x);
    w.put_i32(bounds.min.y);
    w.put_i32(bounds.min.z);
    w.put_i32(bounds.max.x);
    w.put_i32(bounds.max.y);
    w.put_i32(bounds.max.z);
    for (const Block& b : cells) {
        w.put_u8(static_cast<uint8_t>(b.type));
        w.put_u8(b.power);
    }
}

std::pair<BlockBox, Cells> read_cells(ByteReader& r) {
    BlockBox bounds;
    bounds.min.x = r.get_i32();
    bounds.min.y = r.get_i32();
    bounds.min.z = r.get_i32();
    bounds.max.x = r.get_i32();
    bounds.max.y = r.get_i32();
    bounds.max.z = r.get_i32();
    if (bounds.max.x < bounds.min.x || bounds.max.y < bounds.min.y ||
        bounds.max.z < bounds.min.z)
        throw WireError("construct bounds are inverted");
    size_t volume = bounds.volume();
    if (volume > (1u << 24)) throw WireError("construct bounds unreasonably large");
    Cells cells(volume);
    for (size_t i = 0; i < volume; ++i) {
        uint8_t type = r.get_u8();
        uint8_t power = r.get_u8();
        if (type >= kBlockTypeCount) throw WireError("construct cell has invalid type");
        if (power > kMaxPower) throw WireError("construct cell power out of range");
        cells[i] = Block{static_cast<BlockType>(type), power};
    }
    return {bounds, std::move(cells)};
}

std::vector<uint8_t> serialize_cells(const BlockBox& bounds, const Cells& cells) {
    ByteWriter w;
    write_cells(w, bounds, cells);
    return w.take();
}

uint64_t state_hash(const BlockBox& bounds, const Cells& cells) {
    std::vector<uint8_t> bytes = serialize_cells(bounds, cells);
    return fnv1a64(bytes.data(), bytes.size());
}

uint64_t state_hash(const ConstructState& s) { return state_hash(s.bounds, s.cells); }

Cells expand(const LoopDescriptor& d, uint64_t k) {
    if (k < d.entry_index) return d.prefix[k];
    return d.cycle[(k - d.entry_index) % d.cycle.size()];
}

std::variant<std::vector<ConstructState>, LoopDescriptor> simulate_with_loop_detection(
    const ConstructState& s, uint32_t n, const CellsHasher& hasher) {
    auto hash = [&](const Cells& cells) {
        return hasher ? hasher(s.bounds, cells) : state_hash(s.bounds, cells);
    };

    // history[j] is the state after j steps; history[0] is the start state.
    std::vector<Cells> history;
    history.reserve(n + 1);
    history.push_back(s.cells);
    std::unordered_map<uint64_t, std::vector<size_t>> seen;
    seen[hash(s.cells)].push_back(0);

    Cells cur = s.cells;
    for (uint32_t k = 0; k < n; ++k) {
        cur = step_cells(s.bounds, cur);
        uint64_t h = hash(cur);
        auto it = seen.find(h);
        if (it != seen.end()) {
            for (size_t j : it->second) {
                if (history[j] != cur) continue;
                // cur, the state after k+1 steps, equals the state after j
                // steps: states j..k repeat with period (k+1)-j. Expressed
                // over the trajectory (states after 1, 2, ... steps) the
                // prefix is history[1..j) and the cycle starts at history[j].
                // When j == 0 the start state itself recurs, so the cycle is
                // the whole computed trajectory ending back at it.
                LoopDescriptor d;
                d.bounds = s.bounds;
                if (j >= 1) {
                    d.prefix.assign(history.begin() + 1,
                                    history.begin() + static_cast<long>(j));
                    d.cycle.assign(history.begin() + static_cast<long>(j),
                                   history.end());
                } else {
                    d.cycle.assign(history.begin() + 1, history.end());
                    d.cycle.push_back(history[0]);
                }
                d.entry_index = d.prefix.size();
                return d;
            }
        }
        history.push_back(cur);
        seen[h].push_back(history.size() - 1);
    }

    std::vector<ConstructState> out;
    out.reserve(n);
    for (uint32_t k = 1; k <= n; ++k) {
        ConstructState st;
        st.id = s.id;
        st.bounds = s.bounds;
        st.cells = history[k];
        st.logical_ts = s.logical_ts;
        st.base_tick = s.base_tick + k;
        out.push_back(std::move(st));
    }
    return out;
}

}  // namespace servo
