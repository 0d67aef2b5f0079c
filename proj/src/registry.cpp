#include "servo/registry.hpp"

#include <algorithm>
#include <set>

namespace servo {

ConstructState* ConstructRegistry::find(ConstructId id) {
    auto it = constructs_.find(id);
    return it == constructs_.end() ? nullptr : &it->second;
}

const ConstructState* ConstructRegistry::find(ConstructId id) const {
    auto it = constructs_.find(id);
    return it == constructs_.end() ? nullptr : &it->second;
}

static bool stateful_at(const WorldState& world, const Pos& p) {
    if (p.y < 0 || p.y >= kChunkSizeY) return false;
    const Chunk* chunk = world.find_chunk(chunk_of(p));
    if (!chunk) return false;
    return is_stateful(
        chunk->get_local(floor_mod(p.x, kChunkSizeX), p.y, floor_mod(p.z, kChunkSizeZ)).type);
}

ConstructRegistry::Component ConstructRegistry::flood(const WorldState& world, Pos seed,
                                                      std::map<Pos, bool>& visited) const {
    Component comp;
    if (!stateful_at(world, seed) || visited.count(seed)) return comp;
    std::vector<Pos> stack{seed};
    visited[seed] = true;
    while (!stack.empty()) {
        Pos p = stack.back();
        stack.pop_back();
        comp.members.push_back(p);
        const Pos neighbors[6] = {{p.x - 1, p.y, p.z}, {p.x + 1, p.y, p.z},
                                  {p.x, p.y - 1, p.z}, {p.x, p.y + 1, p.z},
                                  {p.x, p.y, p.z - 1}, {p.x, p.y, p.z + 1}};
        for (const Pos& q : neighbors) {
            if (visited.count(q) || !stateful_at(world, q)) continue;
            visited[q] = true;
            stack.push_back(q);
        }
    }
    std::sort(comp.members.begin(), comp.members.end());
    comp.bounds.min = comp.bounds.max = comp.members.front();
    for (const Pos& p : comp.members) {
        comp.bounds.min.x = std::min(comp.bounds.min.x, p.x);
        comp.bounds.min.y = std::min(comp.bounds.min.y, p.y);
        comp.bounds.min.z = std::min(comp.bounds.min.z, p.z);
        comp.bounds.max.x = std::max(comp.bounds.max.x, p.x);
        comp.bounds.max.y = std::max(comp.bounds.max.y, p.y);
        comp.bounds.max.z = std::max(comp.bounds.max.z, p.z);
    }
    comp.oversize = comp.members.size() > max_blocks_;
    return comp;
}

ConstructState ConstructRegistry::build_state(const WorldState& world,
                                              const Component& comp) const {
    ConstructState st;
    st.bounds = comp.bounds;
    st.cells.assign(comp.bounds.volume(), Block{});
    for (const Pos& p : comp.members) {
        const Chunk& chunk = *world.find_chunk(chunk_of(p));
        st.cells[comp.bounds.index_of(p)] =
            chunk.get_local(floor_mod(p.x, kChunkSizeX), p.y, floor_mod(p.z, kChunkSizeZ));
    }
    return st;
}

std::vector<Pos> ConstructRegistry::members_of(const ConstructState& st) const {
    std::vector<Pos> out;
    for (size_t i = 0; i < st.cells.size(); ++i)
        if (st.cells[i].type != BlockType::Air) out.push_back(st.bounds.pos_of(i));
    return out;
}

// Shared tail of every discovery path: given freshly flooded components and
// the ids known to be disturbed, reassigns identity. Each component (in min
// member order) claims the smallest unclaimed id it overlaps; leftovers are
// removed, brand-new components get fresh ids. A claimed construct whose
// cells changed gets logical_ts = max(ts of everything it absorbed) + 1.
std::vector<RegistryChange> ConstructRegistry::integrate(
    WorldState& world, std::vector<Component> comps, std::vector<ConstructId> touched) {
    std::vector<RegistryChange> changes;

    std::sort(comps.begin(), comps.end(), [](const Component& a, const Component& b) {
        return a.members.front() < b.members.front();
    });

    struct Claim {
        const Component* comp;
        std::vector<ConstructId> overlapped;
    };
    std::vector<Claim> claims;
    std::set<ConstructId> disturbed(touched.begin(), touched.end());
    for (const Component& comp : comps) {
        Claim claim{&comp, {}};
        std::set<ConstructId> ids;
        for (const Pos& p : comp.members) {
            auto it = cell_index_.find(p);
            if (it != cell_index_.end()) ids.insert(it->second);
        }
        claim.overlapped.assign(ids.begin(), ids.end());
        disturbed.insert(ids.begin(), ids.end());
        claims.push_back(std::move(claim));
    }

    // Unindex every disturbed construct; survivors are re-indexed below.
    for (ConstructId id : disturbed) {
        auto it = constructs_.find(id);
        if (it == constructs_.end()) continue;
        for (const Pos& p : members_of(it->second)) cell_index_.erase(p);
    }

    std::set<ConstructId> claimed;
    for (Claim& claim : claims) {
        const Component& comp = *claim.comp;
        if (comp.oversize) {
            ++oversize_skips_;
            continue;
        }
        ConstructId id = 0;
        for (ConstructId cand : claim.overlapped) {
            if (!claimed.count(cand) && constructs_.count(cand)) {
                id = cand;
                break;
            }
        }
        uint64_t max_ts = 0;
        for (ConstructId cand : claim.overlapped) {
            auto it = constructs_.find(cand);
            if (it != constructs_.end()) max_ts = std::max(max_ts, it->second.logical_ts);
        }

        ConstructState st = build_state(world, comp);
        st.base_tick = world.tick();
        if (id != 0) {
            claimed.insert(id);
            ConstructState& old = constructs_[id];
            bool unchanged = old.bounds == st.bounds && old.cells == st.cells;
            if (unchanged) {
                for (const Pos& p : comp.members) cell_index_[p] = id;
                continue;
            }
            st.id = id;
            st.logical_ts = max_ts + 1;
            old = std::move(st);
            changes.push_back({RegistryChange::Kind::Modified, id});
        } else {
            id = next_id_++;
            st.id = id;
            st.logical_ts = claim.overlapped.empty() ? 0 : max_ts + 1;
            constructs_.emplace(id, std::move(st));
            changes.push_back({RegistryChange::Kind::Created, id});
        }
        for (const Pos& p : comp.members) cell_index_[p] = id;
    }

    for (ConstructId id : disturbed) {
        if (claimed.count(id) || !constructs_.count(id)) continue;
        constructs_.erase(id);
        changes.push_back({RegistryChange::Kind::Removed, id});
    }
    return changes;
}

std::vector<RegistryChange> ConstructRegistry::on_block_modified(
    WorldState& world, const ModificationEvent& ev) {
    const Pos& p = ev.pos;
    std::vector<ConstructId> touched;
    auto note_owner = [&](const Pos& q) {
        auto it = cell_index_.find(q);
        if (it != cell_index_.end()) touched.push_back(it->second);
    };
    note_owner(p);
    const Pos neighbors[6] = {{p.x - 1, p.y, p.z}, {p.x + 1, p.y, p.z},
                              {p.x, p.y - 1, p.z}, {p.x, p.y + 1, p.z},
                              {p.x, p.y, p.z - 1}, {p.x, p.y, p.z + 1}};
    for (const Pos& q : neighbors) note_owner(q);

    std::map<Pos, bool> visited;
    std::vector<Component> comps;
    auto try_seed = [&](const Pos& q) {
        Component comp = flood(world, q, visited);
        if (!comp.members.empty()) comps.push_back(std::move(comp));
    };
    try_seed(p);
    for (const Pos& q : neighbors) try_seed(q);

    return integrate(world, std::move(comps), std::move(touched));
}

std::vector<RegistryChange> ConstructRegistry::on_chunk_loaded(WorldState& world,
                                                               ChunkCoord coord) {
    const Chunk* chunk = world.find_chunk(coord);
    if (!chunk) return {};
    std::map<Pos, bool> visited;
    std::vector<Component> comps;
    for (int y = 0; y < kChunkSizeY; ++y) {
        for (int z = 0; z < kChunkSizeZ; ++z) {
            for (int x = 0; x < kChunkSizeX; ++x) {
                if (!is_stateful(chunk->get_local(x, y, z).type)) continue;
                Pos p{coord.cx * kChunkSizeX + x, y, coord.cz * kChunkSizeZ + z};
                if (visited.count(p) || cell_index_.count(p)) continue;
                Component comp = flood(world, p, visited);
                if (!comp.members.empty()) comps.push_back(std::move(comp));
            }
        }
    }
    if (comps.empty()) return {};
    return integrate(world, std::move(comps), {});
}

std::vector<RegistryChange> ConstructRegistry::on_chunk_unloading(WorldState& world,
                                                                  ChunkCoord coord) {
    (void)world;
    std::vector<RegistryChange> changes;
    std::vector<ConstructId> doomed;
    for (const auto& [id, st] : constructs_) {
        auto within = [&](const Pos& p) { return chunk_of(p) == coord; };
        for (const Pos& p : members_of(st)) {
            if (within(p)) {
                doomed.push_back(id);
                break;
            }
        }
    }
    for (ConstructId id : doomed) {
        for (const Pos& p : members_of(constructs_[id])) cell_index_.erase(p);
        constructs_.erase(id);
        changes.push_back({RegistryChange::Kind::Removed, id});
    }
    return changes;
}

void ConstructRegistry::apply_cells(WorldState& world, ConstructId id, const Cells& cells,
                                    int64_t new_base_tick) {
    ConstructState* st = find(id);
    if (!st) return;
    for (size_t i = 0; i < cells.size(); ++i) {
        if (st->cells[i].type == BlockType::Air) continue;
        Pos p = st->bounds.pos_of(i);
        Chunk* chunk = world.find_chunk(chunk_of(p));
        if (!chunk) continue;
        int idx = block_index(floor_mod(p.x, kChunkSizeX), p.y, floor_mod(p.z, kChunkSizeZ));
        if (chunk->blocks[idx] != cells[i]) {
            chunk->blocks[idx] = cells[i];
            chunk->dirty = true;
        }
    }
    st->cells = cells;
    st->base_tick = new_base_tick;
}

}  // namespace servo
