#include "servo/world.hpp"

#include <algorithm>

#include "servo/wire.hpp"

namespace servo {

Chunk& WorldState::insert_chunk(std::unique_ptr<Chunk> chunk) {
    ChunkCoord c = chunk->coord;
    auto [it, inserted] = chunks_.insert_or_assign(c, std::move(chunk));
    (void)inserted;
    return *it->second;
}

std::unique_ptr<Chunk> WorldState::remove_chunk(ChunkCoord c) {
    auto it = chunks_.find(c);
    if (it == chunks_.end()) return nullptr;
    std::unique_ptr<Chunk> out = std::move(it->second);
    chunks_.erase(it);
    return out;
}

Chunk* WorldState::find_chunk(ChunkCoord c) {
    auto it = chunks_.find(c);
    return it == chunks_.end() ? nullptr : it->second.get();
}

const Chunk* WorldState::find_chunk(ChunkCoord c) const {
    auto it = chunks_.find(c);
    return it == chunks_.end() ? nullptr : it->second.get();
}

Chunk& WorldState::chunk_or_throw(ChunkCoord c) {
    Chunk* chunk = find_chunk(c);
    if (!chunk) throw ChunkNotLoaded(c);
    return *chunk;
}

const Chunk& WorldState::chunk_or_throw(ChunkCoord c) const {
    const Chunk* chunk = find_chunk(c);
    if (!chunk) throw ChunkNotLoaded(c);
    return *chunk;
}

Block WorldState::get_block(const Pos& p) const {
    const Chunk& chunk = chunk_or_throw(chunk_of(p));
    return chunk.get_local(floor_mod(p.x, kChunkSizeX), p.y, floor_mod(p.z, kChunkSizeZ));
}

ModificationEvent WorldState::set_block(const Pos& p, Block b) {
    Chunk& chunk = chunk_or_throw(chunk_of(p));
    int idx = block_index(floor_mod(p.x, kChunkSizeX), p.y, floor_mod(p.z, kChunkSizeZ));
    ModificationEvent ev;
    ev.pos = p;
    ev.tick = tick_;
    ev.before = chunk.blocks[idx];
    ev.after = b;
    chunk.blocks[idx] = b;
    chunk.dirty = true;
    return ev;
}

std::set<ChunkCoord> chunks_within(int32_t x, int32_t z, int radius_blocks) {
    std::set<ChunkCoord> out;
    int32_t cx0 = floor_div(x - radius_blocks, kChunkSizeX);
    int32_t cx1 = floor_div(x + radius_blocks, kChunkSizeX);
    int32_t cz0 = floor_div(z - radius_blocks, kChunkSizeZ);
    int32_t cz1 = floor_div(z + radius_blocks, kChunkSizeZ);
    for (int32_t cx = cx0; cx <= cx1; ++cx)
        for (int32_t cz = cz0; cz <= cz1; ++cz) out.insert(ChunkCoord{cx, cz});
    return out;
}

std::set<ChunkCoord> WorldState::required_chunks() const {
    return required_chunks(view_distance_blocks_);
}

std::set<ChunkCoord> WorldState::required_chunks(int radius_blocks) const {
    std::set<ChunkCoord> out;
    for (const auto& [id, pos] : avatars_) {
        auto square = chunks_within(pos.x, pos.z, radius_blocks);
        out.insert(square.begin(), square.end());
    }
    return out;
}

std::vector<uint8_t> encode_chunk(const Chunk& chunk) {
    ByteWriter w;
    w.put_i32(chunk.coord.cx);
    w.put_i32(chunk.coord.cz);
    w.put_u8(chunk.generated_by);
    size_t i = 0;
    while (i < chunk.blocks.size()) {
        const Block& b = chunk.blocks[i];
        size_t run = 1;
        while (i + run < chunk.blocks.size() && run < 0xffff && chunk.blocks[i + run] == b)
            ++run;
        w.put_u8(static_cast<uint8_t>(b.type));
        w.put_u8(b.power);
        w.put_u16(static_cast<uint16_t>(run));
        i += run;
    }
    return w.take();
}

std::unique_ptr<Chunk> decode_chunk(const std::vector<uint8_t>& bytes) {
    ByteReader r(bytes);
    auto chunk = std::make_unique<Chunk>();
    chunk->coord.cx = r.get_i32();
    chunk->coord.cz = r.get_i32();
    chunk->generated_by = r.get_u8();
    size_t i = 0;
    while (i < chunk->blocks.size()) {
        if (r.done()) throw WireError("chunk payload ends before all blocks decoded");
        uint8_t type = r.get_u8();
        uint8_t power = r.get_u8();
        uint16_t run = r.get_u16();
        if (type >= kBlockTypeCount) throw WireError("chunk payload has invalid block type");
        if (run == 0) throw WireError("chunk payload has zero-length run");
        if (i + run > chunk->blocks.size()) throw WireError("chunk payload run overflows");
        Block b{static_cast<BlockType>(type), power};
        std::fill_n(chunk->blocks.begin() + static_cast<long>(i), run, b);
        i += run;
    }
    if (!r.done()) throw WireError("chunk payload has trailing bytes");
    return chunk;
}

}  // namespace servo
