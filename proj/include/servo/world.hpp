#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace servo {

constexpr int kChunkSizeX = 16;
constexpr int kChunkSizeZ = 16;
constexpr int kChunkSizeY = 256;
constexpr int kChunkBlocks = kChunkSizeX * kChunkSizeZ * kChunkSizeY;

constexpr uint8_t kMaxPower = 15;

enum class BlockType : uint8_t {
    Air = 0,
    Solid = 1,
    Wire = 2,
    Source = 3,
    Inverter = 4,
    Lamp = 5,
};

constexpr uint8_t kBlockTypeCount = 6;

// A block participates in power simulation if signals can originate from or
// travel through it.
inline bool is_stateful(BlockType t) {
    return t == BlockType::Wire || t == BlockType::Source || t == BlockType::Inverter ||
           t == BlockType::Lamp;
}

struct Block {
    BlockType type = BlockType::Air;
    uint8_t power = 0;

    bool operator==(const Block&) const = default;
};

inline Block make_block(BlockType t, uint8_t power = 0) {
    if (!is_stateful(t)) power = 0;
    if (power > kMaxPower) power = kMaxPower;
    return Block{t, power};
}

struct Pos {
    int32_t x = 0;
    int32_t y = 0;
    int32_t z = 0;

    bool operator==(const Pos&) const = default;
    auto operator<=>(const Pos&) const = default;
};

struct ChunkCoord {
    int32_t cx = 0;
    int32_t cz = 0;

    bool operator==(const ChunkCoord&) const = default;
    auto operator<=>(const ChunkCoord&) const = default;
};

inline int32_t floor_div(int32_t a, int32_t b) {
    int32_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

inline int32_t floor_mod(int32_t a, int32_t b) {
    int32_t m = a % b;
    if (m != 0 && ((a < 0) != (b < 0))) m += b;
    return m;
}

inline ChunkCoord chunk_of(int32_t x, int32_t z) {
    return ChunkCoord{floor_div(x, kChunkSizeX), floor_div(z, kChunkSizeZ)};
}

inline ChunkCoord chunk_of(const Pos& p) { return chunk_of(p.x, p.z); }

// Storage order within a chunk: x fastest, then z, then y.
inline int block_index(int lx, int ly, int lz) {
    return lx + kChunkSizeX * lz + kChunkSizeX * kChunkSizeZ * ly;
}

struct Chunk {
    ChunkCoord coord;
    uint8_t generated_by = 0;
    bool dirty = false;
    std::array<Block, kChunkBlocks> blocks{};

    Block get_local(int lx, int ly, int lz) const { return blocks[block_index(lx, ly, lz)]; }
    void set_local(int lx, int ly, int lz, Block b) { blocks[block_index(lx, ly, lz)] = b; }
};

class ChunkNotLoaded : public std::runtime_error {
public:
    explicit ChunkNotLoaded(ChunkCoord c)
        : std::runtime_error("chunk not loaded: (" + std::to_string(c.cx) + "," +
                             std::to_string(c.cz) + ")"),
          coord(c) {}
    ChunkCoord coord;
};

class NoAvatars : public std::runtime_error {
public:
    NoAvatars() : std::runtime_error("world has no avatars") {}
};

struct ModificationEvent {
    Pos pos;
    int64_t tick = 0;
    Block before;
    Block after;
};

using PlayerId = uint32_t;

class WorldState {
public:
    int64_t tick() const { return tick_; }
    void set_tick(int64_t t) { tick_ = t; }

    int view_distance_blocks() const { return view_distance_blocks_; }
    void set_view_distance_blocks(int v) { view_distance_blocks_ = v; }

    bool is_loaded(ChunkCoord c) const { return chunks_.count(c) != 0; }
    size_t loaded_count() const { return chunks_.size(); }

    Chunk& insert_chunk(std::unique_ptr<Chunk> chunk);
    std::unique_ptr<Chunk> remove_chunk(ChunkCoord c);

    Chunk* find_chunk(ChunkCoord c);
    const Chunk* find_chunk(ChunkCoord c) const;
    Chunk& chunk_or_throw(ChunkCoord c);
    const Chunk& chunk_or_throw(ChunkCoord c) const;

    const std::map<ChunkCoord, std::unique_ptr<Chunk>>& chunks() const { return chunks_; }

    // Throws ChunkNotLoaded if the containing chunk is absent.
    Block get_block(const Pos& p) const;

    // Writes a block and returns the event, stamped with the current tick.
    // Writing a value equal to the existing one still produces an event and
    // still marks the chunk dirty.
    ModificationEvent set_block(const Pos& p, Block b);

    std::map<PlayerId, Pos>& avatars() { return avatars_; }
    const std::map<PlayerId, Pos>& avatars() const { return avatars_; }

    // Chebyshev view square, in chunks, around every avatar.
    std::set<ChunkCoord> required_chunks() const;
    std::set<ChunkCoord> required_chunks(int radius_blocks) const;

private:
    std::map<ChunkCoord, std::unique_ptr<Chunk>> chunks_;
    std::map<PlayerId, Pos> avatars_;
    int view_distance_blocks_ = 128;
    int64_t tick_ = 0;
};

// Chunk coordinates whose 16x16 column intersects the square of the given
// block radius centered on (x, z).
std::set<ChunkCoord> chunks_within(int32_t x, int32_t z, int radius_blocks);

// Wire format: header (cx int32, cz int32, generated_by uint8) followed by
// run-length encoded blocks in storage order, each run (type u8, power u8,
// length u16). Little endian throughout.
std::vector<uint8_t> encode_chunk(const Chunk& chunk);
std::unique_ptr<Chunk> decode_chunk(const std::vector<uint8_t>& bytes);

}  // namespace servo
