#include "servo/terrain.hpp"

#include <algorithm>
#include <cmath>

#include "servo/rng.hpp"

namespace servo {

namespace {

constexpr int kFlatHeight = 4;
constexpr int kBaseHeight = 40;
constexpr int kAmplitude = 24;
constexpr int kMinHeight = 1;
constexpr int kMaxHeight = 128;

double lattice_value(uint64_t seed, uint64_t octave, int32_t ix, int32_t iz) {
    uint64_t s = seed ^ (0x632be59bd9b4e019ull * (octave + 1));
    s ^= static_cast<uint64_t>(static_cast<uint32_t>(ix)) * 0x9e3779b97f4a7c15ull;
    s ^= static_cast<uint64_t>(static_cast<uint32_t>(iz)) * 0xc2b2ae3d27d4eb4full;
    uint64_t r = splitmix64(s);
    return static_cast<double>(r >> 11) * 0x1.0p-53;
}

// Bilinear value noise. cell is a power of two, so the interpolation weights
// are exact dyadic rationals and the result is bit-stable across platforms.
double value_noise(uint64_t seed, uint64_t octave, int cell, int32_t x, int32_t z) {
    int32_t ix = floor_div(x, cell);
    int32_t iz = floor_div(z, cell);
    double u = static_cast<double>(floor_mod(x, cell)) / cell;
    double v = static_cast<double>(floor_mod(z, cell)) / cell;
    double v00 = lattice_value(seed, octave, ix, iz);
    double v10 = lattice_value(seed, octave, ix + 1, iz);
    double v01 = lattice_value(seed, octave, ix, iz + 1);
    double v11 = lattice_value(seed, octave, ix + 1, iz + 1);
    double top = v00 + (v10 - v00) * u;
    double bottom = v01 + (v11 - v01) * u;
    return top + (bottom - top) * v;
}

}  // namespace

int surface_height(const WorldSeed& seed, int32_t x, int32_t z) {
    if (seed.kind == TerrainKind::Flat) return kFlatHeight;
    double n = value_noise(seed.seed, 0, 64, x, z) * (2.0 / 3.0) +
               value_noise(seed.seed, 1, 32, x, z) * (1.0 / 3.0);
    double signed_n = 2.0 * n - 1.0;
    int h = kBaseHeight + static_cast<int>(std::floor(kAmplitude * signed_n));
    return std::clamp(h, kMinHeight, kMaxHeight);
}

std::unique_ptr<Chunk> generate_chunk(const WorldSeed& seed, ChunkCoord coord) {
    auto chunk = std::make_unique<Chunk>();
    chunk->coord = coord;
    chunk->generated_by = static_cast<uint8_t>(seed.kind);
    const Block solid = make_block(BlockType::Solid);
    for (int z = 0; z < kChunkSizeZ; ++z) {
        for (int x = 0; x < kChunkSizeX; ++x) {
            int h = surface_height(seed, coord.cx * kChunkSizeX + x,
                                   coord.cz * kChunkSizeZ + z);
            for (int y = 0; y < h && y < kChunkSizeY; ++y)
                chunk->set_local(x, y, z, solid);
        }
    }
    return chunk;
}

std::vector<ChunkCoord> chunks_needing_generation(const WorldState& world,
                                                  int margin_blocks,
                                                  const std::set<ChunkCoord>& excluded) {
    std::vector<ChunkCoord> out;
    for (ChunkCoord c :
         world.required_chunks(world.view_distance_blocks() + margin_blocks)) {
        if (world.is_loaded(c) || excluded.count(c)) continue;
        out.push_back(c);
    }
    return out;
}

static int interval_distance(int32_t v, int32_t lo, int32_t hi) {
    if (v < lo) return lo - v;
    if (v > hi) return v - hi;
    return 0;
}

int distance_to_closest_unloaded(const WorldState& world) {
    if (world.avatars().empty()) throw NoAvatars();
    const int view = world.view_distance_blocks();
    int best = view;
    for (const auto& [id, pos] : world.avatars()) {
        for (ChunkCoord c : chunks_within(pos.x, pos.z, view)) {
            if (world.is_loaded(c)) continue;
            int dx = interval_distance(pos.x, c.cx * kChunkSizeX,
                                       c.cx * kChunkSizeX + kChunkSizeX - 1);
            int dz = interval_distance(pos.z, c.cz * kChunkSizeZ,
                                       c.cz * kChunkSizeZ + kChunkSizeZ - 1);
            best = std::min(best, std::max(dx, dz));
        }
    }
    return best;
}

}  // namespace servo
