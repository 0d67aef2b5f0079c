#pragma once

#include <cstdint>
#include <memory>
#include <set>
#include <vector>

#include "servo/world.hpp"

namespace servo {

enum class TerrainKind : uint8_t {
    Flat = 0,
    Hills = 1,
};

struct WorldSeed {
    uint64_t seed = 0;
    TerrainKind kind = TerrainKind::Flat;
};

// Height of the terrain surface at a world column: blocks with y < height are
// Solid, everything above is Air. Flat worlds are 4 high everywhere. Hills
// worlds use two octaves of bilinearly interpolated value noise; the math is
// integer and dyadic-rational only, so results are identical on any platform.
int surface_height(const WorldSeed& seed, int32_t x, int32_t z);

std::unique_ptr<Chunk> generate_chunk(const WorldSeed& seed, ChunkCoord coord);

// Chunks required around avatars (view distance plus margin_blocks) that are
// neither loaded nor excluded. Sorted by coordinates.
std::vector<ChunkCoord> chunks_needing_generation(const WorldState& world,
                                                  int margin_blocks,
                                                  const std::set<ChunkCoord>& excluded);

// Minimum Chebyshev distance in blocks from any avatar to the nearest not yet
// loaded chunk within that avatar's view square. Returns the view distance
// when every required chunk is loaded. Throws NoAvatars when nobody is
// connected.
int distance_to_closest_unloaded(const WorldState& world);

}  // namespace servo
