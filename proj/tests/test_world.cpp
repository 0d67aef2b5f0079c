#include <doctest.h>

#include "servo/world.hpp"

using namespace servo;

TEST_CASE("block index is a bijection over the chunk volume") {
    std::vector<bool> seen(kChunkBlocks, false);
    for (int y = 0; y < kChunkSizeY; ++y) {
        for (int z = 0; z < kChunkSizeZ; ++z) {
            for (int x = 0; x < kChunkSizeX; ++x) {
                int idx = block_index(x, y, z);
                REQUIRE(idx >= 0);
                REQUIRE(idx < kChunkBlocks);
                REQUIRE(!seen[idx]);
                seen[idx] = true;
            }
        }
    }
}

TEST_CASE("x varies fastest, then z, then y") {
    CHECK(block_index(0, 0, 0) == 0);
    CHECK(block_index(1, 0, 0) == 1);
    CHECK(block_index(0, 0, 1) == 16);
    CHECK(block_index(0, 1, 0) == 256);
}

TEST_CASE("floor division handles negatives") {
    CHECK(floor_div(-1, 16) == -1);
    CHECK(floor_div(-16, 16) == -1);
    CHECK(floor_div(-17, 16) == -2);
    CHECK(floor_div(15, 16) == 0);
    CHECK(floor_mod(-1, 16) == 15);
    CHECK(floor_mod(-16, 16) == 0);
    CHECK(floor_mod(17, 16) == 1);
}

TEST_CASE("chunk_of maps world to chunk coordinates") {
    CHECK(chunk_of(0, 0) == ChunkCoord{0, 0});
    CHECK(chunk_of(15, 15) == ChunkCoord{0, 0});
    CHECK(chunk_of(16, 0) == ChunkCoord{1, 0});
    CHECK(chunk_of(-1, -1) == ChunkCoord{-1, -1});
}

TEST_CASE("make_block clears power on stateless types and clamps") {
    CHECK(make_block(BlockType::Solid, 9).power == 0);
    CHECK(make_block(BlockType::Air, 9).power == 0);
    CHECK(make_block(BlockType::Wire, 99).power == kMaxPower);
    CHECK(make_block(BlockType::Source, 15).power == 15);
}

static std::unique_ptr<Chunk> patterned_chunk(ChunkCoord c) {
    auto ch = std::make_unique<Chunk>();
    ch->coord = c;
    ch->generated_by = 1;
    for (int i = 0; i < kChunkBlocks; i += 97) {
        auto t = (BlockType)(i % kBlockTypeCount);
        ch->blocks[i] = make_block(t, (uint8_t)(i % 16));
    }
    return ch;
}

TEST_CASE("chunk round-trips through the run-length codec") {
    auto ch = patterned_chunk({-3, 7});
    auto bytes = encode_chunk(*ch);
    auto back = decode_chunk(bytes);
    CHECK(back->coord == ch->coord);
    CHECK(back->generated_by == ch->generated_by);
    CHECK(back->blocks == ch->blocks);
}

TEST_CASE("uniform chunk encodes as split maximal runs") {
    Chunk ch;
    ch.coord = {0, 0};
    for (auto& b : ch.blocks) b = make_block(BlockType::Solid);
    auto bytes = encode_chunk(ch);
    // header 9 bytes, then 65536 blocks as runs of at most 65535.
    CHECK(bytes.size() == 9 + 2 * 4);
    auto back = decode_chunk(bytes);
    CHECK(back->blocks == ch.blocks);
}

TEST_CASE("decoder rejects malformed payloads") {
    auto ch = patterned_chunk({0, 0});
    auto good = encode_chunk(*ch);

    auto truncated = good;
    truncated.resize(truncated.size() - 1);
    CHECK_THROWS(decode_chunk(truncated));

    auto trailing = good;
    trailing.push_back(0);
    CHECK_THROWS(decode_chunk(trailing));

    auto bad_type = good;
    bad_type[9] = 99;  // first run's block type
    CHECK_THROWS(decode_chunk(bad_type));
}

TEST_CASE("set_block stamps events with the current tick and dirties the chunk") {
    WorldState w;
    w.insert_chunk(patterned_chunk({0, 0}));
    w.set_tick(42);
    auto ev = w.set_block({3, 10, 5}, make_block(BlockType::Wire, 7));
    CHECK(ev.tick == 42);
    CHECK(ev.after == make_block(BlockType::Wire, 7));
    CHECK(w.get_block({3, 10, 5}) == make_block(BlockType::Wire, 7));
    CHECK(w.chunk_or_throw({0, 0}).dirty);

    // Writing the same value is still an event.
    auto ev2 = w.set_block({3, 10, 5}, make_block(BlockType::Wire, 7));
    CHECK(ev2.before == ev2.after);
}

TEST_CASE("get_block throws for unloaded chunks") {
    WorldState w;
    CHECK_THROWS_AS(w.get_block({100, 0, 100}), ChunkNotLoaded);
}

TEST_CASE("chunks_within covers the intersecting square") {
    auto cs = chunks_within(0, 0, 16);
    // [-16, 16] spans x chunks -1..1.
    CHECK(cs.size() == 9);
    CHECK(cs.count({-1, -1}));
    CHECK(cs.count({1, 1}));
    CHECK(!cs.count({2, 0}));

    auto one = chunks_within(8, 8, 0);
    CHECK(one.size() == 1);
    CHECK(one.count({0, 0}));
}

TEST_CASE("view of 128 blocks requires a 17x17 chunk square") {
    WorldState w;
    w.set_view_distance_blocks(128);
    w.avatars()[1] = Pos{0, 4, 0};
    CHECK(w.required_chunks().size() == 17 * 17);
}

TEST_CASE("required chunks grow monotonically with radius") {
    WorldState w;
    w.avatars()[1] = Pos{37, 4, -12};
    size_t prev = 0;
    for (int r : {0, 10, 50, 128, 160}) {
        auto cs = w.required_chunks(r);
        CHECK(cs.size() >= prev);
        prev = cs.size();
    }
}
