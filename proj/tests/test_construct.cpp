#include <doctest.h>

#include <map>

#include "servo/construct.hpp"
#include "servo/rng.hpp"

using namespace servo;

namespace {

// Reference automaton: a plain map of occupied positions, stepped by the
// written rules with no packing, bounds math, or strides. Positions absent
// from the map read as power 0.
std::map<Pos, Block> reference_step(const std::map<Pos, Block>& in) {
    auto power_at = [&](int32_t x, int32_t y, int32_t z) -> int {
        auto it = in.find(Pos{x, y, z});
        return it == in.end() ? 0 : it->second.power;
    };
    std::map<Pos, Block> out;
    for (const auto& [p, b] : in) {
        int nb = 0;
        nb = std::max(nb, power_at(p.x + 1, p.y, p.z));
        nb = std::max(nb, power_at(p.x - 1, p.y, p.z));
        nb = std::max(nb, power_at(p.x, p.y + 1, p.z));
        nb = std::max(nb, power_at(p.x, p.y - 1, p.z));
        nb = std::max(nb, power_at(p.x, p.y, p.z + 1));
        nb = std::max(nb, power_at(p.x, p.y, p.z - 1));
        Block next = b;
        switch (b.type) {
            case BlockType::Source: next.power = kMaxPower; break;
            case BlockType::Wire: next.power = (uint8_t)std::max(0, nb - 1); break;
            case BlockType::Inverter: next.power = nb == 0 ? kMaxPower : 0; break;
            case BlockType::Lamp: next.power = (uint8_t)nb; break;
            default: next.power = 0; break;
        }
        out[p] = next;
    }
    return out;
}

ConstructState from_map(const std::map<Pos, Block>& blocks) {
    ConstructState st;
    REQUIRE(!blocks.empty());
    st.bounds = BlockBox{blocks.begin()->first, blocks.begin()->first};
    for (const auto& [p, b] : blocks) {
        st.bounds.min.x = std::min(st.bounds.min.x, p.x);
        st.bounds.min.y = std::min(st.bounds.min.y, p.y);
        st.bounds.min.z = std::min(st.bounds.min.z, p.z);
        st.bounds.max.x = std::max(st.bounds.max.x, p.x);
        st.bounds.max.y = std::max(st.bounds.max.y, p.y);
        st.bounds.max.z = std::max(st.bounds.max.z, p.z);
    }
    st.cells.assign(st.bounds.volume(), Block{});
    for (const auto& [p, b] : blocks) st.cells[st.bounds.index_of(p)] = b;
    return st;
}

std::map<Pos, Block> to_map(const BlockBox& bounds, const Cells& cells) {
    std::map<Pos, Block> out;
    for (size_t i = 0; i < cells.size(); ++i) {
        if (cells[i].type != BlockType::Air) out[bounds.pos_of(i)] = cells[i];
    }
    return out;
}

std::map<Pos, Block> random_construct(Rng& rng, int count) {
    std::map<Pos, Block> blocks;
    Pos p{0, 0, 0};
    blocks[p] = make_block(BlockType::Source, kMaxPower);
    while ((int)blocks.size() < count) {
        int axis = (int)rng.uniform_int(0, 2);
        int dir = rng.uniform_int(0, 1) ? 1 : -1;
        Pos q = p;
        (axis == 0 ? q.x : axis == 1 ? q.y : q.z) += dir;
        auto t = (BlockType)rng.uniform_int(2, 5);
        blocks.emplace(q, make_block(t, (uint8_t)rng.uniform_int(0, 15)));
        p = q;
    }
    return blocks;
}

}  // namespace

TEST_CASE("box index_of and pos_of are inverse") {
    BlockBox box{{-5, 3, 7}, {2, 6, 11}};
    for (size_t i = 0; i < box.volume(); ++i) {
        Pos p = box.pos_of(i);
        CHECK(box.contains(p));
        CHECK(box.index_of(p) == i);
    }
}

TEST_CASE("source wire wire lamp line reaches the known steady state") {
    std::map<Pos, Block> m{
        {{0, 0, 0}, make_block(BlockType::Source)},
        {{1, 0, 0}, make_block(BlockType::Wire)},
        {{2, 0, 0}, make_block(BlockType::Wire)},
        {{3, 0, 0}, make_block(BlockType::Lamp)},
    };
    auto st = from_map(m);

    const std::vector<std::vector<uint8_t>> expected = {
        {15, 0, 0, 0}, {15, 14, 0, 0}, {15, 14, 13, 0}, {15, 14, 13, 13},
        {15, 14, 13, 13},
    };
    for (const auto& want : expected) {
        st = step(st);
        auto got = to_map(st.bounds, st.cells);
        std::vector<uint8_t> powers;
        for (int x = 0; x < 4; ++x) powers.push_back(got.at(Pos{x, 0, 0}).power);
        CHECK(powers == want);
    }
}

TEST_CASE("inverter and wire pair oscillates with period 4") {
    std::map<Pos, Block> m{
        {{0, 0, 0}, make_block(BlockType::Inverter)},
        {{1, 0, 0}, make_block(BlockType::Wire)},
    };
    auto st = from_map(m);
    const std::vector<std::pair<int, int>> expected = {
        {15, 0}, {15, 14}, {0, 14}, {0, 0}, {15, 0}, {15, 14}, {0, 14}, {0, 0},
    };
    for (auto [inv, wire] : expected) {
        st = step(st);
        auto got = to_map(st.bounds, st.cells);
        CHECK((int)got.at(Pos{0, 0, 0}).power == inv);
        CHECK((int)got.at(Pos{1, 0, 0}).power == wire);
    }
}

TEST_CASE("stepping never changes cell types and keeps powers in range") {
    Rng rng(123);
    for (int trial = 0; trial < 20; ++trial) {
        auto st = from_map(random_construct(rng, 40));
        auto next = step(st);
        REQUIRE(next.cells.size() == st.cells.size());
        for (size_t i = 0; i < st.cells.size(); ++i) {
            CHECK(next.cells[i].type == st.cells[i].type);
            CHECK(next.cells[i].power <= kMaxPower);
        }
        CHECK(next.base_tick == st.base_tick + 1);
    }
}

TEST_CASE("packed stepping matches the reference automaton") {
    Rng rng(999);
    for (int trial = 0; trial < 50; ++trial) {
        auto m = random_construct(rng, 2 + (int)rng.uniform_int(1, 60));
        auto st = from_map(m);
        for (int k = 0; k < 12; ++k) {
            m = reference_step(m);
            st = step(st);
            CHECK(to_map(st.bounds, st.cells) == m);
        }
    }
}

TEST_CASE("simulate returns consecutive states with advancing base ticks") {
    Rng rng(5);
    auto st = from_map(random_construct(rng, 30));
    st.base_tick = 100;
    auto traj = simulate(st, 10);
    REQUIRE(traj.size() == 10);
    auto cur = st;
    for (uint32_t k = 0; k < 10; ++k) {
        cur = step(cur);
        CHECK(traj[k].cells == cur.cells);
        CHECK(traj[k].base_tick == 101 + k);
    }
}

TEST_CASE("cell serialization round-trips and rejects garbage") {
    Rng rng(77);
    auto st = from_map(random_construct(rng, 25));
    ByteWriter w;
    write_cells(w, st.bounds, st.cells);
    auto bytes = w.take();
    ByteReader r(bytes);
    auto [bounds, cells] = read_cells(r);
    CHECK(bounds == st.bounds);
    CHECK(cells == st.cells);
    CHECK(r.done());

    ByteWriter bad;
    bad.put_i32(5);
    bad.put_i32(0);
    bad.put_i32(0);
    bad.put_i32(0);  // max.x < min.x
    bad.put_i32(0);
    bad.put_i32(0);
    auto bb = bad.take();
    ByteReader br(bb);
    CHECK_THROWS_AS(read_cells(br), WireError);
}

TEST_CASE("state hash ignores id, timestamps, and base tick") {
    Rng rng(31);
    auto st = from_map(random_construct(rng, 20));
    auto h0 = state_hash(st);
    st.id = 999;
    st.logical_ts = 123;
    st.base_tick = 456;
    CHECK(state_hash(st) == h0);
    st.cells[0].power ^= 1;
    CHECK(state_hash(st) != h0);
}

TEST_CASE("loop detection truncates the oscillator to prefix plus cycle") {
    std::map<Pos, Block> m{
        {{0, 0, 0}, make_block(BlockType::Inverter)},
        {{1, 0, 0}, make_block(BlockType::Wire)},
    };
    auto st = from_map(m);
    auto result = simulate_with_loop_detection(st, 1000);
    REQUIRE(std::holds_alternative<LoopDescriptor>(result));
    const auto& d = std::get<LoopDescriptor>(result);
    CHECK(d.entry_index == d.prefix.size());
    CHECK(d.cycle.size() == 4);
    CHECK(d.prefix.size() + d.cycle.size() <= 8);
}

TEST_CASE("expanding a loop reproduces plain simulation exactly") {
    Rng rng(4242);
    int looped = 0;
    for (int trial = 0; trial < 30; ++trial) {
        auto m = random_construct(rng, 2 + (int)rng.uniform_int(1, 30));
        auto st = from_map(m);
        const uint32_t n = 200;
        auto result = simulate_with_loop_detection(st, n);
        auto traj = simulate(st, n);
        if (std::holds_alternative<std::vector<ConstructState>>(result)) {
            const auto& states = std::get<std::vector<ConstructState>>(result);
            REQUIRE(states.size() == n);
            for (uint32_t k = 0; k < n; ++k) CHECK(states[k].cells == traj[k].cells);
        } else {
            ++looped;
            const auto& d = std::get<LoopDescriptor>(result);
            for (uint32_t k = 0; k < n; ++k) CHECK(expand(d, k) == traj[k].cells);
            // And far beyond the simulated range.
            auto far = simulate(st, 600);
            for (uint32_t k = 0; k < 600; ++k) CHECK(expand(d, k) == far[k].cells);
        }
    }
    // Small constructs converge to fixed points or cycles almost always.
    CHECK(looped > 0);
}

TEST_CASE("a colliding hasher does not produce false loops") {
    std::map<Pos, Block> m{
        {{0, 0, 0}, make_block(BlockType::Source)},
        {{1, 0, 0}, make_block(BlockType::Wire)},
        {{2, 0, 0}, make_block(BlockType::Wire)},
    };
    auto st = from_map(m);
    CellsHasher collide = [](const BlockBox&, const Cells&) -> uint64_t { return 7; };
    auto result = simulate_with_loop_detection(st, 50, collide);
    auto traj = simulate(st, 50);
    if (std::holds_alternative<LoopDescriptor>(result)) {
        const auto& d = std::get<LoopDescriptor>(result);
        for (uint32_t k = 0; k < 50; ++k) CHECK(expand(d, k) == traj[k].cells);
    } else {
        const auto& states = std::get<std::vector<ConstructState>>(result);
        for (uint32_t k = 0; k < 50; ++k) CHECK(states[k].cells == traj[k].cells);
    }
}

TEST_CASE("fixed points become cycles of length 1") {
    std::map<Pos, Block> m{
        {{0, 0, 0}, make_block(BlockType::Source)},
        {{1, 0, 0}, make_block(BlockType::Wire)},
    };
    auto st = from_map(m);
    auto result = simulate_with_loop_detection(st, 100);
    REQUIRE(std::holds_alternative<LoopDescriptor>(result));
    const auto& d = std::get<LoopDescriptor>(result);
    CHECK(d.cycle.size() == 1);
    auto traj = simulate(st, 20);
    for (uint32_t k = 0; k < 20; ++k) CHECK(expand(d, k) == traj[k].cells);
}
