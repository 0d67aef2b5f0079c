#include <doctest.h>

#include "servo/speculation.hpp"

using namespace servo;

namespace {

ConstructState line_state() {
    ConstructState st;
    st.id = 1;
    st.bounds = BlockBox{{0, 0, 0}, {2, 0, 0}};
    st.cells = {make_block(BlockType::Source, 15), make_block(BlockType::Wire),
                make_block(BlockType::Wire)};
    return st;
}

OffloadReply reply_for(const OffloadRequest& req) {
    OffloadReply r;
    r.seq = req.seq;
    r.construct_id = req.construct_id;
    r.start_tick = req.start_tick;
    r.num_steps = req.num_steps;
    r.logical_ts = req.logical_ts;
    auto traj = simulate(req.state, req.num_steps);
    for (const auto& s : traj) r.states.push_back(s.cells);
    return r;
}

}  // namespace

TEST_CASE("a reply consumed mid-flight yields the documented efficiency") {
    // 8-step invocation issued at creation; the reply lands after five ticks
    // were already simulated locally, so three of its states get applied:
    // efficiency (8 - 5) / 8 = 0.375.
    SpeculativeExecutor exec(OffloadPolicy{8, 2, false, true});
    auto st = line_state();
    exec.track(st);

    auto req = exec.schedule_next(st, 0);
    REQUIRE(req.has_value());
    CHECK(req->start_tick == 0);
    CHECK(req->num_steps == 8);
    CHECK(req->logical_ts == 0);

    ConstructState cur = st;
    for (int64_t t = 1; t <= 5; ++t) {
        auto r = exec.on_construct_tick(cur, t);
        CHECK(!r.from_speculation);
        cur.cells = r.cells;
        cur.base_tick = t;
        CHECK(!exec.schedule_next(cur, t).has_value());  // still outstanding
    }

    auto out = exec.accept_reply(reply_for(*req));
    CHECK(out.status == ReplyStatus::Accepted);
    CHECK(out.late == 5);
    CHECK(out.buffered == 3);
    CHECK(exec.drain_records().empty());  // record stays open until applied

    auto expected = simulate(st, 8);
    for (int64_t t = 6; t <= 8; ++t) {
        auto r = exec.on_construct_tick(cur, t);
        CHECK(r.from_speculation);
        CHECK(r.cells == expected[t - 1].cells);
        cur.cells = r.cells;
        cur.base_tick = t;
        if (t == 6) {
            // Two buffered states remain, at the lead: reinvoke from the last
            // buffered state.
            auto next = exec.schedule_next(cur, t);
            REQUIRE(next.has_value());
            CHECK(next->start_tick == 8);
            CHECK(next->state.cells == expected[7].cells);
        }
    }

    auto recs = exec.drain_records();
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].total_steps == 8);
    CHECK(recs[0].duplicated_steps == 5);
    CHECK(recs[0].efficiency == doctest::Approx(0.375));
    CHECK(recs[0].issue_tick == 0);
}

TEST_CASE("a reply that arrives before any local step is fully used") {
    SpeculativeExecutor exec(OffloadPolicy{4, 2, false, true});
    auto st = line_state();
    exec.track(st);
    auto req = exec.schedule_next(st, 0);
    REQUIRE(req.has_value());

    auto out = exec.accept_reply(reply_for(*req));
    CHECK(out.buffered == 4);
    CHECK(out.late == 0);

    ConstructState cur = st;
    for (int64_t t = 1; t <= 4; ++t) {
        auto r = exec.on_construct_tick(cur, t);
        CHECK(r.from_speculation);
        cur.cells = r.cells;
        cur.base_tick = t;
    }
    auto recs = exec.drain_records();
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].efficiency == 1.0);
    CHECK(recs[0].duplicated_steps == 0);
}

TEST_CASE("a reply after every covered tick was simulated locally is late") {
    SpeculativeExecutor exec(OffloadPolicy{3, 1, false, true});
    auto st = line_state();
    exec.track(st);
    auto req = exec.schedule_next(st, 0);
    REQUIRE(req.has_value());

    ConstructState cur = st;
    for (int64_t t = 1; t <= 3; ++t) {
        auto r = exec.on_construct_tick(cur, t);
        cur.cells = r.cells;
        cur.base_tick = t;
    }
    // All three duplicated: the invocation dies and records zero efficiency.
    auto recs = exec.drain_records();
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].efficiency == 0.0);
    CHECK(recs[0].duplicated_steps == 3);

    auto out = exec.accept_reply(reply_for(*req));
    CHECK(out.status == ReplyStatus::Late);
    CHECK(out.buffered == 0);
    CHECK(exec.counters().late_replies == 1);
    CHECK(exec.drain_records().empty());  // no double finalize
}

TEST_CASE("modification invalidates buffered states and outstanding work") {
    SpeculativeExecutor exec(OffloadPolicy{4, 4, false, true});
    auto st = line_state();
    exec.track(st);
    auto req = exec.schedule_next(st, 0);
    exec.accept_reply(reply_for(*req));
    CHECK(exec.buffered_count(1) == 4);

    ConstructState cur = st;
    auto r = exec.on_construct_tick(cur, 1);
    cur.cells = r.cells;
    cur.base_tick = 1;

    // Player modification: new timestamp, new cells.
    cur.logical_ts = 1;
    exec.on_modified(cur);
    CHECK(exec.buffered_count(1) == 0);

    auto recs = exec.drain_records();
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].total_steps == 4);
    CHECK(recs[0].duplicated_steps == 3);  // one applied out of four

    // The old invocation's hypothetical sibling reply is now stale.
    OffloadReply stale = reply_for(*req);
    auto out = exec.accept_reply(stale);
    CHECK(out.status == ReplyStatus::Stale);
    CHECK(exec.counters().stale_replies == 1);
}

TEST_CASE("modification while outstanding finalizes it as fully wasted") {
    SpeculativeExecutor exec(OffloadPolicy{10, 2, false, true});
    auto st = line_state();
    exec.track(st);
    auto req = exec.schedule_next(st, 0);
    REQUIRE(req.has_value());

    ConstructState cur = st;
    cur.logical_ts = 1;
    exec.on_modified(cur);
    CHECK(!exec.has_outstanding(1));  // reinvoke_on_stale clears immediately

    auto recs = exec.drain_records();
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].efficiency == 0.0);

    auto next = exec.schedule_next(cur, 1);
    REQUIRE(next.has_value());
    CHECK(next->logical_ts == 1);
}

TEST_CASE("without reinvoke-on-stale the slot stays blocked until the reply") {
    SpeculativeExecutor exec(OffloadPolicy{10, 2, false, false});
    auto st = line_state();
    exec.track(st);
    auto req = exec.schedule_next(st, 0);
    REQUIRE(req.has_value());

    ConstructState cur = st;
    cur.logical_ts = 1;
    exec.on_modified(cur);
    CHECK(exec.has_outstanding(1));  // zombie keeps the slot occupied
    CHECK(!exec.schedule_next(cur, 1).has_value());

    auto out = exec.accept_reply(reply_for(*req));
    CHECK(out.status == ReplyStatus::Stale);
    CHECK(!exec.has_outstanding(1));
    CHECK(exec.schedule_next(cur, 2).has_value());
}

TEST_CASE("replies for unknown constructs are counted and dropped") {
    SpeculativeExecutor exec;
    OffloadReply r;
    r.construct_id = 42;
    auto out = exec.accept_reply(r);
    CHECK(out.status == ReplyStatus::UnknownConstruct);
    CHECK(exec.counters().unknown_construct == 1);
}

TEST_CASE("error replies release the slot and count the invocation as wasted") {
    SpeculativeExecutor exec(OffloadPolicy{6, 2, false, true});
    auto st = line_state();
    exec.track(st);
    auto req = exec.schedule_next(st, 0);
    REQUIRE(req.has_value());

    OffloadReply err;
    err.seq = req->seq;
    err.construct_id = 1;
    err.start_tick = req->start_tick;
    err.logical_ts = req->logical_ts;
    err.error = true;
    exec.accept_reply(err);
    CHECK(exec.counters().error_replies == 1);
    CHECK(!exec.has_outstanding(1));

    auto recs = exec.drain_records();
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].efficiency == 0.0);
}

TEST_CASE("loop replies replace the buffer and answer every future tick") {
    SpeculativeExecutor exec(OffloadPolicy{100, 2, true, true});
    ConstructState st;
    st.id = 9;
    st.bounds = BlockBox{{0, 0, 0}, {1, 0, 0}};
    st.cells = {make_block(BlockType::Inverter), make_block(BlockType::Wire)};
    exec.track(st);

    auto req = exec.schedule_next(st, 0);
    REQUIRE(req.has_value());
    CHECK(req->loop_detection);

    auto sim = simulate_with_loop_detection(req->state, req->num_steps);
    REQUIRE(std::holds_alternative<LoopDescriptor>(sim));

    OffloadReply r;
    r.seq = req->seq;
    r.construct_id = 9;
    r.start_tick = 0;
    r.num_steps = 100;
    r.logical_ts = 0;
    r.loop = std::get<LoopDescriptor>(sim);
    auto out = exec.accept_reply(r);
    CHECK(out.status == ReplyStatus::Accepted);
    CHECK(exec.has_loop(9));
    CHECK(exec.counters().loop_replies == 1);

    // No more invocations are ever scheduled for a looped construct.
    CHECK(!exec.schedule_next(st, 1).has_value());

    auto traj = simulate(st, 30);
    ConstructState cur = st;
    for (int64_t t = 1; t <= 30; ++t) {
        auto res = exec.on_construct_tick(cur, t);
        CHECK(res.from_speculation);
        CHECK(res.cells == traj[t - 1].cells);
        cur.cells = res.cells;
        cur.base_tick = t;
    }

    auto recs = exec.drain_records();
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].total_steps ==
          (uint32_t)(r.loop->prefix.size() + r.loop->cycle.size()));
    CHECK(recs[0].duplicated_steps == 0);
}

TEST_CASE("untrack drops pending accounting silently") {
    SpeculativeExecutor exec(OffloadPolicy{4, 2, false, true});
    auto st = line_state();
    exec.track(st);
    auto req = exec.schedule_next(st, 0);
    exec.accept_reply(reply_for(*req));
    exec.untrack(1);
    CHECK(!exec.tracks(1));
    CHECK(exec.drain_records().empty());
}
