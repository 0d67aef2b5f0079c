#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "servo/construct.hpp"

namespace servo {

struct OffloadPolicy {
    uint32_t num_steps = 100;   // steps requested per invocation
    uint32_t tick_lead = 20;    // reinvoke when this few buffered states remain
    bool loop_detection = true;
    // When a construct is modified while an invocation is outstanding, issue
    // the replacement immediately (true) or wait for the stale reply (false).
    bool reinvoke_on_stale = true;
};

struct OffloadRequest {
    uint64_t seq = 0;
    ConstructId construct_id = 0;
    ConstructState state;
    int64_t start_tick = 0;  // == state.base_tick; reply k covers start_tick + k + 1
    uint32_t num_steps = 0;
    uint64_t logical_ts = 0;
    bool loop_detection = false;
};

struct OffloadReply {
    uint64_t seq = 0;
    ConstructId construct_id = 0;
    int64_t start_tick = 0;
    uint32_t num_steps = 0;
    uint64_t logical_ts = 0;
    bool error = false;
    std::vector<Cells> states;  // states[k] is the state at tick start_tick + k + 1
    std::optional<LoopDescriptor> loop;
    double worker_duration_ms = 0;
};

// Outcome of one invocation: how many of the steps the function computed were
// wasted because the local simulation had to compute them anyway (or because
// a modification invalidated them before they were applied).
struct EfficiencyRecord {
    uint64_t seq = 0;
    ConstructId construct_id = 0;
    int64_t issue_tick = 0;
    int64_t start_tick = 0;
    uint32_t total_steps = 0;
    uint32_t duplicated_steps = 0;
    double efficiency = 0;  // (total - duplicated) / total
};

enum class ReplyStatus { Accepted, Late, Stale, UnknownConstruct };

struct ReplyOutcome {
    ReplyStatus status = ReplyStatus::Accepted;
    uint32_t buffered = 0;  // states queued for future ticks
    uint32_t late = 0;      // states for ticks already simulated locally
};

// Replicated speculative execution driver for simulated constructs. The
// local simulation keeps stepping a construct until remote results for the
// same ticks arrive; buffered remote states then substitute for local work.
// Logical timestamps invalidate all remote work computed from a state that a
// player modification has overwritten.
class SpeculativeExecutor {
public:
    explicit SpeculativeExecutor(OffloadPolicy policy = {}) : policy_(policy) {}

    const OffloadPolicy& policy() const { return policy_; }

    void track(const ConstructState& st);
    void untrack(ConstructId id);
    // The construct's cells were replaced (logical_ts bumped). Clears all
    // speculative state and finalizes outstanding invocation records.
    void on_modified(const ConstructState& st);

    bool tracks(ConstructId id) const { return trackers_.count(id) != 0; }

    struct TickResult {
        Cells cells;
        bool from_speculation = false;
    };

    // Produces the construct's cells for world_tick. current.base_tick must
    // be world_tick - 1. Either consumes one buffered/looped remote state or
    // steps locally, charging a duplicated step to the covering invocation.
    TickResult on_construct_tick(const ConstructState& current, int64_t world_tick);

    // Issues the next invocation when the buffer has drained to the lead,
    // nothing is outstanding, and no loop descriptor covers the future.
    std::optional<OffloadRequest> schedule_next(const ConstructState& current,
                                                int64_t world_tick);

    ReplyOutcome accept_reply(const OffloadReply& r);

    std::vector<EfficiencyRecord> drain_records();

    struct Counters {
        uint64_t issued = 0;
        uint64_t accepted = 0;
        uint64_t late_replies = 0;
        uint64_t stale_replies = 0;
        uint64_t unknown_construct = 0;
        uint64_t error_replies = 0;
        uint64_t loop_replies = 0;
    };
    const Counters& counters() const { return counters_; }

    size_t buffered_count(ConstructId id) const;
    bool has_outstanding(ConstructId id) const;
    bool has_loop(ConstructId id) const;

private:
    struct InFlight {
        uint64_t seq = 0;
        int64_t issue_tick = 0;
        int64_t start_tick = 0;
        uint32_t num_steps = 0;
        uint64_t logical_ts = 0;
        uint32_t duplicated = 0;
        // A stale invocation kept only to block rescheduling until its reply
        // arrives (reinvoke_on_stale == false). Accrues nothing.
        bool zombie = false;
    };

    struct PendingRecord {
        EfficiencyRecord rec;
        uint32_t applied = 0;
        uint32_t to_apply = 0;
    };

    struct Tracker {
        uint64_t logical_ts = 0;
        int64_t last_applied_tick = 0;
        std::map<int64_t, std::pair<uint64_t, Cells>> buffer;
        std::optional<InFlight> outstanding;
        std::optional<LoopDescriptor> loop;
        int64_t loop_start_tick = 0;
    };

    void finalize(uint64_t seq, ConstructId id, int64_t issue_tick, int64_t start_tick,
                  uint32_t total, uint32_t duplicated);
    void invalidate(Tracker& t, ConstructId id);

    OffloadPolicy policy_;
    std::map<ConstructId, Tracker> trackers_;
    std::map<uint64_t, PendingRecord> pending_;
    std::vector<EfficiencyRecord> completed_;
    Counters counters_;
    uint64_t next_seq_ = 1;
};

}  // namespace servo
