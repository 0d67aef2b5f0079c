#include "servo/speculation.hpp"

#include <algorithm>
#include <cassert>

namespace servo {

void SpeculativeExecutor::track(const ConstructState& st) {
    Tracker t;
    t.logical_ts = st.logical_ts;
    t.last_applied_tick = st.base_tick;
    trackers_[st.id] = std::move(t);
}

void SpeculativeExecutor::untrack(ConstructId id) {
    auto it = trackers_.find(id);
    if (it == trackers_.end()) return;
    // Removal drops unfinished accounting: a construct that ceased to exist
    // has no meaningful efficiency outcome.
    for (const auto& [tick, entry] : it->second.buffer) pending_.erase(entry.first);
    trackers_.erase(it);
}

void SpeculativeExecutor::finalize(uint64_t seq, ConstructId id, int64_t issue_tick,
                                   int64_t start_tick, uint32_t total,
                                   uint32_t duplicated) {
    EfficiencyRecord rec;
    rec.seq = seq;
    rec.construct_id = id;
    rec.issue_tick = issue_tick;
    rec.start_tick = start_tick;
    rec.total_steps = total;
    rec.duplicated_steps = std::min(duplicated, total);
    rec.efficiency =
        total == 0 ? 0.0
                   : static_cast<double>(total - rec.duplicated_steps) / total;
    completed_.push_back(rec);
}

void SpeculativeExecutor::invalidate(Tracker& t, ConstructId id) {
    // Buffered-but-unapplied states will never be used; close their records
    // counting the unapplied remainder as waste.
    for (const auto& [tick, entry] : t.buffer) {
        auto it = pending_.find(entry.first);
        if (it == pending_.end()) continue;
        PendingRecord& p = it->second;
        finalize(p.rec.seq, id, p.rec.issue_tick, p.rec.start_tick, p.rec.total_steps,
                 p.rec.total_steps - p.applied);
        pending_.erase(it);
    }
    t.buffer.clear();
    t.loop.reset();

    if (t.outstanding && !t.outstanding->zombie) {
        InFlight& f = *t.outstanding;
        finalize(f.seq, id, f.issue_tick, f.start_tick, f.num_steps, f.num_steps);
        if (policy_.reinvoke_on_stale) {
            t.outstanding.reset();
        } else {
            f.zombie = true;
        }
    }
}

void SpeculativeExecutor::on_modified(const ConstructState& st) {
    auto it = trackers_.find(st.id);
    if (it == trackers_.end()) {
        track(st);
        return;
    }
    Tracker& t = it->second;
    invalidate(t, st.id);
    t.logical_ts = st.logical_ts;
    t.last_applied_tick = st.base_tick;
}

SpeculativeExecutor::TickResult SpeculativeExecutor::on_construct_tick(
    const ConstructState& current, int64_t world_tick) {
    Tracker& t = trackers_.at(current.id);

    if (t.loop && world_tick > t.loop_start_tick) {
        t.last_applied_tick = world_tick;
        return {expand(*t.loop, static_cast<uint64_t>(world_tick - t.loop_start_tick - 1)),
                true};
    }

    auto buf = t.buffer.find(world_tick);
    if (buf != t.buffer.end()) {
        auto [seq, cells] = std::move(buf->second);
        t.buffer.erase(buf);
        t.last_applied_tick = world_tick;
        auto pend = pending_.find(seq);
        if (pend != pending_.end()) {
            PendingRecord& p = pend->second;
            ++p.applied;
            if (p.applied >= p.to_apply) {
                finalize(p.rec.seq, current.id, p.rec.issue_tick, p.rec.start_tick,
                         p.rec.total_steps, p.rec.duplicated_steps);
                pending_.erase(pend);
            }
        }
        return {std::move(cells), true};
    }

    Cells next = step_cells(current.bounds, current.cells);
    t.last_applied_tick = world_tick;
    if (t.outstanding && !t.outstanding->zombie) {
        InFlight& f = *t.outstanding;
        if (world_tick > f.start_tick &&
            world_tick <= f.start_tick + static_cast<int64_t>(f.num_steps)) {
            ++f.duplicated;
            if (f.duplicated >= f.num_steps) {
                // Every step the invocation covers has now been simulated
                // locally; the reply can contribute nothing.
                finalize(f.seq, current.id, f.issue_tick, f.start_tick, f.num_steps,
                         f.num_steps);
                t.outstanding.reset();
            }
        }
    }
    return {std::move(next), false};
}

std::optional<OffloadRequest> SpeculativeExecutor::schedule_next(
    const ConstructState& current, int64_t world_tick) {
    Tracker& t = trackers_.at(current.id);
    if (t.loop || t.outstanding) return std::nullopt;
    if (t.buffer.size() > policy_.tick_lead) return std::nullopt;

    OffloadRequest req;
    req.seq = next_seq_++;
    req.construct_id = current.id;
    req.num_steps = policy_.num_steps;
    req.logical_ts = t.logical_ts;
    req.loop_detection = policy_.loop_detection;
    if (t.buffer.empty()) {
        req.state = current;
        req.state.logical_ts = t.logical_ts;
    } else {
        const auto& [tick, entry] = *t.buffer.rbegin();
        req.state.id = current.id;
        req.state.bounds = current.bounds;
        req.state.cells = entry.second;
        req.state.logical_ts = t.logical_ts;
        req.state.base_tick = tick;
    }
    req.start_tick = req.state.base_tick;

    InFlight f;
    f.seq = req.seq;
    f.issue_tick = world_tick;
    f.start_tick = req.start_tick;
    f.num_steps = req.num_steps;
    f.logical_ts = req.logical_ts;
    t.outstanding = f;
    ++counters_.issued;
    return req;
}

ReplyOutcome SpeculativeExecutor::accept_reply(const OffloadReply& r) {
    auto it = trackers_.find(r.construct_id);
    if (it == trackers_.end()) {
        ++counters_.unknown_construct;
        return {ReplyStatus::UnknownConstruct, 0, 0};
    }
    Tracker& t = it->second;

    bool matches_outstanding = t.outstanding &&
                               t.outstanding->start_tick == r.start_tick &&
                               t.outstanding->logical_ts == r.logical_ts;

    if (r.logical_ts < t.logical_ts) {
        ++counters_.stale_replies;
        if (matches_outstanding) t.outstanding.reset();
        return {ReplyStatus::Stale, 0, 0};
    }

    if (r.error) {
        ++counters_.error_replies;
        if (matches_outstanding && !t.outstanding->zombie) {
            InFlight& f = *t.outstanding;
            finalize(f.seq, r.construct_id, f.issue_tick, f.start_tick, f.num_steps,
                     f.num_steps);
            t.outstanding.reset();
        }
        return {ReplyStatus::Late, 0, 0};
    }

    if (r.loop) {
        ++counters_.loop_replies;
        ++counters_.accepted;
        t.loop = r.loop;
        t.loop_start_tick = r.start_tick;
        t.buffer.clear();
        if (matches_outstanding && !t.outstanding->zombie) {
            InFlight& f = *t.outstanding;
            uint32_t total = static_cast<uint32_t>(r.loop->prefix.size() +
                                                   r.loop->cycle.size());
            finalize(f.seq, r.construct_id, f.issue_tick, f.start_tick, total,
                     f.duplicated);
            t.outstanding.reset();
        }
        return {ReplyStatus::Accepted, 0, 0};
    }

    ReplyOutcome out;
    uint64_t seq = matches_outstanding ? t.outstanding->seq : 0;
    for (size_t k = 0; k < r.states.size(); ++k) {
        int64_t tick = r.start_tick + static_cast<int64_t>(k) + 1;
        if (tick <= t.last_applied_tick) {
            ++out.late;
        } else {
            t.buffer.emplace(tick, std::make_pair(seq, r.states[k]));
            ++out.buffered;
        }
    }

    if (matches_outstanding && !t.outstanding->zombie) {
        InFlight& f = *t.outstanding;
        if (out.buffered == 0) {
            finalize(f.seq, r.construct_id, f.issue_tick, f.start_tick, f.num_steps,
                     f.num_steps);
        } else {
            PendingRecord p;
            p.rec.seq = f.seq;
            p.rec.construct_id = r.construct_id;
            p.rec.issue_tick = f.issue_tick;
            p.rec.start_tick = f.start_tick;
            p.rec.total_steps = f.num_steps;
            p.rec.duplicated_steps = f.duplicated;
            p.to_apply = out.buffered;
            pending_.emplace(f.seq, std::move(p));
        }
        t.outstanding.reset();
    }

    if (out.buffered > 0) {
        ++counters_.accepted;
        if (out.late > 0) ++counters_.late_replies;
        out.status = ReplyStatus::Accepted;
    } else {
        ++counters_.late_replies;
        out.status = ReplyStatus::Late;
    }
    return out;
}

std::vector<EfficiencyRecord> SpeculativeExecutor::drain_records() {
    return std::exchange(completed_, {});
}

size_t SpeculativeExecutor::buffered_count(ConstructId id) const {
    auto it = trackers_.find(id);
    return it == trackers_.end() ? 0 : it->second.buffer.size();
}

bool SpeculativeExecutor::has_outstanding(ConstructId id) const {
    auto it = trackers_.find(id);
    return it != trackers_.end() && it->second.outstanding.has_value();
}

bool SpeculativeExecutor::has_loop(ConstructId id) const {
    auto it = trackers_.find(id);
    return it != trackers_.end() && it->second.loop.has_value();
}

}  // namespace servo
