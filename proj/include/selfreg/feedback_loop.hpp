#pragma once
// Per-goal feedback loop: perceive, compare against the reference, and track
// how fast the discrepancy is shrinking.

#include "selfreg/errors.hpp"
#include "selfreg/goal_model.hpp"

#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <string>

namespace selfreg {

// One scalar channel per goal id.
using Observation = std::map<GoalId, double>;

struct LoopSample {
    std::int64_t tick = 0;
    double discrepancy = 0.0;
    bool operator==(const LoopSample&) const = default;
};

struct LoopState {
    GoalId goal_id;
    double current = 0.0;
    double discrepancy = 0.0;
    double velocity = 0.0;  // positive = discrepancy shrinking
    std::deque<LoopSample> history;
    std::size_t window = 8;

    bool operator==(const LoopState&) const = default;
};

inline LoopState make_loop(const GoalId& id, std::size_t window) {
    LoopState s;
    s.goal_id = id;
    s.window = window;
    return s;
}

inline double perceive(const Observation& obs, const GoalNode& goal) {
    auto it = obs.find(goal.id);
    if (it == obs.end()) throw LookupError("unobservable goal '" + goal.id + "'");
    return it->second;
}

// Approach goals want current >= reference; avoidance goals want to stay at
// least avoidance_margin away from the reference.
inline double compare(double current, const GoalNode& goal) {
    if (goal.polarity == Polarity::approach) return std::max(0.0, goal.reference - current);
    return std::max(0.0, goal.avoidance_margin - std::abs(current - goal.reference));
}

inline LoopState update_loop(const LoopState& state, const Observation& obs, const GoalNode& goal,
                             std::int64_t tick) {
    if (!state.history.empty() && tick <= state.history.back().tick)
        throw LookupError("nonmonotonic tick " + std::to_string(tick) + " for goal '" + goal.id + "'");
    LoopState next = state;
    next.goal_id = goal.id;
    next.current = perceive(obs, goal);
    next.discrepancy = compare(next.current, goal);
    next.history.push_back({tick, next.discrepancy});
    while (next.history.size() > next.window) next.history.pop_front();
    if (next.history.size() < 2) {
        next.velocity = 0.0;
    } else {
        const auto& oldest = next.history.front();
        const auto& newest = next.history.back();
        next.velocity = (oldest.discrepancy - newest.discrepancy) / static_cast<double>(newest.tick - oldest.tick);
    }
    return next;
}

}  // namespace selfreg
