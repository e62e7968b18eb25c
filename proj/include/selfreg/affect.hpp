#pragma once
// Affect as a progress meta-monitor.
//
// Valence tracks whether a goal's discrepancy is shrinking faster or slower
// than expected. The expectation (v_ref) drifts toward observed velocity, so
// chronic conditions renormalize to neutral affect.

#include "selfreg/feedback_loop.hpp"
#include "selfreg/goal_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>

namespace selfreg {

struct ProgressCriteria {
    GoalId goal_id;
    double v_ref = 0.0;
    double deadzone = 0.1;
    double novelty = 0.0;

    bool operator==(const ProgressCriteria&) const = default;
};

struct AffectSignal {
    GoalId goal_id;
    double valence = 0.0;
    double arousal = 0.0;
    std::int64_t tick = 0;

    bool operator==(const AffectSignal&) const = default;
};

// Valence stays strictly inside (-1, 1).
inline constexpr double kValenceBound = 1.0 - 1e-9;

inline double widened_deadzone(double novelty, const EngineParams& p) {
    return p.deadzone * (1.0 + p.novelty_widen * novelty);
}

inline ProgressCriteria make_criteria(const GoalId& id, const EngineParams& p) {
    ProgressCriteria c;
    c.goal_id = id;
    c.deadzone = widened_deadzone(0.0, p);
    return c;
}

// Target valence before smoothing.
inline double target_valence(double velocity, const ProgressCriteria& crit, const EngineParams& p) {
    double e = velocity - crit.v_ref;
    if (std::abs(e) <= crit.deadzone) return 0.0;
    return std::tanh(p.k_affect * e);
}

// `pulse` is the intrinsic reward increment for this goal this tick; it is
// added before the decay toward the target.
inline AffectSignal affect_update(const LoopState& loop, const ProgressCriteria& crit, const GoalNode& goal,
                                  const AffectSignal& prev, const EngineParams& p, double pulse = 0.0,
                                  std::int64_t tick = 0) {
    double target = target_valence(loop.velocity, crit, p);
    double base = std::clamp(prev.valence + pulse, -kValenceBound, kValenceBound);
    AffectSignal next;
    next.goal_id = goal.id;
    next.valence = std::clamp(base + (target - base) / goal.affect_decay, -kValenceBound, kValenceBound);
    next.arousal = std::abs(target);
    next.tick = tick;
    return next;
}

// novelty_reset: a never-before-executed means serving this goal ran this tick.
inline ProgressCriteria recalibrate(const ProgressCriteria& crit, double observed_velocity, const EngineParams& p,
                                    bool novelty_reset = false) {
    ProgressCriteria next = crit;
    next.v_ref = crit.v_ref + p.eta * (observed_velocity - crit.v_ref);
    next.novelty = novelty_reset ? 1.0 : crit.novelty * p.novelty_decay;
    next.deadzone = widened_deadzone(next.novelty, p);
    return next;
}

// Small positive valence for every goal that progressed, propagated up its
// lineage with geometric attenuation. Increments from siblings add up.
inline std::map<GoalId, double> intrinsic_pulse(const std::set<GoalId>& progressed, const GoalHierarchy& h,
                                                const EngineParams& p) {
    std::map<GoalId, double> out;
    for (const auto& id : progressed) {
        double amount = p.pulse;
        for (const auto& anc : h.lineage(id)) {
            out[anc] += amount;
            amount *= p.pulse_attenuation;
        }
    }
    return out;
}

inline double priority_mult(const AffectSignal& a, const EngineParams& p) {
    return std::max(0.1, 1.0 + p.beta_priority * a.valence);
}

}  // namespace selfreg
