#pragma once
// Goal shielding with fatigue. A single global shield strength suppresses
// competitors of the pursued means, wears down while it is doing so, and
// recovers while nothing needs suppressing.

#include "selfreg/goal_model.hpp"

#include <algorithm>

namespace selfreg {

struct ShieldFatigueState {
    double sigma = 1.0;
    double override_boost = 0.0;
    int override_ticks_left = 0;
    bool suppressing = false;

    bool operator==(const ShieldFatigueState&) const = default;
};

inline ShieldFatigueState initial_shield(const EngineParams& p) {
    ShieldFatigueState s;
    s.sigma = p.sigma_max;
    return s;
}

inline double effective_sigma(const ShieldFatigueState& s, const EngineParams& p) {
    double boosted = s.override_ticks_left > 0 ? s.sigma + s.override_boost : s.sigma;
    return std::min(p.sigma_max, boosted);
}

namespace detail {
// Repeated subtraction of delta_dep drifts by a few ulps; snap to the bound.
inline constexpr double kSigmaSnap = 1e-9;
}

inline ShieldFatigueState fatigue_step(const ShieldFatigueState& s, double load, const EngineParams& p) {
    ShieldFatigueState next = s;
    load = std::clamp(load, 0.0, 1.0);
    next.suppressing = load > 0;
    if (load > 0) {
        next.sigma = s.sigma - p.delta_dep * load;
        if (next.sigma - p.sigma_min < detail::kSigmaSnap) next.sigma = p.sigma_min;
    } else {
        next.sigma = s.sigma + p.delta_rec;
        if (p.sigma_max - next.sigma < detail::kSigmaSnap) next.sigma = p.sigma_max;
    }
    next.sigma = std::clamp(next.sigma, p.sigma_min, p.sigma_max);
    if (next.override_ticks_left > 0) {
        --next.override_ticks_left;
        if (next.override_ticks_left == 0) next.override_boost = 0.0;
    }
    return next;
}

// Temporarily raise the shield on a reward or an important goal.
inline ShieldFatigueState grant_override(const ShieldFatigueState& s, double reward_salience, double importance,
                                         const EngineParams& p) {
    ShieldFatigueState next = s;
    double boost = std::min(p.override_cap, reward_salience * importance * p.override_gain);
    if (boost <= 0) return next;
    next.override_boost = boost;
    next.override_ticks_left = p.override_duration;
    return next;
}

}  // namespace selfreg
