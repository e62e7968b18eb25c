#pragma once
// Motivation and action selection.
//
// Each means gets a temporal-motivation utility per served goal
//
//     u = E * V_eff * c * d_norm / (1 + gamma * D)      (times -lambda_loss on a loss)
//
// summed over the goals it serves. The top-k means form a shortlist, and
// selection applies the shield: competitors of the pursued means are scaled
// by (1 - sigma_eff) and must beat the pursued utility plus a hysteresis
// margin. A collapsed shield forces a switch.

#include "selfreg/errors.hpp"
#include "selfreg/feedback_loop.hpp"
#include "selfreg/goal_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace selfreg {

using MeansId = std::string;

struct Means {
    MeansId id;
    std::map<GoalId, double> serves;       // contribution c in (0, 1]
    double delay = 0.0;                    // ticks until effects land
    double cost = 0.0;                     // resource units per execution
    bool blocked = false;
    std::map<GoalId, double> expectancy;   // learned success probability
    std::set<GoalId> losses;               // served goals the means sets back

    bool operator==(const Means&) const = default;
};

inline std::vector<std::string> check_means(const Means& m) {
    std::vector<std::string> v;
    const std::string where = "means '" + m.id + "'";
    if (m.id.empty()) v.push_back("means with empty id");
    if (m.serves.empty()) v.push_back(where + ": serves must be nonempty");
    for (const auto& [g, c] : m.serves)
        if (!(c > 0 && c <= 1)) v.push_back(where + ": contribution for '" + g + "' must be in (0, 1]");
    for (const auto& [g, e] : m.expectancy) {
        if (!(e >= 0 && e <= 1)) v.push_back(where + ": expectancy for '" + g + "' must be in [0, 1]");
        if (!m.serves.count(g)) v.push_back(where + ": expectancy for unserved goal '" + g + "'");
    }
    for (const auto& g : m.losses)
        if (!m.serves.count(g)) v.push_back(where + ": loss declared for unserved goal '" + g + "'");
    if (!(m.delay >= 0)) v.push_back(where + ": delay must be nonnegative");
    if (!(m.cost >= 0)) v.push_back(where + ": cost must be nonnegative");
    return v;
}

// ---------------------------------------------------------------------------
// Utility
// ---------------------------------------------------------------------------

struct TmtInputs {
    double expectancy = 0.0;
    double value = 0.0;  // V_eff
    double contribution = 1.0;
    double discrepancy = 0.0;  // normalized
    double delay = 0.0;
    bool loss = false;
};

inline double tmt_value(const TmtInputs& in, const EngineParams& p) {
    double magnitude = in.expectancy * in.value * in.contribution * in.discrepancy / (1.0 + p.gamma * in.delay);
    return in.loss ? -p.lambda_loss * magnitude : magnitude;
}

inline double normalized_discrepancy(const LoopState& loop, const GoalNode& goal) {
    return loop.discrepancy / std::max(std::abs(goal.reference), 1.0);
}

// Means effects push a goal's channel upward. For an avoidance goal sitting
// below its avoided reference that is a move toward it, hence a loss.
inline bool anticipated_loss(const GoalNode& goal, const LoopState& loop, const Means& m) {
    if (m.losses.count(goal.id)) return true;
    return goal.polarity == Polarity::avoidance && loop.current < goal.reference;
}

inline double expectancy_of(const Means& m, const GoalId& g) {
    auto it = m.expectancy.find(g);
    if (it == m.expectancy.end()) throw LookupError("means '" + m.id + "' has no expectancy for '" + g + "'");
    return it->second;
}

inline double tmt_utility(const GoalNode& goal, const LoopState& loop, const Means& m, double affect_mult,
                          const EngineParams& p) {
    auto it = m.serves.find(goal.id);
    if (it == m.serves.end()) throw LookupError("means '" + m.id + "' does not serve goal '" + goal.id + "'");
    TmtInputs in;
    in.expectancy = expectancy_of(m, goal.id);
    in.value = goal.base_value * goal.importance * affect_mult;
    in.contribution = it->second;
    in.discrepancy = normalized_discrepancy(loop, goal);
    in.delay = m.delay;
    in.loss = anticipated_loss(goal, loop, m);
    return tmt_value(in, p);
}

// Utility the means would have for the goal at full normalized discrepancy.
// Abandonment judges this, so a goal that is merely close to satisfied is not
// mistaken for a hopeless one.
inline double prospect_utility(const GoalNode& goal, const Means& m, double affect_mult, const EngineParams& p) {
    auto it = m.serves.find(goal.id);
    if (it == m.serves.end()) throw LookupError("means '" + m.id + "' does not serve goal '" + goal.id + "'");
    TmtInputs in;
    in.expectancy = expectancy_of(m, goal.id);
    in.value = goal.base_value * goal.importance * affect_mult;
    in.contribution = it->second;
    in.discrepancy = 1.0;
    in.delay = m.delay;
    return tmt_value(in, p);
}

// ---------------------------------------------------------------------------
// Motivation table
// ---------------------------------------------------------------------------

struct MotivationRow {
    MeansId means_id;
    std::map<GoalId, double> per_goal;
    double total = 0.0;

    bool operator==(const MotivationRow&) const = default;
};

struct MotivationTable {
    std::vector<MotivationRow> rows;  // ascending means id
    std::int64_t tick = 0;

    const MotivationRow* find(const MeansId& id) const {
        for (const auto& r : rows)
            if (r.means_id == id) return &r;
        return nullptr;
    }
    double total(const MeansId& id) const {
        const auto* r = find(id);
        return r ? r->total : 0.0;
    }
};

// What aggregate needs to know about the goals in scope.
struct GoalScope {
    const GoalHierarchy* hierarchy = nullptr;
    const std::map<GoalId, LoopState>* loops = nullptr;
    const std::map<GoalId, double>* affect_mult = nullptr;  // missing entries count as 1
    const std::set<GoalId>* inactive = nullptr;             // goals on cooldown contribute 0
};

inline MotivationRow aggregate(const Means& m, const GoalScope& scope, const EngineParams& p) {
    MotivationRow row;
    row.means_id = m.id;
    for (const auto& [g, _] : m.serves) {
        double u = 0.0;
        if (!m.blocked && !(scope.inactive && scope.inactive->count(g))) {
            auto lit = scope.loops->find(g);
            if (lit == scope.loops->end()) throw LookupError("no loop state for goal '" + g + "'");
            double mult = 1.0;
            if (scope.affect_mult) {
                auto ait = scope.affect_mult->find(g);
                if (ait != scope.affect_mult->end()) mult = ait->second;
            }
            u = tmt_utility(scope.hierarchy->node(g), lit->second, m, mult, p);
        }
        row.per_goal[g] = u;
    }
    // Summed separately so U is exactly the sum of the stored row entries.
    for (const auto& [_, u] : row.per_goal) row.total += u;
    if (m.blocked) row.total = 0.0;
    return row;
}

inline MotivationTable build_table(const std::vector<Means>& means, const GoalScope& scope, const EngineParams& p,
                                   std::int64_t tick) {
    MotivationTable t;
    t.tick = tick;
    for (const auto& m : means) t.rows.push_back(aggregate(m, scope, p));
    std::sort(t.rows.begin(), t.rows.end(),
              [](const MotivationRow& a, const MotivationRow& b) { return a.means_id < b.means_id; });
    return t;
}

// Top prune_k means with positive utility, ties by ascending id.
inline std::vector<MeansId> prune(const MotivationTable& t, const EngineParams& p) {
    std::vector<const MotivationRow*> pos;
    for (const auto& r : t.rows)
        if (r.total > 0) pos.push_back(&r);
    std::sort(pos.begin(), pos.end(), [](const MotivationRow* a, const MotivationRow* b) {
        if (a->total != b->total) return a->total > b->total;
        return a->means_id < b->means_id;
    });
    std::vector<MeansId> out;
    for (std::size_t i = 0; i < pos.size() && static_cast<int>(i) < p.prune_k; ++i) out.push_back(pos[i]->means_id);
    return out;
}

// ---------------------------------------------------------------------------
// Selection
// ---------------------------------------------------------------------------

struct Candidate {
    MeansId id;
    double utility = 0.0;
    double cost = 0.0;
    bool blocked = false;
};

enum class SelectionKind { continue_, switch_, idle };

enum class SelectionReason {
    uncontested,        // continue: no competitor on the shortlist
    shielded_inferior,  // continue: best shielded competitor <= pursued utility
    hysteresis,         // continue: competitor ahead, but within the margin
    outranked,          // switch: shielded competitor cleared the bar, or nothing was pursued
    forced_switch,      // switch: shield collapsed
    no_viable_means,    // idle
};

inline const char* to_string(SelectionKind k) {
    switch (k) {
        case SelectionKind::continue_: return "continue";
        case SelectionKind::switch_: return "switch";
        case SelectionKind::idle: return "idle";
    }
    return "?";
}

inline const char* to_string(SelectionReason r) {
    switch (r) {
        case SelectionReason::uncontested: return "uncontested";
        case SelectionReason::shielded_inferior: return "shielded-inferior";
        case SelectionReason::hysteresis: return "hysteresis";
        case SelectionReason::outranked: return "outranked";
        case SelectionReason::forced_switch: return "forced-switch";
        case SelectionReason::no_viable_means: return "no-viable-means";
    }
    return "?";
}

struct Selection {
    SelectionKind kind = SelectionKind::idle;
    std::optional<MeansId> means_id;  // pursued means after this tick
    SelectionReason reason = SelectionReason::no_viable_means;
    int competitors = 0;  // feasible shortlisted means other than the pursued one
    int suppressed = 0;   // competitors held back by the shield this tick

    bool operator==(const Selection&) const = default;
};

// Share of the competitor field the shield held back; fatigue input.
inline double suppression_load(const Selection& s) {
    if (s.competitors == 0) return 0.0;
    return std::min(1.0, static_cast<double>(s.suppressed) / s.competitors);
}

inline bool feasible(const Candidate& c, double resource) { return !c.blocked && c.cost <= resource; }

inline Selection select(const std::vector<Candidate>& shortlist, const std::optional<MeansId>& current,
                        double sigma_eff, double resource, const EngineParams& p) {
    std::vector<const Candidate*> viable;
    for (const auto& c : shortlist)
        if (feasible(c, resource)) viable.push_back(&c);
    // Highest key first, ascending id on ties.
    auto best_by = [&](auto key, const Candidate* skip) -> const Candidate* {
        const Candidate* best = nullptr;
        for (const auto* c : viable) {
            if (c == skip) continue;
            if (!best || key(*c) > key(*best) || (key(*c) == key(*best) && c->id < best->id)) best = c;
        }
        return best;
    };
    auto raw = [](const Candidate& c) { return c.utility; };

    Selection out;
    if (viable.empty()) return out;

    const Candidate* pursued = nullptr;
    if (current)
        for (const auto* c : viable)
            if (c->id == *current) pursued = c;

    if (!pursued) {
        out.kind = SelectionKind::switch_;
        out.means_id = best_by(raw, nullptr)->id;
        out.reason = SelectionReason::outranked;
        out.competitors = static_cast<int>(viable.size()) - 1;
        return out;
    }

    out.competitors = static_cast<int>(viable.size()) - 1;
    if (out.competitors == 0) {
        out.kind = SelectionKind::continue_;
        out.means_id = pursued->id;
        out.reason = SelectionReason::uncontested;
        return out;
    }

    if (sigma_eff <= p.sigma_crit) {
        out.kind = SelectionKind::switch_;
        out.means_id = best_by(raw, pursued)->id;
        out.reason = SelectionReason::forced_switch;
        return out;
    }

    auto shielded = [&](const Candidate& c) { return c.utility * (1.0 - sigma_eff); };
    const Candidate* rival = best_by(shielded, pursued);
    const double bar = pursued->utility + p.hysteresis;
    if (shielded(*rival) > bar) {
        out.kind = SelectionKind::switch_;
        out.means_id = rival->id;
        out.reason = SelectionReason::outranked;
        return out;
    }
    out.kind = SelectionKind::continue_;
    out.means_id = pursued->id;
    out.reason = shielded(*rival) > pursued->utility ? SelectionReason::hysteresis : SelectionReason::shielded_inferior;
    out.suppressed = out.competitors;
    return out;
}

// ---------------------------------------------------------------------------
// Learning, equifinality, abandonment
// ---------------------------------------------------------------------------

inline Means update_expectancy(const Means& m, const GoalId& g, bool success, const EngineParams& p) {
    if (!m.serves.count(g)) throw LookupError("means '" + m.id + "' does not serve goal '" + g + "'");
    Means next = m;
    double& e = next.expectancy[g];
    e = (1.0 - p.ema_alpha) * e + p.ema_alpha * (success ? 1.0 : 0.0);
    return next;
}

// Unblocked means that advance `goal`, best aggregate utility first.
// A means that sets the goal back is not a path to it.
inline std::vector<MeansId> equifinal_alternatives(const GoalId& goal, const std::vector<Means>& all,
                                                   const MotivationTable& table) {
    std::vector<std::pair<double, MeansId>> alts;
    for (const auto& m : all) {
        if (m.blocked || !m.serves.count(goal) || m.losses.count(goal)) continue;
        alts.emplace_back(table.total(m.id), m.id);
    }
    std::sort(alts.begin(), alts.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::vector<MeansId> out;
    for (auto& [_, id] : alts) out.push_back(std::move(id));
    return out;
}

enum class AbandonVerdict { keep, abandon };

inline AbandonVerdict abandonment_check(const std::vector<double>& alternative_utilities, double threshold) {
    if (alternative_utilities.empty()) return AbandonVerdict::abandon;
    double best = *std::max_element(alternative_utilities.begin(), alternative_utilities.end());
    return best < threshold ? AbandonVerdict::abandon : AbandonVerdict::keep;
}

}  // namespace selfreg
