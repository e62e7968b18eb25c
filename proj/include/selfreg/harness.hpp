#pragma once
// Episode driver. Each tick runs
//
//   observe -> update loops -> affect (+ intrinsic pulses) -> reactivate
//   -> motivation table -> abandonment -> prune -> shielded select
//   -> act -> learn expectancies -> fatigue -> recalibrate -> world tick
//
// and appends one TraceEvent. Everything is deterministic given
// (scenario, seed).

#include "selfreg/affect.hpp"
#include "selfreg/arbitration.hpp"
#include "selfreg/errors.hpp"
#include "selfreg/feedback_loop.hpp"
#include "selfreg/goal_model.hpp"
#include "selfreg/regulation_dynamics.hpp"
#include "selfreg/world_sim.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace selfreg {

using ordered_json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Trace
// ---------------------------------------------------------------------------

struct RootSnapshot {
    double discrepancy = 0.0;
    double velocity = 0.0;
    double valence = 0.0;
    double reservoir = 0.0;

    bool operator==(const RootSnapshot&) const = default;
};

struct TraceEvent {
    std::int64_t tick = 0;
    std::optional<MeansId> selected_means;      // none = idle
    std::optional<GoalId> pursued_root_need;    // none = idle
    std::map<GoalId, RootSnapshot> roots;
    double sigma = 0.0;
    double sigma_eff = 0.0;
    bool override_active = false;
    double override_boost = 0.0;
    int override_ticks_left = 0;
    std::string selection;  // continue | switch | idle
    std::string reason;
    std::optional<MeansId> switch_from;
    std::optional<MeansId> switch_to;
    bool forced_switch = false;
    std::vector<GoalId> abandonments;
    std::vector<GoalId> reactivations;
    double resource = 0.0;
    std::map<MeansId, double> motivation;  // aggregate U per means

    bool operator==(const TraceEvent&) const = default;
};

struct Trace {
    std::vector<TraceEvent> events;
};

namespace detail {
template <class T>
ordered_json opt_json(const std::optional<T>& v) {
    return v ? ordered_json(*v) : ordered_json(nullptr);
}
template <class T>
std::optional<T> json_opt(const ordered_json& j) {
    if (j.is_null()) return std::nullopt;
    return j.get<T>();
}
}  // namespace detail

inline ordered_json trace_event_to_json(const TraceEvent& e) {
    ordered_json j;
    j["tick"] = e.tick;
    j["selected_means"] = detail::opt_json(e.selected_means);
    j["pursued_root_need"] = detail::opt_json(e.pursued_root_need);
    ordered_json roots = ordered_json::object();
    for (const auto& [id, r] : e.roots)
        roots[id] = {{"discrepancy", r.discrepancy}, {"velocity", r.velocity}, {"valence", r.valence},
                     {"reservoir", r.reservoir}};
    j["roots"] = std::move(roots);
    j["sigma"] = e.sigma;
    j["sigma_eff"] = e.sigma_eff;
    j["override_active"] = e.override_active;
    j["override_boost"] = e.override_boost;
    j["override_ticks_left"] = e.override_ticks_left;
    j["selection"] = e.selection;
    j["reason"] = e.reason;
    if (e.switch_to)
        j["switch"] = {{"from", detail::opt_json(e.switch_from)}, {"to", *e.switch_to}};
    else
        j["switch"] = nullptr;
    j["forced_switch"] = e.forced_switch;
    j["abandonments"] = e.abandonments;
    j["reactivations"] = e.reactivations;
    j["resource"] = e.resource;
    ordered_json mot = ordered_json::object();
    for (const auto& [id, u] : e.motivation) mot[id] = u;
    j["motivation"] = std::move(mot);
    return j;
}

inline TraceEvent trace_event_from_json(const ordered_json& j) {
    TraceEvent e;
    e.tick = j.at("tick").get<std::int64_t>();
    e.selected_means = detail::json_opt<std::string>(j.at("selected_means"));
    e.pursued_root_need = detail::json_opt<std::string>(j.at("pursued_root_need"));
    for (const auto& [id, r] : j.at("roots").items())
        e.roots[id] = {r.at("discrepancy").get<double>(), r.at("velocity").get<double>(),
                       r.at("valence").get<double>(), r.at("reservoir").get<double>()};
    e.sigma = j.at("sigma").get<double>();
    e.sigma_eff = j.at("sigma_eff").get<double>();
    e.override_active = j.at("override_active").get<bool>();
    e.override_boost = j.at("override_boost").get<double>();
    e.override_ticks_left = j.at("override_ticks_left").get<int>();
    e.selection = j.at("selection").get<std::string>();
    e.reason = j.at("reason").get<std::string>();
    const auto& sw = j.at("switch");
    if (!sw.is_null()) {
        e.switch_from = detail::json_opt<std::string>(sw.at("from"));
        e.switch_to = sw.at("to").get<std::string>();
    }
    e.forced_switch = j.at("forced_switch").get<bool>();
    e.abandonments = j.at("abandonments").get<std::vector<std::string>>();
    e.reactivations = j.at("reactivations").get<std::vector<std::string>>();
    e.resource = j.at("resource").get<double>();
    for (const auto& [id, u] : j.at("motivation").items()) e.motivation[id] = u.get<double>();
    return e;
}

// One JSON object per line.
inline std::string trace_to_jsonl(const Trace& t) {
    std::string out;
    for (const auto& e : t.events) {
        out += trace_event_to_json(e).dump();
        out += '\n';
    }
    return out;
}

inline Trace trace_from_jsonl(const std::string& text) {
    Trace t;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            t.events.push_back(trace_event_from_json(ordered_json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("malformed trace record: ") + e.what());
        }
    }
    return t;
}

// ---------------------------------------------------------------------------
// Agent state and the per-tick pipeline
// ---------------------------------------------------------------------------

struct AgentState {
    GoalHierarchy hierarchy;
    std::vector<Means> means;  // ascending id; the agent's view (learned expectancies)
    std::map<GoalId, LoopState> loops;
    std::map<GoalId, ProgressCriteria> criteria;
    std::map<GoalId, AffectSignal> affect;
    ShieldFatigueState shield;
    std::optional<MeansId> pursued;
    std::set<MeansId> executed;
    std::map<GoalId, std::int64_t> cooldown_until;
};

// Goal a means mostly works for: highest contribution, then lowest root id,
// then lowest goal id.
inline GoalId primary_goal(const Means& m, const GoalHierarchy& h) {
    const GoalId* best = nullptr;
    double best_c = -1.0;
    for (const auto& [g, c] : m.serves) {
        if (!best || c > best_c || (c == best_c && h.root_of(g) < h.root_of(*best))) {
            best = &g;
            best_c = c;
        }
    }
    if (!best) throw InvariantViolation("means '" + m.id + "' serves no goal");
    return *best;
}

inline AgentState init_agent(const Scenario& s) {
    const auto& p = s.params;
    AgentState a{s.goals, {}, {}, {}, {}, initial_shield(p), std::nullopt, {}, {}};
    for (const auto& sm : s.means) a.means.push_back(sm.means);
    std::sort(a.means.begin(), a.means.end(), [](const Means& x, const Means& y) { return x.id < y.id; });
    for (const auto& [id, _] : s.goals.nodes()) {
        a.loops.emplace(id, make_loop(id, static_cast<std::size_t>(p.window)));
        a.criteria.emplace(id, make_criteria(id, p));
        a.affect.emplace(id, AffectSignal{id, 0.0, 0.0, 0});
    }
    return a;
}

namespace detail {

inline double nearest_rank(std::vector<double> xs, double q) {
    std::sort(xs.begin(), xs.end());
    auto idx = static_cast<std::size_t>(std::ceil(q * static_cast<double>(xs.size())));
    idx = std::clamp<std::size_t>(idx, 1, xs.size()) - 1;
    return xs[idx];
}

inline const Means* find_means(const AgentState& a, const MeansId& id) {
    for (const auto& m : a.means)
        if (m.id == id) return &m;
    return nullptr;
}

inline double pursued_importance(const AgentState& a) {
    if (!a.pursued) return 1.0;
    const Means* m = find_means(a, *a.pursued);
    return m ? a.hierarchy.node(primary_goal(*m, a.hierarchy)).importance : 1.0;
}

inline void apply_agent_events(AgentState& a, const std::vector<ScriptedEvent>& fired, const EngineParams& p) {
    for (const auto& e : fired) {
        if (e.type == EventType::reward)
            a.shield = grant_override(a.shield, e.amount, pursued_importance(a), p);
        else if (e.type == EventType::set_value)
            a.hierarchy = a.hierarchy.with_base_value(e.target, e.amount);
    }
}

inline void require(bool ok, const std::string& what) {
    if (!ok) throw InvariantViolation(what);
}

}  // namespace detail

// Runs `steps` ticks (scenario horizon when not given).
inline Trace run_episode(const Scenario& s, std::uint64_t seed, std::optional<std::int64_t> steps = std::nullopt) {
    const EngineParams& p = s.params;
    const std::int64_t horizon = steps.value_or(s.horizon);
    if (horizon < 1) throw ValidationError({"steps must be at least 1"});

    WorldState world = init_world(s, seed);
    AgentState a = init_agent(s);
    detail::apply_agent_events(a, world.fired, p);

    // Goals some means can advance; only those are ever judged for abandonment.
    std::set<GoalId> served;
    for (const auto& m : a.means)
        for (const auto& [g, _] : m.serves)
            if (!m.losses.count(g)) served.insert(g);

    std::vector<double> importances;
    for (const auto& [_, n] : s.goals.nodes()) importances.push_back(n.importance);
    const double override_bar = detail::nearest_rank(importances, p.override_percentile);

    Trace trace;
    trace.events.reserve(static_cast<std::size_t>(horizon));
    for (std::int64_t t = 0; t < horizon; ++t) {
        detail::require(world.tick == t, "world tick out of step");
        const GoalHierarchy& h = a.hierarchy;
        TraceEvent ev;
        ev.tick = t;

        for (auto& m : a.means) m.blocked = world.blocked.count(m.id) != 0;
        const Observation obs = observe(world, s, h);

        std::set<GoalId> progressed;
        for (auto& [g, loop] : a.loops) {
            const bool had = !loop.history.empty();
            const double before = loop.discrepancy;
            loop = update_loop(loop, obs, h.node(g), t);
            detail::require(loop.discrepancy >= 0, "negative discrepancy for '" + g + "'");
            if (had && loop.discrepancy < before) progressed.insert(g);
        }

        const auto pulses = intrinsic_pulse(progressed, h, p);
        std::map<GoalId, double> mult;
        for (auto& [g, aff] : a.affect) {
            auto pit = pulses.find(g);
            aff = affect_update(a.loops.at(g), a.criteria.at(g), h.node(g), aff, p,
                                pit == pulses.end() ? 0.0 : pit->second, t);
            detail::require(aff.valence > -1 && aff.valence < 1, "valence left (-1, 1) for '" + g + "'");
            mult[g] = priority_mult(aff, p);
        }

        for (auto it = a.cooldown_until.begin(); it != a.cooldown_until.end();) {
            if (it->second <= t) {
                ev.reactivations.push_back(it->first);
                it = a.cooldown_until.erase(it);
            } else {
                ++it;
            }
        }

        std::set<GoalId> inactive;
        for (const auto& [g, _] : a.cooldown_until) inactive.insert(g);
        GoalScope scope{&h, &a.loops, &mult, &inactive};
        MotivationTable table = build_table(a.means, scope, p, t);

        for (const auto& g : served) {
            if (inactive.count(g) || !(a.loops.at(g).discrepancy > 0)) continue;
            const GoalNode& node = h.node(g);
            std::vector<double> prospects;
            for (const auto& id : equifinal_alternatives(g, a.means, table))
                prospects.push_back(prospect_utility(node, *detail::find_means(a, id), mult.at(g), p));
            if (abandonment_check(prospects, abandonment_threshold(node, p)) == AbandonVerdict::abandon) {
                a.cooldown_until[g] = t + p.cooldown;
                ev.abandonments.push_back(g);
            }
        }
        if (!ev.abandonments.empty()) {
            for (const auto& g : ev.abandonments) inactive.insert(g);
            table = build_table(a.means, scope, p, t);
        }

        std::vector<Candidate> shortlist;
        for (const auto& id : prune(table, p)) {
            const Means* m = detail::find_means(a, id);
            shortlist.push_back({id, table.total(id), m->cost, m->blocked});
        }

        if (p.override_percentile < 1.0 && a.pursued && a.shield.override_ticks_left == 0 &&
            detail::pursued_importance(a) > override_bar)
            a.shield = grant_override(a.shield, 1.0, detail::pursued_importance(a), p);

        const double sigma_eff = effective_sigma(a.shield, p);
        const Selection sel = select(shortlist, a.pursued, sigma_eff, world.resource, p);

        std::set<GoalId> novel;
        if (sel.means_id) {
            const MeansId id = *sel.means_id;
            auto result = apply_action(world, s, id);
            world = std::move(result.world);
            auto mit = std::find_if(a.means.begin(), a.means.end(), [&](const Means& m) { return m.id == id; });
            detail::require(mit != a.means.end(), "selected unknown means '" + id + "'");
            if (a.executed.insert(id).second)
                for (const auto& [g, _] : mit->serves) novel.insert(g);
            for (const auto& o : result.outcomes) *mit = update_expectancy(*mit, o.goal_id, o.success, p);
            ev.selected_means = id;
            ev.pursued_root_need = h.root_of(primary_goal(*mit, h));
        }
        if (sel.kind == SelectionKind::switch_) {
            ev.switch_from = a.pursued;
            ev.switch_to = sel.means_id;
            ev.forced_switch = sel.reason == SelectionReason::forced_switch;
        }
        a.pursued = sel.means_id;

        a.shield = fatigue_step(a.shield, suppression_load(sel), p);
        detail::require(a.shield.sigma >= p.sigma_min && a.shield.sigma <= p.sigma_max, "sigma left its bounds");

        for (auto& [g, crit] : a.criteria) crit = recalibrate(crit, a.loops.at(g).velocity, p, novel.count(g) != 0);

        ev.selection = to_string(sel.kind);
        ev.reason = to_string(sel.reason);
        ev.sigma = a.shield.sigma;
        ev.sigma_eff = sigma_eff;
        ev.override_active = a.shield.override_ticks_left > 0;
        ev.override_boost = a.shield.override_boost;
        ev.override_ticks_left = a.shield.override_ticks_left;
        ev.resource = world.resource;
        for (const auto& r : table.rows) ev.motivation[r.means_id] = r.total;
        for (const auto& root : h.roots()) {
            const auto& loop = a.loops.at(root);
            ev.roots[root] = {loop.discrepancy, loop.velocity, a.affect.at(root).valence, obs.at(root)};
        }

        world = tick(world, s);
        for (const auto& [g, v] : world.reservoirs)
            detail::require(v >= 0 && v <= s.world.cap, "reservoir '" + g + "' left [0, cap]");
        detail::apply_agent_events(a, world.fired, p);

        trace.events.push_back(std::move(ev));
    }
    return trace;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

struct Metrics {
    double monomania_index = 0.0;
    double allocation_entropy = 0.0;
    std::int64_t switch_count = 0;
    std::int64_t forced_switch_count = 0;
    double need_floor = 0.0;
    double mean_abs_valence = 0.0;
    std::int64_t abandonment_count = 0;
    double idle_fraction = 0.0;
    std::map<GoalId, std::int64_t> root_ticks;  // ticks attributed per root need

    bool operator==(const Metrics&) const = default;
};

// Shares are taken over attributed (non-idle) ticks; entropy is normalized
// by log(R) over all R root needs in the trace.
inline Metrics compute_metrics(const Trace& trace) {
    if (trace.events.empty()) throw LookupError("cannot compute metrics of an empty trace");
    Metrics m;
    for (const auto& [root, _] : trace.events.front().roots) m.root_ticks[root] = 0;
    const auto n = static_cast<double>(trace.events.size());
    std::int64_t idle = 0, attributed = 0;
    double floor = std::numeric_limits<double>::infinity();
    double abs_valence = 0.0;
    std::size_t valence_samples = 0;
    for (const auto& e : trace.events) {
        if (e.pursued_root_need) {
            ++m.root_ticks[*e.pursued_root_need];
            ++attributed;
        } else {
            ++idle;
        }
        if (e.switch_to) ++m.switch_count;
        if (e.forced_switch) ++m.forced_switch_count;
        m.abandonment_count += static_cast<std::int64_t>(e.abandonments.size());
        for (const auto& [_, r] : e.roots) {
            floor = std::min(floor, r.reservoir);
            abs_valence += std::abs(r.valence);
            ++valence_samples;
        }
    }
    m.idle_fraction = static_cast<double>(idle) / n;
    m.need_floor = std::isfinite(floor) ? floor : 0.0;
    m.mean_abs_valence = valence_samples ? abs_valence / static_cast<double>(valence_samples) : 0.0;
    if (attributed > 0) {
        double h = 0.0;
        std::int64_t top = 0;
        for (const auto& [_, k] : m.root_ticks) {
            top = std::max(top, k);
            if (k == 0) continue;
            double share = static_cast<double>(k) / static_cast<double>(attributed);
            h -= share * std::log(share);
        }
        m.monomania_index = static_cast<double>(top) / static_cast<double>(attributed);
        const auto r = m.root_ticks.size();
        m.allocation_entropy = r > 1 ? std::clamp(h / std::log(static_cast<double>(r)), 0.0, 1.0) : 0.0;
    }
    return m;
}

inline ordered_json metrics_to_json(const Metrics& m) {
    ordered_json j;
    j["monomania_index"] = m.monomania_index;
    j["allocation_entropy"] = m.allocation_entropy;
    j["switch_count"] = m.switch_count;
    j["forced_switch_count"] = m.forced_switch_count;
    j["need_floor"] = m.need_floor;
    j["mean_abs_valence"] = m.mean_abs_valence;
    j["abandonment_count"] = m.abandonment_count;
    j["idle_fraction"] = m.idle_fraction;
    ordered_json rt = ordered_json::object();
    for (const auto& [id, k] : m.root_ticks) rt[id] = k;
    j["root_ticks"] = std::move(rt);
    return j;
}

// Longest stretch of consecutive ticks in which `root` received no attributed
// tick. Every sliding window of length W contains the root iff this is < W.
inline std::int64_t longest_unattributed_run(const Trace& trace, const GoalId& root) {
    std::int64_t run = 0, worst = 0;
    for (const auto& e : trace.events) {
        if (e.pursued_root_need && *e.pursued_root_need == root) {
            run = 0;
        } else {
            worst = std::max(worst, ++run);
        }
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Validation and sweeps
// ---------------------------------------------------------------------------

inline std::vector<std::string> validate_scenario(const std::string& document) {
    try {
        json doc = parse_document(document);
        std::vector<std::string> violations;
        read_scenario(doc, violations);
        return violations;
    } catch (const ParseError& e) {
        return {std::string("parse error: ") + e.what()};
    }
}

struct SweepRow {
    std::uint64_t seed = 0;
    Metrics metrics;
};

// Rows come back in seed order; episodes share nothing and run on up to
// `jobs` threads.
inline std::vector<SweepRow> sweep(const Scenario& s, const std::vector<std::uint64_t>& seeds,
                                   std::optional<std::int64_t> steps = std::nullopt, unsigned jobs = 1) {
    std::vector<SweepRow> rows(seeds.size());
    jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(seeds.size())));
    std::vector<std::exception_ptr> errors(jobs);
    {
        std::vector<std::jthread> workers;
        for (unsigned w = 0; w < jobs; ++w) {
            workers.emplace_back([&, w] {
                try {
                    for (std::size_t i = w; i < seeds.size(); i += jobs)
                        rows[i] = {seeds[i], compute_metrics(run_episode(s, seeds[i], steps))};
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    return rows;
}

inline Metrics mean_metrics(const std::vector<SweepRow>& rows) {
    Metrics m;
    if (rows.empty()) return m;
    const auto n = static_cast<double>(rows.size());
    for (const auto& r : rows) {
        m.monomania_index += r.metrics.monomania_index / n;
        m.allocation_entropy += r.metrics.allocation_entropy / n;
        m.need_floor += r.metrics.need_floor / n;
        m.mean_abs_valence += r.metrics.mean_abs_valence / n;
        m.idle_fraction += r.metrics.idle_fraction / n;
    }
    return m;
}

inline ordered_json sweep_to_json(const std::vector<SweepRow>& rows) {
    ordered_json out;
    ordered_json arr = ordered_json::array();
    for (const auto& r : rows) {
        ordered_json j;
        j["seed"] = r.seed;
        const ordered_json fields = metrics_to_json(r.metrics);
        for (const auto& [k, v] : fields.items()) j[k] = v;
        arr.push_back(std::move(j));
    }
    out["rows"] = std::move(arr);
    const Metrics mean = mean_metrics(rows);
    out["mean"] = {{"monomania_index", mean.monomania_index},
                   {"allocation_entropy", mean.allocation_entropy},
                   {"need_floor", mean.need_floor},
                   {"mean_abs_valence", mean.mean_abs_valence},
                   {"idle_fraction", mean.idle_fraction}};
    return out;
}

}  // namespace selfreg
