#pragma once
// Scripted needs-world: one bounded reservoir per root need, draining every
// tick and refilled by the delayed effects of successful actions. Events
// block and unblock means, pulse rewards, change goal values, and add
// resources at fixed ticks.

#include "selfreg/arbitration.hpp"
#include "selfreg/detail/json_fields.hpp"
#include "selfreg/errors.hpp"
#include "selfreg/feedback_loop.hpp"
#include "selfreg/goal_model.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace selfreg {

struct WorldParams {
    double cap = 10.0;
    double base_step = 1.0;
    double resource_regen = 0.0;

    bool operator==(const WorldParams&) const = default;
};

inline bool is_world_param(const std::string& key) {
    return key == "cap" || key == "base_step" || key == "resource_regen";
}

enum class EventType { block, unblock, reward, set_value, add_resource };

inline const char* to_string(EventType t) {
    switch (t) {
        case EventType::block: return "block";
        case EventType::unblock: return "unblock";
        case EventType::reward: return "reward";
        case EventType::set_value: return "set_value";
        case EventType::add_resource: return "add_resource";
    }
    return "?";
}

struct ScriptedEvent {
    std::int64_t tick = 0;
    EventType type = EventType::reward;
    std::string target;   // means id (block/unblock) or goal id (set_value)
    double amount = 0.0;  // salience, value, or resource amount

    bool operator==(const ScriptedEvent&) const = default;
};

// A means as the world sees it: the agent-facing record plus the latent
// success probability per served goal, which the agent never observes.
struct ScenarioMeans {
    Means means;
    std::map<GoalId, double> p_true;

    bool operator==(const ScenarioMeans&) const = default;
};

struct Scenario {
    GoalHierarchy goals;
    std::vector<ScenarioMeans> means;
    std::map<GoalId, double> drains;
    std::vector<ScriptedEvent> events;
    std::int64_t horizon = 0;
    EngineParams params;
    WorldParams world;
    std::map<GoalId, double> initial;    // root reservoirs at tick 0
    double initial_resource = 0.0;
    std::map<GoalId, double> channels;   // non-root channel scale factors

    bool operator==(const Scenario&) const = default;

    const ScenarioMeans& find_means(const MeansId& id) const {
        for (const auto& m : means)
            if (m.means.id == id) return m;
        throw LookupError("unknown means '" + id + "'");
    }
};

// ---------------------------------------------------------------------------
// Document form
// ---------------------------------------------------------------------------

namespace detail {

inline std::map<std::string, double> read_number_map(const json& obj, const std::string& where, Violations& out) {
    std::map<std::string, double> m;
    if (obj.is_null()) return m;
    if (!obj.is_object()) {
        out.push_back(where + ": must be an object of numbers");
        return m;
    }
    for (const auto& [k, v] : obj.items()) {
        if (!v.is_number())
            out.push_back(where + ": entry '" + k + "' must be a number");
        else
            m[k] = v.get<double>();
    }
    return m;
}

inline std::optional<EventType> parse_event_type(const std::string& s) {
    if (s == "block") return EventType::block;
    if (s == "unblock") return EventType::unblock;
    if (s == "reward") return EventType::reward;
    if (s == "set_value") return EventType::set_value;
    if (s == "add_resource") return EventType::add_resource;
    return std::nullopt;
}

inline const json& member_or_null(const json& doc, const char* key) {
    static const json null_value;
    auto it = doc.find(key);
    return it == doc.end() ? null_value : *it;
}

}  // namespace detail

// Reads and checks a whole scenario. On success `violations` stays empty and
// the scenario is returned; otherwise every violation found is listed.
inline std::optional<Scenario> read_scenario(const json& doc, std::vector<std::string>& violations) {
    using namespace detail;
    auto& out = violations;
    static const std::set<std::string> known = {"goals", "means", "drains", "events", "params",
                                                "horizon", "initial", "channels"};
    for (const auto& [k, _] : doc.items())
        if (!known.count(k)) out.push_back("unknown top-level key '" + k + "'");

    // params
    const json& pj = member_or_null(doc, "params");
    if (!pj.is_null() && !pj.is_object()) out.push_back("params: must be an object");
    EngineParams params = read_engine_params(pj, out);
    WorldParams world;
    if (pj.is_object()) {
        for (const auto& [k, _] : pj.items())
            if (!is_engine_param(k) && !is_world_param(k)) out.push_back("params: unknown parameter '" + k + "'");
        if (auto x = read_number(pj, "cap", "params", out, world.cap)) world.cap = *x;
        if (auto x = read_number(pj, "base_step", "params", out, world.base_step)) world.base_step = *x;
        if (auto x = read_number(pj, "resource_regen", "params", out, world.resource_regen))
            world.resource_regen = *x;
    }
    for (auto& v : check_params(params)) out.push_back(std::move(v));
    if (!(world.cap > 0)) out.push_back("params: cap must be positive");
    if (!(world.base_step > 0)) out.push_back("params: base_step must be positive");
    if (!(world.resource_regen >= 0)) out.push_back("params: resource_regen must be nonnegative");

    // horizon
    std::int64_t horizon = 0;
    if (auto h = read_integer(doc, "horizon", "scenario", out)) {
        horizon = *h;
        if (horizon < 1) out.push_back("horizon must be at least 1");
    }

    // goals
    std::optional<GoalHierarchy> hierarchy;
    {
        auto it = doc.find("goals");
        if (it == doc.end()) {
            out.push_back("scenario: missing 'goals'");
        } else {
            Violations gv;
            auto records = read_goal_records(*it, gv);
            if (gv.empty()) {
                auto hv = GoalHierarchy::check(records.nodes, records.level_declared);
                if (hv.empty())
                    hierarchy = GoalHierarchy::build(records.nodes, records.level_declared);
                else
                    gv.insert(gv.end(), hv.begin(), hv.end());
            }
            out.insert(out.end(), gv.begin(), gv.end());
        }
    }
    auto goal_known = [&](const std::string& g) { return hierarchy && hierarchy->contains(g); };
    auto is_root = [&](const std::string& g) { return goal_known(g) && hierarchy->node(g).is_root(); };

    // means
    std::vector<ScenarioMeans> means;
    {
        const json& mj = member_or_null(doc, "means");
        if (!mj.is_array()) {
            out.push_back("means: must be an array");
        } else {
            std::set<std::string> ids;
            for (std::size_t i = 0; i < mj.size(); ++i) {
                const auto& r = mj[i];
                std::string where = "means[" + std::to_string(i) + "]";
                if (!r.is_object()) {
                    out.push_back(where + ": must be an object");
                    continue;
                }
                ScenarioMeans sm;
                Means& m = sm.means;
                if (auto id = read_string(r, "id", where, out)) m.id = *id;
                where = "means '" + m.id + "'";
                if (!ids.insert(m.id).second) out.push_back(where + ": duplicate id");
                m.serves = read_number_map(member_or_null(r, "serves"), where + ".serves", out);
                if (auto x = read_number(r, "delay", where, out, 0.0)) m.delay = *x;
                if (auto x = read_number(r, "cost", where, out, 0.0)) m.cost = *x;
                if (auto b = read_bool(r, "blocked", where, out, false)) m.blocked = *b;
                m.expectancy = read_number_map(member_or_null(r, "expectancy"), where + ".expectancy", out);
                sm.p_true = read_number_map(member_or_null(r, "p_true"), where + ".p_true", out);
                const json& lj = member_or_null(r, "losses");
                if (!lj.is_null()) {
                    if (!lj.is_array())
                        out.push_back(where + ".losses: must be an array of goal ids");
                    else
                        for (const auto& g : lj) {
                            if (g.is_string())
                                m.losses.insert(g.get<std::string>());
                            else
                                out.push_back(where + ".losses: entries must be strings");
                        }
                }
                for (const auto& [g, _] : m.serves) {
                    if (hierarchy && !goal_known(g)) out.push_back(where + ": serves unknown goal '" + g + "'");
                    m.expectancy.try_emplace(g, params.default_expectancy);
                    sm.p_true.try_emplace(g, 1.0);
                }
                for (const auto& [g, p] : sm.p_true) {
                    if (!(p >= 0 && p <= 1)) out.push_back(where + ": p_true for '" + g + "' must be in [0, 1]");
                    if (!m.serves.count(g)) out.push_back(where + ": p_true for unserved goal '" + g + "'");
                }
                for (auto& v : check_means(m)) out.push_back(std::move(v));
                means.push_back(std::move(sm));
            }
        }
    }

    // drains
    auto drains = read_number_map(member_or_null(doc, "drains"), "drains", out);
    for (const auto& [g, d] : drains) {
        if (hierarchy && !is_root(g)) out.push_back("drains: '" + g + "' is not a root need");
        if (!(d >= 0)) out.push_back("drains: rate for '" + g + "' must be nonnegative");
    }

    // initial
    std::map<GoalId, double> initial;
    double initial_resource = 0.0;
    {
        const json& ij = member_or_null(doc, "initial");
        if (!ij.is_null() && !ij.is_object()) {
            out.push_back("initial: must be an object");
        } else if (ij.is_object()) {
            for (const auto& [k, _] : ij.items())
                if (k != "reservoirs" && k != "resource") out.push_back("initial: unknown key '" + k + "'");
            initial = read_number_map(member_or_null(ij, "reservoirs"), "initial.reservoirs", out);
            if (auto x = read_number(ij, "resource", "initial", out, 0.0)) initial_resource = *x;
        }
        for (const auto& [g, v] : initial) {
            if (hierarchy && !is_root(g)) out.push_back("initial: '" + g + "' is not a root need");
            if (!(v >= 0 && v <= world.cap))
                out.push_back("initial: reservoir '" + g + "' must be in [0, cap]");
        }
        if (!(initial_resource >= 0)) out.push_back("initial: resource must be nonnegative");
    }

    // channels
    auto channels = read_number_map(member_or_null(doc, "channels"), "channels", out);
    for (const auto& [g, f] : channels) {
        if (hierarchy && (!goal_known(g) || is_root(g)))
            out.push_back("channels: '" + g + "' is not a non-root goal");
        if (!std::isfinite(f)) out.push_back("channels: factor for '" + g + "' must be finite");
    }

    // events
    std::vector<ScriptedEvent> events;
    {
        const json& ej = member_or_null(doc, "events");
        if (!ej.is_null() && !ej.is_array()) {
            out.push_back("events: must be an array");
        } else if (ej.is_array()) {
            std::set<std::string> means_ids;
            for (const auto& m : means) means_ids.insert(m.means.id);
            for (std::size_t i = 0; i < ej.size(); ++i) {
                const auto& e = ej[i];
                std::string where = "events[" + std::to_string(i) + "]";
                if (!e.is_object()) {
                    out.push_back(where + ": must be an object");
                    continue;
                }
                ScriptedEvent ev;
                if (auto t = read_integer(e, "tick", where, out)) {
                    ev.tick = *t;
                    if (ev.tick < 0 || ev.tick > horizon)
                        out.push_back(where + ": tick " + std::to_string(ev.tick) + " outside [0, horizon]");
                }
                auto type = read_string(e, "type", where, out);
                auto parsed = type ? parse_event_type(*type) : std::nullopt;
                if (type && !parsed) out.push_back(where + ": unknown event type '" + *type + "'");
                if (parsed) {
                    ev.type = *parsed;
                    switch (ev.type) {
                        case EventType::block:
                        case EventType::unblock:
                            if (auto m = read_string(e, "means", where, out)) {
                                ev.target = *m;
                                if (!means_ids.count(ev.target))
                                    out.push_back(where + ": unknown means '" + ev.target + "'");
                            }
                            break;
                        case EventType::reward:
                            if (auto s = read_number(e, "salience", where, out)) {
                                ev.amount = *s;
                                if (!(ev.amount >= 0)) out.push_back(where + ": salience must be nonnegative");
                            }
                            break;
                        case EventType::set_value:
                            if (auto g = read_string(e, "goal", where, out)) {
                                ev.target = *g;
                                if (hierarchy && !goal_known(ev.target))
                                    out.push_back(where + ": unknown goal '" + ev.target + "'");
                            }
                            if (auto v = read_number(e, "value", where, out)) {
                                ev.amount = *v;
                                if (!(ev.amount > 0)) out.push_back(where + ": value must be positive");
                            }
                            break;
                        case EventType::add_resource:
                            if (auto a = read_number(e, "amount", where, out)) {
                                ev.amount = *a;
                                if (!(ev.amount >= 0)) out.push_back(where + ": amount must be nonnegative");
                            }
                            break;
                    }
                }
                events.push_back(std::move(ev));
            }
        }
    }

    if (!out.empty() || !hierarchy) return std::nullopt;
    Scenario s{*hierarchy, std::move(means), std::move(drains), std::move(events), horizon, params, world,
               std::move(initial), initial_resource, std::move(channels)};
    return s;
}

inline Scenario load_scenario(const std::string& text) {
    json doc = parse_document(text);
    std::vector<std::string> violations;
    auto s = read_scenario(doc, violations);
    if (!s) throw ValidationError(std::move(violations));
    return std::move(*s);
}

inline json event_to_json(const ScriptedEvent& e) {
    json j = json::object();
    j["tick"] = e.tick;
    j["type"] = to_string(e.type);
    switch (e.type) {
        case EventType::block:
        case EventType::unblock: j["means"] = e.target; break;
        case EventType::reward: j["salience"] = e.amount; break;
        case EventType::set_value:
            j["goal"] = e.target;
            j["value"] = e.amount;
            break;
        case EventType::add_resource: j["amount"] = e.amount; break;
    }
    return j;
}

inline json scenario_to_json(const Scenario& s) {
    json doc = json::object();
    doc["horizon"] = s.horizon;
    doc["goals"] = hierarchy_to_json(s.goals);
    json means = json::array();
    for (const auto& sm : s.means) {
        const Means& m = sm.means;
        json r = json::object();
        r["id"] = m.id;
        r["serves"] = m.serves;
        r["delay"] = m.delay;
        r["cost"] = m.cost;
        r["blocked"] = m.blocked;
        r["expectancy"] = m.expectancy;
        r["p_true"] = sm.p_true;
        r["losses"] = m.losses;
        means.push_back(std::move(r));
    }
    doc["means"] = std::move(means);
    doc["drains"] = s.drains;
    json events = json::array();
    for (const auto& e : s.events) events.push_back(event_to_json(e));
    doc["events"] = std::move(events);
    json params = engine_params_to_json(s.params);
    params["cap"] = s.world.cap;
    params["base_step"] = s.world.base_step;
    params["resource_regen"] = s.world.resource_regen;
    doc["params"] = std::move(params);
    doc["initial"] = {{"reservoirs", s.initial}, {"resource", s.initial_resource}};
    doc["channels"] = s.channels;
    return doc;
}

// ---------------------------------------------------------------------------
// World state
// ---------------------------------------------------------------------------

struct PendingEffect {
    std::int64_t land_tick = 0;
    GoalId goal_id;
    double delta = 0.0;

    bool operator==(const PendingEffect&) const = default;
};

struct WorldState {
    std::int64_t tick = 0;
    std::map<GoalId, double> reservoirs;  // one per root need
    double resource = 0.0;
    std::vector<PendingEffect> pending;   // ordered by land_tick, FIFO within a tick
    std::mt19937_64 rng;
    std::size_t event_cursor = 0;
    std::vector<ScriptedEvent> schedule;  // scenario events, stably sorted by tick
    std::set<MeansId> blocked;
    std::vector<ScriptedEvent> fired;     // events executed by the most recent tick
    double enqueued_mass = 0.0;
    double landed_mass = 0.0;

    bool operator==(const WorldState&) const = default;
};

struct Outcome {
    GoalId goal_id;
    bool success = false;

    bool operator==(const Outcome&) const = default;
};

namespace detail {

inline double clamp_reservoir(double v, double cap) { return std::clamp(v, 0.0, cap); }

// 53 random bits scaled into [0, 1); identical on every platform.
inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline void run_events_at(WorldState& w, std::int64_t tick) {
    w.fired.clear();
    while (w.event_cursor < w.schedule.size() && w.schedule[w.event_cursor].tick <= tick) {
        const auto& e = w.schedule[w.event_cursor++];
        if (e.tick < tick) continue;  // unreachable with a sorted schedule
        switch (e.type) {
            case EventType::block: w.blocked.insert(e.target); break;
            case EventType::unblock: w.blocked.erase(e.target); break;
            case EventType::add_resource: w.resource += e.amount; break;
            case EventType::reward:
            case EventType::set_value: break;  // agent-side; handled by the driver
        }
        w.fired.push_back(e);
    }
}

}  // namespace detail

inline WorldState init_world(const Scenario& s, std::uint64_t seed) {
    WorldState w;
    w.rng.seed(seed);
    for (const auto& r : s.goals.roots()) {
        auto it = s.initial.find(r);
        double v = it == s.initial.end() ? s.world.cap : it->second;
        if (v < 0 || v > s.world.cap) throw ValidationError({"initial: reservoir '" + r + "' must be in [0, cap]"});
        w.reservoirs[r] = v;
    }
    w.resource = s.initial_resource;
    for (const auto& m : s.means)
        if (m.means.blocked) w.blocked.insert(m.means.id);
    w.schedule = s.events;
    std::stable_sort(w.schedule.begin(), w.schedule.end(),
                     [](const ScriptedEvent& a, const ScriptedEvent& b) { return a.tick < b.tick; });
    detail::run_events_at(w, 0);
    return w;
}

struct ActionResult {
    WorldState world;
    std::vector<Outcome> outcomes;  // ascending goal id
};

inline ActionResult apply_action(const WorldState& world, const Scenario& s, const MeansId& means_id) {
    const ScenarioMeans& sm = s.find_means(means_id);
    if (world.blocked.count(means_id)) throw LookupError("means '" + means_id + "' is blocked");
    if (sm.means.cost > world.resource)
        throw LookupError("insufficient resource for means '" + means_id + "'");
    ActionResult r{world, {}};
    WorldState& w = r.world;
    w.resource -= sm.means.cost;
    const auto land = w.tick + static_cast<std::int64_t>(std::ceil(sm.means.delay));
    for (const auto& [g, c] : sm.means.serves) {
        double p = sm.p_true.at(g);
        bool success = detail::uniform01(w.rng) < p;
        r.outcomes.push_back({g, success});
        if (!success) continue;
        double delta = c * s.world.base_step;
        if (sm.means.losses.count(g)) delta = -delta;
        PendingEffect e{land, g, delta};
        auto pos = std::upper_bound(w.pending.begin(), w.pending.end(), e,
                                    [](const PendingEffect& a, const PendingEffect& b) { return a.land_tick < b.land_tick; });
        w.pending.insert(pos, e);
        w.enqueued_mass += delta;
    }
    return r;
}

inline WorldState tick(const WorldState& world, const Scenario& s) {
    WorldState w = world;
    ++w.tick;
    w.resource += s.world.resource_regen;
    for (auto& [g, v] : w.reservoirs) {
        auto it = s.drains.find(g);
        if (it != s.drains.end()) v = detail::clamp_reservoir(v - it->second, s.world.cap);
    }
    auto first_future = std::find_if(w.pending.begin(), w.pending.end(),
                                     [&](const PendingEffect& e) { return e.land_tick > w.tick; });
    for (auto it = w.pending.begin(); it != first_future; ++it) {
        double& v = w.reservoirs.at(s.goals.root_of(it->goal_id));
        v = detail::clamp_reservoir(v + it->delta, s.world.cap);
        w.landed_mass += it->delta;
    }
    w.pending.erase(w.pending.begin(), first_future);
    detail::run_events_at(w, w.tick);
    return w;
}

inline double channel_factor(const Scenario& s, const GoalId& g) {
    auto it = s.channels.find(g);
    return it == s.channels.end() ? 1.0 : it->second;
}

// Root needs read their reservoir; other goals read their root's reservoir
// through a scale factor.
inline Observation observe(const WorldState& w, const Scenario& s, const GoalHierarchy& h) {
    Observation obs;
    for (const auto& [id, node] : h.nodes()) {
        double r = w.reservoirs.at(h.root_of(id));
        obs[id] = node.is_root() ? r : r * channel_factor(s, id);
    }
    return obs;
}

inline json world_to_json(const WorldState& w) {
    std::ostringstream rng;
    rng << w.rng;
    json pending = json::array();
    for (const auto& e : w.pending) pending.push_back({{"land_tick", e.land_tick}, {"goal_id", e.goal_id}, {"delta", e.delta}});
    json j = json::object();
    j["tick"] = w.tick;
    j["reservoirs"] = w.reservoirs;
    j["resource"] = w.resource;
    j["pending_effects"] = std::move(pending);
    j["rng_state"] = rng.str();
    j["event_cursor"] = w.event_cursor;
    j["blocked"] = w.blocked;
    return j;
}

}  // namespace selfreg
