#pragma once
// Goal hierarchy: root needs at level 0, concrete sub-goals below them.
//
// A hierarchy is validated once and never mutated afterwards; changing a
// node (e.g. a scripted value change) builds a new hierarchy.

#include "selfreg/detail/json_fields.hpp"
#include "selfreg/errors.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace selfreg {

using json = nlohmann::json;
using GoalId = std::string;

enum class Polarity { approach, avoidance };

inline const char* to_string(Polarity p) { return p == Polarity::approach ? "approach" : "avoidance"; }

struct GoalNode {
    GoalId id;
    std::optional<GoalId> parent_id;  // none for root needs
    int level = 0;
    Polarity polarity = Polarity::approach;
    std::string label;
    double base_value = 1.0;
    double importance = 1.0;
    double reference = 0.0;
    double avoidance_margin = 0.0;
    double affect_decay = 1.0;  // NaN before build: use the level default

    bool is_root() const { return !parent_id.has_value(); }

    bool operator==(const GoalNode&) const = default;
};

// Default affect time constant by level: slower (less fleeting) near the root.
inline double default_affect_decay(int level) { return std::max(1.0, 4.0 / (level + 1)); }

// ---------------------------------------------------------------------------
// Engine parameters
// ---------------------------------------------------------------------------

struct EngineParams {
    // utility
    double gamma = 0.5;
    double lambda_loss = 2.0;
    double theta0 = 0.1;
    double kappa = 0.5;
    // shield / fatigue
    double sigma_max = 1.0;
    double sigma_min = 0.2;
    double sigma_crit = 0.2;
    double delta_dep = 0.05;
    double delta_rec = 0.02;
    double hysteresis = 0.1;
    // affect
    double k_affect = 2.0;
    double eta = 0.05;
    double beta_priority = 0.4;
    double novelty_widen = 1.0;
    double deadzone = 0.1;
    double novelty_decay = 0.9;
    double pulse = 0.02;
    double pulse_attenuation = 0.5;
    // learning / selection
    double ema_alpha = 0.2;
    int prune_k = 8;
    int window = 8;
    double default_expectancy = 0.5;
    // override
    double override_gain = 0.3;
    double override_cap = 0.5;
    int override_duration = 20;
    double override_percentile = 1.0;  // 1.0 disables importance-triggered overrides
    // abandonment
    int cooldown = 100;

    bool operator==(const EngineParams&) const = default;
};

namespace detail {

struct RealParam {
    const char* key;
    double EngineParams::*member;
};
struct IntParam {
    const char* key;
    int EngineParams::*member;
};

inline constexpr RealParam kRealParams[] = {
    {"gamma", &EngineParams::gamma},
    {"lambda_loss", &EngineParams::lambda_loss},
    {"theta0", &EngineParams::theta0},
    {"kappa", &EngineParams::kappa},
    {"sigma_max", &EngineParams::sigma_max},
    {"sigma_min", &EngineParams::sigma_min},
    {"sigma_crit", &EngineParams::sigma_crit},
    {"delta_dep", &EngineParams::delta_dep},
    {"delta_rec", &EngineParams::delta_rec},
    {"hysteresis", &EngineParams::hysteresis},
    {"k_affect", &EngineParams::k_affect},
    {"eta", &EngineParams::eta},
    {"beta_priority", &EngineParams::beta_priority},
    {"novelty_widen", &EngineParams::novelty_widen},
    {"deadzone", &EngineParams::deadzone},
    {"novelty_decay", &EngineParams::novelty_decay},
    {"pulse", &EngineParams::pulse},
    {"pulse_attenuation", &EngineParams::pulse_attenuation},
    {"ema_alpha", &EngineParams::ema_alpha},
    {"default_expectancy", &EngineParams::default_expectancy},
    {"override_gain", &EngineParams::override_gain},
    {"override_cap", &EngineParams::override_cap},
    {"override_percentile", &EngineParams::override_percentile},
};

inline constexpr IntParam kIntParams[] = {
    {"prune_k", &EngineParams::prune_k},
    {"window", &EngineParams::window},
    {"override_duration", &EngineParams::override_duration},
    {"cooldown", &EngineParams::cooldown},
};

}  // namespace detail

inline bool is_engine_param(const std::string& key) {
    for (const auto& p : detail::kRealParams)
        if (key == p.key) return true;
    for (const auto& p : detail::kIntParams)
        if (key == p.key) return true;
    return false;
}

inline std::vector<std::string> check_params(const EngineParams& p) {
    std::vector<std::string> v;
    auto need = [&](bool ok, const char* what) {
        if (!ok) v.emplace_back(std::string("params: ") + what);
    };
    need(p.gamma > 0, "gamma must be positive");
    need(p.lambda_loss >= 1, "lambda_loss must be >= 1");
    need(p.theta0 > 0, "theta0 must be positive");
    need(p.kappa > 0 && p.kappa <= 1, "kappa must be in (0, 1]");
    need(0 <= p.sigma_min && p.sigma_min <= p.sigma_crit && p.sigma_crit < p.sigma_max && p.sigma_max <= 1,
         "shield bounds must satisfy 0 <= sigma_min <= sigma_crit < sigma_max <= 1");
    need(p.delta_dep > 0, "delta_dep must be positive");
    need(p.delta_rec > 0, "delta_rec must be positive");
    need(p.hysteresis >= 0, "hysteresis must be nonnegative");
    need(p.k_affect > 0, "k_affect must be positive");
    need(p.eta > 0 && p.eta < 1, "eta must be in (0, 1)");
    need(p.beta_priority >= 0, "beta_priority must be nonnegative");
    need(p.novelty_widen >= 0, "novelty_widen must be nonnegative");
    need(p.deadzone >= 0, "deadzone must be nonnegative");
    need(p.novelty_decay >= 0 && p.novelty_decay <= 1, "novelty_decay must be in [0, 1]");
    need(p.pulse >= 0, "pulse must be nonnegative");
    need(p.pulse_attenuation >= 0 && p.pulse_attenuation <= 1, "pulse_attenuation must be in [0, 1]");
    need(p.ema_alpha > 0 && p.ema_alpha < 1, "ema_alpha must be in (0, 1)");
    need(p.prune_k > 0, "prune_k must be a positive integer");
    need(p.window >= 2, "window must be at least 2");
    need(p.default_expectancy >= 0 && p.default_expectancy <= 1, "default_expectancy must be in [0, 1]");
    need(p.override_gain >= 0, "override_gain must be nonnegative");
    need(p.override_cap >= 0, "override_cap must be nonnegative");
    need(p.override_duration > 0, "override_duration must be positive");
    need(p.override_percentile > 0 && p.override_percentile <= 1, "override_percentile must be in (0, 1]");
    need(p.cooldown > 0, "cooldown must be positive");
    return v;
}

// Reads engine overrides from a `params` object. Keys that are not engine
// parameters are ignored here (the world reads its own).
inline EngineParams read_engine_params(const json& obj, std::vector<std::string>& out) {
    EngineParams p;
    if (!obj.is_object()) return p;
    for (const auto& rp : detail::kRealParams) {
        if (auto x = detail::read_number(obj, rp.key, "params", out, p.*(rp.member))) p.*(rp.member) = *x;
    }
    for (const auto& ip : detail::kIntParams) {
        if (auto x = detail::read_integer(obj, ip.key, "params", out, p.*(ip.member)))
            p.*(ip.member) = static_cast<int>(*x);
    }
    return p;
}

inline json engine_params_to_json(const EngineParams& p) {
    json j = json::object();
    for (const auto& rp : detail::kRealParams) j[rp.key] = p.*(rp.member);
    for (const auto& ip : detail::kIntParams) j[ip.key] = p.*(ip.member);
    return j;
}

// ---------------------------------------------------------------------------
// Hierarchy
// ---------------------------------------------------------------------------

class GoalHierarchy {
public:
    // Validates and builds. Levels are recomputed from parent links; a node
    // that declares a level inconsistent with its parent is a violation.
    static GoalHierarchy build(const std::vector<GoalNode>& nodes,
                               const std::map<GoalId, bool>& level_declared = {}) {
        auto violations = check(nodes, level_declared);
        if (!violations.empty()) throw ValidationError(std::move(violations));
        GoalHierarchy h;
        for (const auto& n : nodes) h.nodes_.emplace(n.id, n);
        for (auto& [id, n] : h.nodes_) {
            if (n.is_root()) {
                h.roots_.push_back(id);
                n.level = 0;
            } else {
                h.children_[*n.parent_id].push_back(id);
            }
        }
        for (auto& [id, n] : h.nodes_) {
            n.level = static_cast<int>(h.lineage(id).size()) - 1;
            if (std::isnan(n.affect_decay)) n.affect_decay = default_affect_decay(n.level);
        }
        return h;
    }

    // All invariant violations of a candidate node set; empty when valid.
    static std::vector<std::string> check(const std::vector<GoalNode>& nodes,
                                          const std::map<GoalId, bool>& level_declared = {}) {
        std::vector<std::string> v;
        std::map<GoalId, const GoalNode*> by_id;
        for (const auto& n : nodes) {
            const std::string where = "goal '" + n.id + "'";
            if (n.id.empty()) v.push_back("goal with empty id");
            if (!by_id.emplace(n.id, &n).second) v.push_back(where + ": duplicate id");
            if (!(n.base_value > 0)) v.push_back(where + ": nonpositive base_value");
            if (!(n.importance > 0)) v.push_back(where + ": nonpositive importance");
            if (!std::isnan(n.affect_decay) && !(n.affect_decay >= 1))
                v.push_back(where + ": affect_decay must be >= 1");
            if (!(n.avoidance_margin >= 0)) v.push_back(where + ": negative avoidance_margin");
            if (n.polarity == Polarity::avoidance && !(n.avoidance_margin > 0))
                v.push_back(where + ": avoidance goal needs a positive avoidance_margin");
            if (!std::isfinite(n.reference)) v.push_back(where + ": reference must be finite");
        }

        int roots = 0;
        for (const auto& n : nodes) {
            const std::string where = "goal '" + n.id + "'";
            if (n.is_root()) {
                ++roots;
                if (n.level != 0) v.push_back(where + ": root need must have level 0");
                continue;
            }
            if (*n.parent_id == n.id) {
                v.push_back(where + ": cycle (node is its own parent)");
                continue;
            }
            if (!by_id.count(*n.parent_id)) {
                v.push_back(where + ": orphan parent '" + *n.parent_id + "'");
                continue;
            }
            // Walk up; more steps than nodes means a cycle.
            std::set<GoalId> seen{n.id};
            const GoalNode* cur = &n;
            int depth = 0;
            bool bad = false;
            while (!cur->is_root()) {
                auto it = by_id.find(*cur->parent_id);
                if (it == by_id.end()) {
                    bad = true;  // reported on the node with the dangling link
                    break;
                }
                cur = it->second;
                ++depth;
                if (!seen.insert(cur->id).second) {
                    v.push_back(where + ": cycle through '" + cur->id + "'");
                    bad = true;
                    break;
                }
            }
            if (bad) continue;
            auto declared = level_declared.find(n.id);
            bool check_level = declared == level_declared.end() || declared->second;
            if (check_level && n.level != depth)
                v.push_back(where + ": level " + std::to_string(n.level) + " does not equal parent level + 1 (" +
                            std::to_string(depth) + ")");
        }
        if (roots < 2) v.push_back("fewer than 2 roots (found " + std::to_string(roots) + ")");
        return v;
    }

    const GoalNode& node(const GoalId& id) const {
        auto it = nodes_.find(id);
        if (it == nodes_.end()) throw LookupError("unknown goal id '" + id + "'");
        return it->second;
    }

    bool contains(const GoalId& id) const { return nodes_.count(id) != 0; }

    // Node first, root last.
    std::vector<GoalId> lineage(const GoalId& id) const {
        std::vector<GoalId> out;
        const GoalNode* cur = &node(id);
        out.push_back(cur->id);
        while (!cur->is_root()) {
            cur = &node(*cur->parent_id);
            out.push_back(cur->id);
        }
        return out;
    }

    const GoalId& root_of(const GoalId& id) const {
        const GoalNode* cur = &node(id);
        while (!cur->is_root()) cur = &node(*cur->parent_id);
        return cur->id;
    }

    // Sorted ascending.
    const std::vector<GoalId>& roots() const { return roots_; }
    const std::map<GoalId, GoalNode>& nodes() const { return nodes_; }

    std::vector<GoalId> children(const GoalId& id) const {
        auto it = children_.find(id);
        return it == children_.end() ? std::vector<GoalId>{} : it->second;
    }

    int depth() const {
        int d = 0;
        for (const auto& [_, n] : nodes_) d = std::max(d, n.level);
        return d;
    }

    // Copy with one node's base value replaced.
    GoalHierarchy with_base_value(const GoalId& id, double value) const {
        std::vector<GoalNode> ns;
        for (const auto& [_, n] : nodes_) ns.push_back(n);
        for (auto& n : ns)
            if (n.id == id) n.base_value = value;
        if (!contains(id)) throw LookupError("unknown goal id '" + id + "'");
        return build(ns);
    }

    bool operator==(const GoalHierarchy& o) const { return nodes_ == o.nodes_; }

private:
    std::map<GoalId, GoalNode> nodes_;
    std::vector<GoalId> roots_;
    std::map<GoalId, std::vector<GoalId>> children_;
};

// Threshold schedule theta0 * kappa^level: largest at the root.
inline double drop_resistance(const GoalNode& node, const EngineParams& p) {
    return p.theta0 * std::pow(p.kappa, node.level);
}

// Utility bar a goal's best alternative must clear to avoid abandonment.
// Inverse of drop_resistance around theta0, so the root has the lowest bar
// (hardest to drop) and each level down the bar grows by 1/kappa.
inline double abandonment_threshold(const GoalNode& node, const EngineParams& p) {
    return p.theta0 * p.theta0 / drop_resistance(node, p);
}

inline std::vector<GoalId> lineage(const GoalHierarchy& h, const GoalId& id) { return h.lineage(id); }

// ---------------------------------------------------------------------------
// Document form
// ---------------------------------------------------------------------------

inline json goal_to_json(const GoalNode& n) {
    json j = json::object();
    j["id"] = n.id;
    j["parent_id"] = n.parent_id ? json(*n.parent_id) : json(nullptr);
    j["level"] = n.level;
    j["polarity"] = to_string(n.polarity);
    j["label"] = n.label;
    j["base_value"] = n.base_value;
    j["importance"] = n.importance;
    j["reference"] = n.reference;
    j["avoidance_margin"] = n.avoidance_margin;
    j["affect_decay"] = n.affect_decay;
    return j;
}

inline json hierarchy_to_json(const GoalHierarchy& h) {
    json arr = json::array();
    for (const auto& [_, n] : h.nodes()) arr.push_back(goal_to_json(n));
    return arr;
}

struct GoalRecords {
    std::vector<GoalNode> nodes;
    std::map<GoalId, bool> level_declared;
};

// Reads the `goals` array; type problems become violations.
inline GoalRecords read_goal_records(const json& goals, std::vector<std::string>& out) {
    GoalRecords r;
    if (!goals.is_array()) {
        out.push_back("goals: must be an array of node records");
        return r;
    }
    for (std::size_t i = 0; i < goals.size(); ++i) {
        const auto& g = goals[i];
        std::string where = "goals[" + std::to_string(i) + "]";
        if (!g.is_object()) {
            out.push_back(where + ": must be an object");
            continue;
        }
        GoalNode n;
        if (auto id = detail::read_string(g, "id", where, out)) n.id = *id;
        where = "goal '" + n.id + "'";
        auto pit = g.find("parent_id");
        if (pit != g.end() && !pit->is_null()) {
            if (pit->is_string())
                n.parent_id = pit->get<std::string>();
            else
                out.push_back(where + ": parent_id must be a string or null");
        }
        auto lit = g.find("level");
        r.level_declared[n.id] = lit != g.end() && !lit->is_null();
        if (auto lv = detail::read_integer(g, "level", where, out, 0)) n.level = static_cast<int>(*lv);
        if (auto pol = detail::read_string(g, "polarity", where, out, std::string("approach"))) {
            if (*pol == "approach")
                n.polarity = Polarity::approach;
            else if (*pol == "avoidance")
                n.polarity = Polarity::avoidance;
            else
                out.push_back(where + ": polarity must be 'approach' or 'avoidance'");
        }
        if (auto s = detail::read_string(g, "label", where, out, n.id)) n.label = *s;
        if (auto x = detail::read_number(g, "base_value", where, out, 1.0)) n.base_value = *x;
        if (auto x = detail::read_number(g, "importance", where, out, 1.0)) n.importance = *x;
        if (auto x = detail::read_number(g, "reference", where, out)) n.reference = *x;
        if (auto x = detail::read_number(g, "avoidance_margin", where, out, 0.0)) n.avoidance_margin = *x;
        // NaN defers the level-based default until levels are resolved.
        if (auto x = detail::read_number(g, "affect_decay", where, out, std::nan("")))
            n.affect_decay = *x;
        r.nodes.push_back(std::move(n));
    }
    return r;
}

inline json parse_document(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("malformed scenario document: ") + e.what());
    }
    if (!doc.is_object()) throw ParseError("scenario document must be an object");
    return doc;
}

// Parses a scenario document and returns its validated goal hierarchy.
inline GoalHierarchy load_hierarchy(const std::string& document) {
    json doc = parse_document(document);
    auto it = doc.find("goals");
    if (it == doc.end()) throw ParseError("scenario document has no 'goals' key");
    std::vector<std::string> out;
    auto records = read_goal_records(*it, out);
    if (!out.empty()) throw ValidationError(std::move(out));
    return GoalHierarchy::build(records.nodes, records.level_declared);
}

}  // namespace selfreg
