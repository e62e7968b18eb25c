#pragma once
// Scenario documents shared by the unit and acceptance suites.

#include "selfreg/selfreg.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>
#include <string>

namespace selfreg::testing {

using json = nlohmann::json;

inline std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::string scenario_path(const std::string& name) { return std::string(SELFREG_SCENARIO_DIR) + "/" + name; }

inline json root_goal(const std::string& id, double value = 1.0, double reference = 10.0) {
    return {{"id", id}, {"parent_id", nullptr}, {"level", 0}, {"label", id}, {"base_value", value},
            {"importance", 1.0}, {"reference", reference}, {"affect_decay", 4.0}};
}

inline json child_goal(const std::string& id, const std::string& parent, int level, double value = 1.0,
                       double reference = 10.0) {
    return {{"id", id}, {"parent_id", parent}, {"level", level}, {"label", id}, {"base_value", value},
            {"importance", 1.0}, {"reference", reference}};
}

inline json means_for(const std::string& id, const std::string& goal, double expectancy, double p_true,
                      double delay = 1.0) {
    return {{"id", id}, {"serves", {{goal, 1.0}}}, {"delay", delay},
            {"expectancy", {{goal, expectancy}}}, {"p_true", {{goal, p_true}}}};
}

inline json load_doc(const std::string& name) { return json::parse(read_text(scenario_path(name))); }

// Three interchangeable needs, one means each.
inline json symmetric_doc(std::int64_t horizon = 10000) {
    json d = load_doc("symmetric.json");
    d["horizon"] = horizon;
    return d;
}

// One chain anchor -> step1 -> step2 -> step3 under a root need, plus an
// idle second root. Only the goal at `target_level` has a means, and that
// means always fails, so its expectancy decays by (1 - ema_alpha) per try.
inline json drop_chain_doc(int target_level, std::int64_t horizon = 200) {
    static const char* chain[] = {"anchor", "step1", "step2", "step3"};
    json goals = json::array();
    goals.push_back(root_goal("anchor", target_level == 0 ? 10.0 : 1.0));
    for (int l = 1; l < 4; ++l) goals.push_back(child_goal(chain[l], chain[l - 1], l, target_level == l ? 10.0 : 1.0));
    goals.push_back(root_goal("other"));
    json d;
    d["horizon"] = horizon;
    d["goals"] = goals;
    d["means"] = json::array({means_for("attempt", chain[target_level], 1.0, 0.0)});
    d["drains"] = json::object();
    d["initial"] = {{"reservoirs", {{"anchor", 0.0}, {"other", 10.0}}}};
    d["events"] = json::array();
    d["params"] = {{"cooldown", 50}};
    return d;
}

inline Scenario scenario_of(const json& doc) { return load_scenario(doc.dump()); }

}  // namespace selfreg::testing
