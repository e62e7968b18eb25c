#include "selfreg/world_sim.hpp"
#include "support/fixtures.hpp"

#include <gtest/gtest.h>

#include <numeric>
#include <random>

using namespace selfreg;
using namespace selfreg::testing;

namespace {

// Two roots "a" and "b"; "a" has child "a_sub". Means "m" serves "a" with
// the given probability and delay.
json small_world(double p_true, double delay, double drain = 0.0) {
    json d;
    d["horizon"] = 50;
    d["goals"] = {root_goal("a"), root_goal("b"), child_goal("a_sub", "a", 1)};
    d["means"] = json::array({means_for("m", "a", 0.5, p_true, delay)});
    d["drains"] = {{"a", drain}};
    d["initial"] = {{"reservoirs", {{"a", 3.0}, {"b", 5.0}}}, {"resource", 1.0}};
    d["events"] = json::array();
    return d;
}

double pending_mass(const WorldState& w) {
    double m = 0.0;
    for (const auto& e : w.pending) m += e.delta;
    return m;
}

}  // namespace

TEST(InitWorld, SameSeedSameState) {
    auto s = scenario_of(small_world(0.5, 1));
    EXPECT_EQ(init_world(s, 42), init_world(s, 42));
    EXPECT_EQ(world_to_json(init_world(s, 42)).dump(), world_to_json(init_world(s, 42)).dump());
}

TEST(InitWorld, ReservoirsStartAtConfiguredValues) {
    auto w = init_world(scenario_of(small_world(0.5, 1)), 1);
    EXPECT_EQ(w.tick, 0);
    EXPECT_EQ(w.reservoirs.at("a"), 3.0);
    EXPECT_EQ(w.reservoirs.at("b"), 5.0);
    EXPECT_EQ(w.resource, 1.0);
}

TEST(InitWorld, NegativeInitialReservoirIsRejected) {
    auto d = small_world(0.5, 1);
    d["initial"]["reservoirs"]["a"] = -1.0;
    EXPECT_THROW(scenario_of(d), ValidationError);
}

TEST(ApplyAction, CertainSuccessEnqueuesAtDelay) {
    auto s = scenario_of(small_world(1.0, 3));
    auto w = init_world(s, 7);
    for (int i = 0; i < 50; ++i) {
        auto r = apply_action(w, s, "m");
        ASSERT_EQ(r.outcomes.size(), 1u);
        EXPECT_TRUE(r.outcomes[0].success);
        ASSERT_EQ(r.world.pending.size(), 1u);
        EXPECT_EQ(r.world.pending[0].land_tick, 3);
        EXPECT_DOUBLE_EQ(r.world.pending[0].delta, 1.0);
        w.rng = r.world.rng;
    }
}

TEST(ApplyAction, CertainFailureEnqueuesNothing) {
    auto s = scenario_of(small_world(0.0, 3));
    auto w = init_world(s, 7);
    for (int i = 0; i < 50; ++i) {
        auto r = apply_action(w, s, "m");
        EXPECT_FALSE(r.outcomes[0].success);
        EXPECT_TRUE(r.world.pending.empty());
        w = r.world;
    }
}

TEST(ApplyAction, EmpiricalSuccessRateMatchesProbability) {
    auto s = scenario_of(small_world(0.7, 0));
    auto w = init_world(s, 123);
    int hits = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        auto r = apply_action(w, s, "m");
        hits += r.outcomes[0].success;
        w.rng = r.world.rng;
    }
    const double rate = static_cast<double>(hits) / n;
    EXPECT_GE(rate, 0.68);
    EXPECT_LE(rate, 0.72);
}

TEST(ApplyAction, ChargesCostAndRejectsInfeasibleActions) {
    auto d = small_world(1.0, 0);
    d["means"][0]["cost"] = 0.75;
    auto s = scenario_of(d);
    auto w = init_world(s, 1);
    auto r = apply_action(w, s, "m");
    EXPECT_DOUBLE_EQ(r.world.resource, 0.25);
    EXPECT_THROW(apply_action(r.world, s, "m"), LookupError);
    EXPECT_THROW(apply_action(w, s, "nope"), LookupError);
    w.blocked.insert("m");
    EXPECT_THROW(apply_action(w, s, "m"), LookupError);
}

TEST(Tick, DrainsAndClamps) {
    auto d = small_world(1.0, 0, 0.2);
    d["initial"]["reservoirs"]["a"] = 1.0;
    auto s = scenario_of(d);
    auto w = tick(init_world(s, 1), s);
    EXPECT_EQ(w.tick, 1);
    EXPECT_DOUBLE_EQ(w.reservoirs.at("a"), 0.8);

    d["initial"]["reservoirs"]["a"] = 0.1;
    auto s2 = scenario_of(d);
    EXPECT_EQ(tick(init_world(s2, 1), s2).reservoirs.at("a"), 0.0);
}

TEST(Tick, EffectLandsExactlyOnItsTick) {
    auto s = scenario_of(small_world(1.0, 5));
    auto w = apply_action(init_world(s, 1), s, "m").world;
    for (int t = 1; t < 5; ++t) {
        w = tick(w, s);
        EXPECT_EQ(w.reservoirs.at("a"), 3.0) << "tick " << t;
    }
    w = tick(w, s);
    EXPECT_EQ(w.tick, 5);
    EXPECT_EQ(w.reservoirs.at("a"), 4.0);
    EXPECT_TRUE(w.pending.empty());
}

TEST(Tick, LandingClampsAtCap) {
    auto d = small_world(1.0, 0);
    d["initial"]["reservoirs"]["a"] = 9.5;
    auto s = scenario_of(d);
    auto w = tick(apply_action(init_world(s, 1), s, "m").world, s);
    EXPECT_EQ(w.reservoirs.at("a"), 10.0);
}

TEST(Observe, ChannelsForEveryNode) {
    auto d = small_world(1.0, 0);
    d["channels"] = {{"a_sub", 0.5}};
    auto s = scenario_of(d);
    auto obs = observe(init_world(s, 1), s, s.goals);
    EXPECT_EQ(obs.size(), s.goals.nodes().size());
    EXPECT_EQ(obs.at("a"), 3.0);
    EXPECT_EQ(obs.at("a_sub"), 1.5);
    EXPECT_EQ(obs.at("b"), 5.0);
}

TEST(Events, FireOnceAtTheirTickInOrder) {
    auto d = small_world(1.0, 0);
    d["events"] = json::array({
        {{"tick", 3}, {"type", "block"}, {"means", "m"}},
        {{"tick", 3}, {"type", "add_resource"}, {"amount", 2.0}},
        {{"tick", 1}, {"type", "reward"}, {"salience", 1.0}},
        {{"tick", 3}, {"type", "unblock"}, {"means", "m"}},
        {{"tick", 6}, {"type", "block"}, {"means", "m"}},
    });
    auto s = scenario_of(d);
    auto w = init_world(s, 1);
    std::vector<ScriptedEvent> seen;
    std::vector<std::int64_t> when;
    for (int t = 1; t <= 10; ++t) {
        w = tick(w, s);
        for (const auto& e : w.fired) {
            seen.push_back(e);
            when.push_back(w.tick);
            EXPECT_EQ(e.tick, w.tick);
        }
        if (t == 3) {
            EXPECT_FALSE(w.blocked.count("m"));  // unblock is listed after block
            EXPECT_DOUBLE_EQ(w.resource, 3.0);
        }
    }
    ASSERT_EQ(seen.size(), 5u);
    EXPECT_EQ(seen[0].type, EventType::reward);
    EXPECT_EQ(seen[1].type, EventType::block);
    EXPECT_EQ(seen[2].type, EventType::add_resource);
    EXPECT_EQ(seen[3].type, EventType::unblock);
    EXPECT_EQ(seen[4].type, EventType::block);
    EXPECT_TRUE(w.blocked.count("m"));
}

TEST(Events, TickZeroEventsFireAtInit) {
    auto d = small_world(1.0, 0);
    d["events"] = json::array({{{"tick", 0}, {"type", "block"}, {"means", "m"}}});
    auto w = init_world(scenario_of(d), 1);
    EXPECT_TRUE(w.blocked.count("m"));
    EXPECT_EQ(w.fired.size(), 1u);
}

namespace {

// Random trajectory: each tick try a random means (if feasible) then advance.
std::vector<std::string> random_trajectory(const Scenario& s, std::uint64_t seed, std::uint64_t choice_seed,
                                           std::vector<WorldState>* states = nullptr) {
    std::mt19937_64 choose(choice_seed);
    auto w = init_world(s, seed);
    std::vector<std::string> out;
    for (std::int64_t t = 0; t < s.horizon; ++t) {
        const auto& m = s.means[choose() % s.means.size()].means;
        if (!w.blocked.count(m.id) && m.cost <= w.resource) w = apply_action(w, s, m.id).world;
        w = tick(w, s);
        out.push_back(world_to_json(w).dump());
        if (states) states->push_back(w);
    }
    return out;
}

json fuzz_world(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    json d;
    d["horizon"] = 200;
    d["goals"] = {root_goal("a"), root_goal("b"), child_goal("a1", "a", 1), child_goal("b1", "b", 1)};
    json means = json::array();
    for (int i = 0; i < 4; ++i) {
        json m = means_for("m" + std::to_string(i), i % 2 ? "b" : "a1", 0.5, unit(rng), 4 * unit(rng));
        m["cost"] = unit(rng) < 0.5 ? 0.0 : unit(rng);
        if (i == 3) {
            m["serves"]["a"] = 0.5;
            m["expectancy"]["a"] = 0.5;
            m["p_true"]["a"] = unit(rng);
            m["losses"] = {"a"};
        }
        means.push_back(m);
    }
    d["means"] = means;
    d["drains"] = {{"a", unit(rng)}, {"b", unit(rng)}};
    d["initial"] = {{"reservoirs", {{"a", 10 * unit(rng)}, {"b", 10 * unit(rng)}}}, {"resource", 2.0}};
    d["params"] = {{"resource_regen", 0.3 * unit(rng)}, {"base_step", 3 * unit(rng) + 0.1}};
    json events = json::array();
    for (int i = 0; i < 10; ++i) {
        static const char* kinds[] = {"block", "unblock", "add_resource"};
        const char* k = kinds[rng() % 3];
        json e = {{"tick", static_cast<int>(rng() % 200)}, {"type", k}};
        if (std::string(k) == "add_resource")
            e["amount"] = unit(rng);
        else
            e["means"] = "m" + std::to_string(rng() % 4);
        events.push_back(e);
    }
    d["events"] = events;
    return d;
}

}  // namespace

TEST(WorldFuzz, ReservoirsStayInBounds) {
    std::mt19937_64 rng(61);
    for (int trial = 0; trial < 100; ++trial) {
        auto s = scenario_of(fuzz_world(rng));
        std::vector<WorldState> states;
        random_trajectory(s, trial, trial + 1000, &states);
        for (const auto& w : states) {
            for (const auto& [_, v] : w.reservoirs) {
                ASSERT_GE(v, 0.0);
                ASSERT_LE(v, s.world.cap);
            }
            ASSERT_GE(w.resource, 0.0);
            ASSERT_TRUE(std::is_sorted(w.pending.begin(), w.pending.end(),
                                       [](const auto& x, const auto& y) { return x.land_tick < y.land_tick; }));
        }
    }
}

TEST(WorldFuzz, TrajectoryIsDeterministic) {
    std::mt19937_64 rng(62);
    for (int trial = 0; trial < 30; ++trial) {
        auto s = scenario_of(fuzz_world(rng));
        EXPECT_EQ(random_trajectory(s, 5, 9), random_trajectory(s, 5, 9));
        EXPECT_NE(random_trajectory(s, 5, 9), random_trajectory(s, 6, 9));
    }
}

TEST(WorldFuzz, QueueMassIsConserved) {
    std::mt19937_64 rng(63);
    for (int trial = 0; trial < 100; ++trial) {
        auto s = scenario_of(fuzz_world(rng));
        std::vector<WorldState> states;
        random_trajectory(s, trial, trial, &states);
        for (const auto& w : states)
            ASSERT_NEAR(w.enqueued_mass, w.landed_mass + pending_mass(w), 1e-9 * (1.0 + std::abs(w.enqueued_mass)));
    }
}

TEST(WorldFuzz, EventsFireExactlyOnce) {
    std::mt19937_64 rng(64);
    for (int trial = 0; trial < 50; ++trial) {
        auto s = scenario_of(fuzz_world(rng));
        auto w = init_world(s, 1);
        std::vector<ScriptedEvent> fired = w.fired;
        for (std::int64_t t = 0; t < s.horizon; ++t) {
            w = tick(w, s);
            for (const auto& e : w.fired) ASSERT_EQ(e.tick, w.tick);
            fired.insert(fired.end(), w.fired.begin(), w.fired.end());
        }
        auto expected = s.events;
        std::stable_sort(expected.begin(), expected.end(), [](const auto& a, const auto& b) { return a.tick < b.tick; });
        EXPECT_EQ(fired, expected);
    }
}

TEST(ScenarioDocument, RoundTrips) {
    std::mt19937_64 rng(65);
    for (int trial = 0; trial < 50; ++trial) {
        auto s = scenario_of(fuzz_world(rng));
        EXPECT_EQ(load_scenario(scenario_to_json(s).dump()), s);
    }
    for (const char* name : {"symmetric.json", "dominant.json", "equifinality.json"}) {
        auto s = scenario_of(load_doc(name));
        EXPECT_EQ(load_scenario(scenario_to_json(s).dump()), s) << name;
    }
}

TEST(ScenarioDocument, RejectsBadFields) {
    auto d = small_world(1.3, 0);
    EXPECT_THROW(scenario_of(d), ValidationError);
    d = small_world(0.5, 0);
    d["events"] = json::array({{{"tick", 51}, {"type", "reward"}, {"salience", 1.0}}});
    EXPECT_THROW(scenario_of(d), ValidationError);
    d = small_world(0.5, 0);
    d["surprise"] = 1;
    EXPECT_THROW(scenario_of(d), ValidationError);
    d = small_world(0.5, 0);
    d["events"] = json::array({{{"tick", 2}, {"type", "block"}, {"means", "ghost"}}});
    EXPECT_THROW(scenario_of(d), ValidationError);
}
