#include "selfreg/arbitration.hpp"
#include "selfreg/regulation_dynamics.hpp"
#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace selfreg;
using selfreg::testing::depletion_steps;

namespace {

ShieldFatigueState at(double sigma, double boost = 0.0, int ticks = 0) {
    ShieldFatigueState s;
    s.sigma = sigma;
    s.override_boost = boost;
    s.override_ticks_left = ticks;
    return s;
}

// Pursue `held` against competitors every tick, feeding the selection's load
// back into fatigue. Returns the 1-based tick at which select first switches,
// or 0 if it never does within `limit`.
int ticks_until_switch(const EngineParams& p, const std::vector<Candidate>& list, ShieldFatigueState s,
                       int limit = 1000) {
    for (int t = 1; t <= limit; ++t) {
        auto sel = select(list, std::string("held"), effective_sigma(s, p), 1e9, p);
        if (sel.kind == SelectionKind::switch_) return t;
        s = fatigue_step(s, suppression_load(sel), p);
    }
    return 0;
}

}  // namespace

TEST(EffectiveSigma, Examples) {
    EngineParams p;
    EXPECT_DOUBLE_EQ(effective_sigma(at(0.4), p), 0.4);
    EXPECT_DOUBLE_EQ(effective_sigma(at(0.4, 0.3, 5), p), 0.7);
    EXPECT_DOUBLE_EQ(effective_sigma(at(0.9, 0.3, 5), p), 1.0);
    EXPECT_DOUBLE_EQ(effective_sigma(at(0.4, 0.3, 0), p), 0.4);
}

TEST(FatigueStep, Examples) {
    EngineParams p;
    p.delta_dep = 0.1;
    EXPECT_DOUBLE_EQ(fatigue_step(at(1.0), 1.0, p).sigma, 0.9);
    EXPECT_DOUBLE_EQ(fatigue_step(at(0.22), 1.0, p).sigma, 0.2);
    p.delta_rec = 0.05;
    EXPECT_DOUBLE_EQ(fatigue_step(at(0.5), 0.0, p).sigma, 0.55);
    EXPECT_TRUE(fatigue_step(at(0.5), 0.5, p).suppressing);
    EXPECT_FALSE(fatigue_step(at(0.5), 0.0, p).suppressing);
}

TEST(FatigueStep, OverrideCountsDownAndExpires) {
    EngineParams p;
    auto s = fatigue_step(at(0.5, 0.3, 2), 0.0, p);
    EXPECT_EQ(s.override_ticks_left, 1);
    EXPECT_DOUBLE_EQ(s.override_boost, 0.3);
    s = fatigue_step(s, 0.0, p);
    EXPECT_EQ(s.override_ticks_left, 0);
    EXPECT_EQ(s.override_boost, 0.0);
}

TEST(GrantOverride, Examples) {
    EngineParams p;
    auto base = at(0.5);
    EXPECT_EQ(grant_override(base, 0.0, 1.0, p), base);
    auto s = grant_override(base, 1.0, 1.0, p);
    EXPECT_DOUBLE_EQ(s.override_boost, 0.3);
    EXPECT_EQ(s.override_ticks_left, 20);
    EXPECT_DOUBLE_EQ(grant_override(base, 3.0, 1.0, p).override_boost, 0.5);
}

TEST(FatigueStep, DepletesInClosedFormStepCount) {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> dep(0.01, 0.3), lo(0.05, 0.5), hi(0.6, 1.0);
    for (int trial = 0; trial < 500; ++trial) {
        EngineParams p;
        if (trial > 0) {
            p.delta_dep = dep(rng);
            p.sigma_min = lo(rng);
            p.sigma_max = hi(rng);
        }
        auto s = initial_shield(p);
        int steps = 0;
        while (s.sigma > p.sigma_min) {
            auto next = fatigue_step(s, 1.0, p);
            ASSERT_LT(next.sigma, s.sigma);
            s = next;
            ++steps;
            ASSERT_LT(steps, 10000);
        }
        EXPECT_EQ(steps, depletion_steps(p.sigma_max, p.sigma_min, p.delta_dep));
        if (trial == 0) { EXPECT_EQ(steps, 16); }
    }
}

TEST(FatigueStep, RecoversMonotonicallyToMax) {
    EngineParams p;
    auto s = at(p.sigma_min);
    int steps = 0;
    while (s.sigma < p.sigma_max) {
        auto next = fatigue_step(s, 0.0, p);
        ASSERT_GT(next.sigma, s.sigma);
        s = next;
        ASSERT_LT(++steps, 10000);
    }
    EXPECT_EQ(steps, depletion_steps(p.sigma_max, p.sigma_min, p.delta_rec));
}

TEST(FatigueStep, SigmaStaysInBounds) {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    EngineParams p;
    for (int trial = 0; trial < 200; ++trial) {
        auto s = initial_shield(p);
        for (int t = 0; t < 300; ++t) {
            double load = unit(rng) < 0.3 ? 0.0 : unit(rng) * 2.0;
            if (unit(rng) < 0.02) s = grant_override(s, unit(rng) * 3, 0.5 + unit(rng), p);
            s = fatigue_step(s, load, p);
            ASSERT_GE(s.sigma, p.sigma_min);
            ASSERT_LE(s.sigma, p.sigma_max);
            ASSERT_GE(s.override_ticks_left, 0);
            if (s.override_boost > 0) { ASSERT_GT(s.override_ticks_left, 0); }
            ASSERT_LE(effective_sigma(s, p), p.sigma_max);
        }
    }
}

TEST(ForcedSwitch, HappensWithinTheFatigueBound) {
    std::mt19937_64 rng(43);
    std::uniform_real_distribution<double> u(0.01, 100.0);
    for (int trial = 0; trial < 300; ++trial) {
        EngineParams p;
        if (trial % 2) p.delta_dep = 0.02 + 0.2 * u(rng) / 100.0;
        const int bound = depletion_steps(p.sigma_max, p.sigma_min, p.delta_dep) + 1;
        std::vector<Candidate> list{{"held", 1000.0 + u(rng)}};
        for (int k = 0; k < 1 + trial % 4; ++k) list.push_back({"rival" + std::to_string(k), u(rng) / 100.0});
        const int t = ticks_until_switch(p, list, initial_shield(p));
        ASSERT_GT(t, 0);
        EXPECT_LE(t, bound);
    }
}

TEST(ForcedSwitch, OverrideDelaysByAtMostItsDuration) {
    EngineParams p;
    std::vector<Candidate> list{{"held", 50.0}, {"rival", 1.0}};
    const int bound = depletion_steps(p.sigma_max, p.sigma_min, p.delta_dep) + 1;
    const int plain = ticks_until_switch(p, list, initial_shield(p));
    EXPECT_EQ(plain, bound);
    for (int start = 0; start < plain; ++start) {
        // Grant the override `start` ticks into the pursuit.
        auto s = initial_shield(p);
        for (int i = 0; i < start; ++i) s = fatigue_step(s, 1.0, p);
        s = grant_override(s, 1.0, 1.0, p);
        const int rest = ticks_until_switch(p, list, s);
        ASSERT_GT(rest, 0);
        const int total = start + rest;
        EXPECT_GE(total, plain);
        EXPECT_LE(total, bound + p.override_duration);
    }
}
