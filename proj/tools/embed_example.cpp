// Minimal embedding: load a scenario, run one episode, print where the
// time went and every forced switch.
//
//   selfreg_example scenarios/default.json 7

#include "selfreg/selfreg.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: " << argv[0] << " SCENARIO [SEED]\n";
        return 1;
    }
    std::ifstream in(argv[1]);
    std::stringstream text;
    text << in.rdbuf();
    const std::uint64_t seed = argc > 2 ? std::stoull(argv[2]) : 1;

    try {
        const selfreg::Scenario scenario = selfreg::load_scenario(text.str());
        const selfreg::Trace trace = selfreg::run_episode(scenario, seed);
        const selfreg::Metrics m = selfreg::compute_metrics(trace);

        for (const auto& e : trace.events)
            if (e.forced_switch)
                std::cout << "tick " << e.tick << ": shield gave out, " << e.switch_from.value_or("-") << " -> "
                          << *e.switch_to << '\n';
        std::cout << "\nticks per root need:\n";
        for (const auto& [root, ticks] : m.root_ticks) std::cout << "  " << root << '\t' << ticks << '\n';
        std::cout << "monomania " << m.monomania_index << ", entropy " << m.allocation_entropy << '\n';
    } catch (const selfreg::ValidationError& e) {
        for (const auto& v : e.violations()) std::cerr << v << '\n';
        return 1;
    }
    return 0;
}
