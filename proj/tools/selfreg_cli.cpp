// selfreg: run, validate, and sweep self-regulation scenarios.
//
//   selfreg run      --scenario PATH --seed N [--steps N] [--trace PATH] [--metrics PATH]
//   selfreg validate --scenario PATH
//   selfreg sweep    --scenario PATH --seeds A..B --out PATH [--steps N] [--jobs N]
//
// Exit codes: 0 success, 1 invalid scenario or input, 2 runtime invariant violation.

#include "selfreg/selfreg.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kRuntime = 2;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw selfreg::ParseError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << text;
}

// "A..B" inclusive.
std::vector<std::uint64_t> parse_seed_range(const std::string& range) {
    auto dots = range.find("..");
    if (dots == std::string::npos) throw selfreg::ParseError("seed range must look like A..B");
    std::uint64_t a = 0, b = 0;
    try {
        std::size_t used_a = 0, used_b = 0;
        a = std::stoull(range.substr(0, dots), &used_a);
        b = std::stoull(range.substr(dots + 2), &used_b);
        if (used_a != dots || used_b != range.size() - dots - 2) throw std::invalid_argument(range);
    } catch (const std::logic_error&) {
        throw selfreg::ParseError("seed range must look like A..B, got '" + range + "'");
    }
    if (b < a) throw selfreg::ParseError("empty seed range '" + range + "'");
    std::vector<std::uint64_t> seeds;
    for (std::uint64_t s = a; s <= b; ++s) seeds.push_back(s);
    return seeds;
}

void report(const std::vector<std::string>& violations) {
    for (const auto& v : violations) std::cerr << "  - " << v << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-goal self-regulation engine"};
    app.require_subcommand(1);

    std::string scenario_path, trace_path, metrics_path, out_path, seeds_spec;
    std::uint64_t seed = 0;
    std::int64_t steps = 0;
    unsigned jobs = 1;

    auto* run = app.add_subcommand("run", "Run one episode");
    run->add_option("--scenario", scenario_path, "Scenario document")->required();
    run->add_option("--seed", seed, "RNG seed")->required();
    auto* run_steps = run->add_option("--steps", steps, "Override the scenario horizon");
    run->add_option("--trace", trace_path, "Write the trace (one JSON record per tick)");
    run->add_option("--metrics", metrics_path, "Write episode metrics (JSON)");

    auto* validate = app.add_subcommand("validate", "Check a scenario without running it");
    validate->add_option("--scenario", scenario_path, "Scenario document")->required();

    auto* sw = app.add_subcommand("sweep", "Run one episode per seed and tabulate metrics");
    sw->add_option("--scenario", scenario_path, "Scenario document")->required();
    sw->add_option("--seeds", seeds_spec, "Inclusive seed range A..B")->required();
    sw->add_option("--out", out_path, "Write the metrics table (JSON)")->required();
    auto* sweep_steps = sw->add_option("--steps", steps, "Override the scenario horizon");
    sw->add_option("--jobs", jobs, "Episodes to run in parallel")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kInvalid;
    }

    try {
        const std::string text = read_file(scenario_path);
        if (validate->parsed()) {
            auto violations = selfreg::validate_scenario(text);
            if (violations.empty()) {
                std::cout << "ok\n";
                return kOk;
            }
            std::cerr << scenario_path << ": " << violations.size() << " violation(s)\n";
            report(violations);
            return kInvalid;
        }

        const selfreg::Scenario scenario = selfreg::load_scenario(text);
        std::optional<std::int64_t> horizon;
        if (run_steps->count() > 0 || sweep_steps->count() > 0) horizon = steps;

        if (run->parsed()) {
            auto trace = selfreg::run_episode(scenario, seed, horizon);
            auto metrics = selfreg::compute_metrics(trace);
            if (!trace_path.empty()) write_file(trace_path, selfreg::trace_to_jsonl(trace));
            const std::string mj = selfreg::metrics_to_json(metrics).dump(2) + "\n";
            if (!metrics_path.empty())
                write_file(metrics_path, mj);
            else
                std::cout << mj;
            return kOk;
        }

        if (sw->parsed()) {
            auto rows = selfreg::sweep(scenario, parse_seed_range(seeds_spec), horizon, jobs);
            write_file(out_path, selfreg::sweep_to_json(rows).dump(2) + "\n");
            std::cout << rows.size() << " episode(s) written to " << out_path << '\n';
            return kOk;
        }
    } catch (const selfreg::ValidationError& e) {
        std::cerr << "invalid input\n";
        report(e.violations());
        return kInvalid;
    } catch (const selfreg::ParseError& e) {
        std::cerr << e.what() << '\n';
        return kInvalid;
    } catch (const selfreg::InvariantViolation& e) {
        std::cerr << "invariant violation: " << e.what() << '\n';
        return kRuntime;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kRuntime;
    }
    return kOk;
}
