// repsim: scenario runner and trace checker for the region replication
// simulator. Subcommands: run, check, converge.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "repsim/checker.hpp"
#include "repsim/runner.hpp"

namespace fs = std::filesystem;

namespace {

std::string resolve_scenario_path(const std::string& given) {
    if (fs::exists(given)) return given;
    const char* dir = std::getenv("REPSIM_SCENARIO_DIR");
    if (dir) {
        for (const auto& candidate :
             {fs::path(dir) / given, fs::path(dir) / (given + ".json")})
            if (fs::exists(candidate)) return candidate.string();
    }
    return given;  // let the loader produce the error
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

int print_trace_report(const repsim::TraceReport& report) {
    for (const auto& [name, ok] : report.checks)
        std::cout << (ok ? "PASS " : "FAIL ") << name << "\n";
    for (const auto& v : report.violations)
        std::cout << "  violation [" << v.check << "] line " << v.line << ": "
                  << v.detail << "\n";
    return report.pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"region replication protocol simulator"};
    app.require_subcommand(1);

    std::string scenario_path, trace_out, metrics_out, trace_in;
    std::uint64_t seed = 0;
    bool seed_set = false;

    auto* run = app.add_subcommand("run", "run a scenario, emit trace and metrics");
    run->add_option("--scenario", scenario_path, "scenario JSON file")->required();
    auto* seed_opt = run->add_option("--seed", seed, "override the scenario seed");
    run->add_option("--trace", trace_out, "trace output path");
    run->add_option("--metrics", metrics_out, "metrics JSON output path");

    auto* check = app.add_subcommand("check", "verify protocol invariants on a trace");
    check->add_option("--trace", trace_in, "trace file")->required();

    auto* converge = app.add_subcommand("converge",
                                        "run a scenario and check replica convergence");
    converge->add_option("--scenario", scenario_path, "scenario JSON file")->required();
    auto* cseed_opt = converge->add_option("--seed", seed, "override the scenario seed");

    CLI11_PARSE(app, argc, argv);
    seed_set = seed_opt->count() > 0 || cseed_opt->count() > 0;

    try {
        if (run->parsed()) {
            repsim::Scenario s =
                repsim::load_scenario(resolve_scenario_path(scenario_path));
            if (seed_set) s.seed = seed;
            repsim::RunResult result = repsim::run_scenario(s);
            if (!trace_out.empty()) write_file(trace_out, result.trace_text());
            if (!metrics_out.empty()) write_file(metrics_out, result.metrics_json());
            repsim::Metrics m = result.metrics();
            long acked = 0;
            for (const auto& w : m.writes)
                if (w.acked_at >= 0) ++acked;
            std::cout << "reason=" << repsim::run_reason_name(result.reason)
                      << " end=" << result.world->now() << "ms writes=" << m.writes.size()
                      << " acked=" << acked << " reads=" << m.reads.size() << "\n";
            return result.reason == repsim::RunReason::Quiescent ? 0 : 2;
        }
        if (check->parsed()) {
            repsim::ParsedTrace trace = repsim::parse_trace(read_file(trace_in));
            return print_trace_report(repsim::verify_trace(trace));
        }
        if (converge->parsed()) {
            repsim::Scenario s =
                repsim::load_scenario(resolve_scenario_path(scenario_path));
            if (seed_set) s.seed = seed;
            repsim::RunResult result = repsim::run_scenario(s);
            repsim::ConvergenceReport report =
                repsim::check_convergence(*result.world);
            std::cout << (report.pass ? "PASS " : "FAIL ") << "convergence: "
                      << report.detail << " (reason="
                      << repsim::run_reason_name(result.reason) << ")\n";
            return report.pass ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
