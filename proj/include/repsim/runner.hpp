#pragma once

#include <memory>
#include <string>

#include "repsim/checker.hpp"
#include "repsim/metrics.hpp"
#include "repsim/netsim.hpp"

namespace repsim {

struct RunResult {
    std::unique_ptr<World> world;
    RunReason reason = RunReason::Quiescent;

    std::string trace_text() const;
    Metrics metrics() const;
    std::string metrics_json() const;
};

// Runs the scenario to quiescence (or max_time) on a fresh world.
RunResult run_scenario(const Scenario& scenario);

}  // namespace repsim
