#include "repsim/runner.hpp"

namespace repsim {

RunResult run_scenario(const Scenario& scenario) {
    RunResult r;
    r.world = std::make_unique<World>(scenario);
    r.reason = r.world->run_until_quiescent();
    return r;
}

std::string RunResult::trace_text() const {
    return render_trace(world->scenario(), world->trace());
}

Metrics RunResult::metrics() const {
    std::vector<std::string> codes;
    for (const auto& s : world->topology().servers()) codes.push_back(s.code());
    return build_metrics(world->trace(), codes, world->now(),
                         run_reason_name(reason));
}

std::string RunResult::metrics_json() const { return metrics_to_json(metrics()); }

}  // namespace repsim
