#pragma once

#include <string>
#include <vector>

#include "repsim/netsim.hpp"
#include "repsim/trace.hpp"

namespace repsim {

struct Violation {
    std::string check;
    std::size_t line = 0;  // 1-based trace line, 0 when not line-anchored
    std::string detail;
};

struct TraceReport {
    std::vector<std::pair<std::string, bool>> checks;  // name -> passed
    std::vector<Violation> violations;
    bool pass() const { return violations.empty(); }
};

// Mechanizes the protocol invariants over a trace: status-transition
// legality, per-epoch prefix consistency, single-primary stabilization,
// fault-free message-count constants, read-your-writes, FIFO and causality.
TraceReport verify_trace(const ParsedTrace& trace);

struct ConvergenceReport {
    bool pass = false;
    std::string detail;  // first divergence, or "converged"
};

// PASS iff all live replicas carry identical applied logs (as
// (epoch, counter, request id) sequences), identical stores, and empty
// pending tables.
ConvergenceReport check_convergence(const World& world);

}  // namespace repsim
