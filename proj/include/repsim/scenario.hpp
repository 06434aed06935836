#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "repsim/server_id.hpp"

namespace repsim {

struct ScenarioOp {
    TimeMs at = 0;
    std::string client;
    std::string server;  // entry server code
    bool is_write = true;
    std::string id;  // request id; defaults to w<n> / r<n>
    std::string key;
    std::string value;
};

struct ScenarioFault {
    TimeMs at = 0;
    bool crash = true;  // false = recover
    std::string server;
};

struct LinkOverride {
    EndpointId from;
    EndpointId to;
    TimeMs latency_ms = 0;
};

// A full simulation input: topology parameters, timing, client ops, faults.
struct Scenario {
    int branches = 4;
    int semis_per_branch = 3;
    std::vector<int> priorities = {1, 2, 3, 4};
    TimeMs default_latency_ms = 10;
    TimeMs client_latency_ms = 5;
    TimeMs heartbeat_ms = 50;
    TimeMs session_timeout_ms = 200;
    TimeMs client_retry_ms = 1000;
    TimeMs max_time_ms = 10000;
    TimeMs jitter_ms = 0;
    std::uint64_t seed = 1;
    std::vector<LinkOverride> links;
    std::vector<ScenarioOp> ops;
    std::vector<ScenarioFault> faults;
};

// Parses and validates; throws LoadError naming the offending entry.
Scenario parse_scenario(const std::string& json_text);
Scenario load_scenario(const std::string& path);
std::string scenario_to_json(const Scenario& s);

// Validation shared by the parser and programmatic construction.
void validate_scenario(Scenario& s);

}  // namespace repsim
