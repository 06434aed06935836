#pragma once

#include <string>
#include <utility>
#include <vector>

#include "repsim/message.hpp"
#include "repsim/scenario.hpp"

namespace repsim {

// One trace line: `t=<ms> <endpoint> <tag> k=v ...`. Every processed event
// and every emitted message produces one record; field order is stable and
// a `status` field, whose value contains spaces, is always last.
struct TraceRecord {
    TimeMs at = 0;
    std::string endpoint;
    std::string tag;
    std::vector<std::pair<std::string, std::string>> fields;

    const std::string* field(const std::string& key) const;
};

std::string render_trace_record(const TraceRecord& r);
TraceRecord parse_trace_line(const std::string& line);

// Header lines (`# k v ...`) carry the scenario shape for the checker.
std::vector<std::string> trace_header(const Scenario& s);
std::string render_trace(const Scenario& s, const std::vector<TraceRecord>& recs);

struct ParsedTrace {
    int branches = 4;
    int semis = 3;
    TimeMs heartbeat_ms = 50;
    TimeMs session_timeout_ms = 200;
    std::size_t fault_count = 0;
    std::vector<TraceRecord> records;
    std::vector<std::size_t> line_numbers;  // 1-based, parallel to records
};

ParsedTrace parse_trace(const std::string& text);

// Stable field ordering for message send/deliver lines.
std::vector<std::pair<std::string, std::string>> message_fields(const Message& m);

}  // namespace repsim
