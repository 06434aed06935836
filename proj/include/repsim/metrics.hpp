#pragma once

#include <map>
#include <string>
#include <vector>

#include "repsim/trace.hpp"

namespace repsim {

struct WriteMetric {
    std::string rid;
    std::string client;
    std::string entry;    // server the scenario addressed
    std::string routed;   // server that actually took the last attempt
    TimeMs sent_at = -1;
    TimeMs acked_at = -1;  // -1: never acknowledged
    int attempts = 0;
    long messages = 0;  // protocol messages carrying this request id
    std::string plsn;
    std::int64_t epoch = -1;

    TimeMs latency() const { return acked_at < 0 ? -1 : acked_at - sent_at; }
};

struct ReadMetric {
    std::string rid;
    std::string client;
    std::string server;
    std::string key;
    TimeMs sent_at = -1;
    TimeMs replied_at = -1;
    bool found = false;
    std::string value;
};

struct ServerCounters {
    long applied = 0;
    long reads = 0;
};

struct ModeChange {
    TimeMs at = 0;
    std::string server;
    std::string mode;
};

struct Promotion {
    TimeMs at = 0;
    std::string server;
    std::int64_t epoch = 0;
};

struct Metrics {
    std::vector<WriteMetric> writes;
    std::vector<ReadMetric> reads;
    std::map<std::string, ServerCounters> servers;
    std::vector<ModeChange> availability;
    std::vector<Promotion> promotions;
    TimeMs end_time = 0;
    std::string reason;

    const WriteMetric* write(const std::string& rid) const;
};

Metrics build_metrics(const std::vector<TraceRecord>& records,
                      const std::vector<std::string>& server_codes,
                      TimeMs end_time, const std::string& reason);

std::string metrics_to_json(const Metrics& m);

}  // namespace repsim
