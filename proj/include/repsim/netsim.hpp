#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <queue>
#include <random>
#include <string>
#include <vector>

#include "repsim/replica.hpp"
#include "repsim/scenario.hpp"
#include "repsim/trace.hpp"

namespace repsim {

// One timed client operation as it travels through the simulator.
struct ClientOp {
    TimeMs at = 0;
    std::string client;
    ServerId entry;
    bool is_write = true;
    std::string rid;
    std::string key;
    std::string value;
    int attempt = 1;
};

struct SimEvent {
    TimeMs at = 0;
    std::uint64_t seq = 0;  // breaks ties: lower seq first
    enum class Kind { Deliver, Timer, Crash, Recover, ClientOp } kind = Kind::Timer;
    Message msg;     // Deliver
    ServerId server; // Timer / Crash / Recover
    ClientOp op;     // ClientOp
};

enum class RunReason { Quiescent, MaxTime };

const char* run_reason_name(RunReason r);

// Deterministic discrete-event world: replicas, clients, and an event queue
// delivering messages over reliable FIFO links with per-pair latency and
// optional seeded jitter. Strictly single-threaded.
class World {
  public:
    explicit World(const Scenario& scenario);

    TimeMs now() const { return now_; }
    const RegionTopology& topology() const { return *topo_; }
    const std::vector<TraceRecord>& trace() const { return trace_; }
    const Scenario& scenario() const { return scenario_; }

    Replica& replica(const ServerId& id);
    const Replica& replica(const ServerId& id) const;
    std::vector<const Replica*> replicas() const;

    // Enqueues an event; events may never be scheduled in the past.
    void schedule(SimEvent ev);

    // Pops and dispatches the minimal (at, seq) event. False when empty.
    bool step();

    bool quiescent() const;
    RunReason run_until_quiescent();
    RunReason run_reason() const { return reason_; }

    // down links silently drop at send time (tests only; scenarios use faults)
    void set_link_up(const EndpointId& a, const EndpointId& b, bool up);

  private:
    void dispatch_deliver(const SimEvent& ev);
    void dispatch_timer(const SimEvent& ev);
    void dispatch_client_op(const SimEvent& ev, bool is_retry);
    void emit_out(const ServerId& server, Out&& out);
    void send_message(Message msg);
    void deliver_to_client(const Message& msg);
    void sweep_client_retries(TimeMs now);
    ServerId route(const ServerId& requested) const;
    TimeMs link_delay(const EndpointId& from, const EndpointId& to);
    void record(TimeMs at, const std::string& endpoint, const std::string& tag,
                std::vector<std::pair<std::string, std::string>> fields);
    void note_scheduled(const SimEvent& ev, int delta);

    Scenario scenario_;
    std::unique_ptr<RegionTopology> topo_;
    std::map<ServerId, Replica> replicas_;

    struct EventOrder {
        bool operator()(const SimEvent& a, const SimEvent& b) const {
            if (a.at != b.at) return a.at > b.at;
            return a.seq > b.seq;
        }
    };
    std::priority_queue<SimEvent, std::vector<SimEvent>, EventOrder> queue_;
    std::uint64_t next_seq_ = 0;
    std::uint64_t next_msg_id_ = 0;
    TimeMs now_ = 0;
    RunReason reason_ = RunReason::Quiescent;

    std::map<std::pair<EndpointId, EndpointId>, TimeMs> fifo_floor_;
    std::map<std::pair<EndpointId, EndpointId>, bool> link_up_;
    std::mt19937_64 rng_;

    struct PendingClientOp {
        ClientOp op;
        TimeMs deadline = 0;
    };
    std::map<std::string, PendingClientOp> unresolved_;  // rid -> op

    std::vector<TraceRecord> trace_;
    long pending_protocol_ = 0;    // queued non-heartbeat delivers
    long pending_disruptive_ = 0;  // queued crash/recover/clientop events
    TimeMs settle_horizon_ = 0;    // quiet window after the last fault
};

}  // namespace repsim
