#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "repsim/message.hpp"
#include "repsim/topology.hpp"

namespace repsim {

enum class Mode { ReadWrite, ReadOnly, Down };

const char* mode_name(Mode m);  // "rw" | "ro" | "down"

// Heartbeat-driven failure detection with a session timeout. A peer is
// suspected once it has been silent for longer than session_timeout_ms at a
// check; any message from it clears the suspicion.
struct FailureDetector {
    std::map<ServerId, TimeMs> last_heard;
    std::set<ServerId> suspected;
};

struct TimingConfig {
    TimeMs heartbeat_period_ms = 50;
    TimeMs session_timeout_ms = 200;
};

// One structured trace event produced inside a handler; the simulator
// prefixes time and server id when rendering.
struct TraceEvent {
    std::string tag;
    std::vector<std::pair<std::string, std::string>> fields;
};

// Handler output: protocol messages to servers, replies to clients, and
// trace events. Handlers never block and never touch other replicas.
struct Out {
    std::vector<Message> messages;
    std::vector<Message> replies;
    std::vector<TraceEvent> events;

    void merge(Out&& other);
};

struct BufferedCommit {
    TransactionRecord record;
    ServerId from;
};

// Everything a server carries. applied_log / store / write_counter / epoch /
// reigns survive a crash (durable); the rest is volatile and reset on
// recovery.
struct ReplicaState {
    ServerId id;
    Role role = Role::SemiSyncSecondary;
    Mode mode = Mode::ReadWrite;
    std::int64_t epoch = 0;
    std::int64_t write_counter = 1;  // next LSN counter for (id, epoch)
    std::vector<LogEntry> applied_log;
    std::map<std::string, std::string> store;
    std::map<std::int64_t, std::int64_t> epoch_max;  // applied prefix per epoch
    std::map<std::string, LsnKey> committed_rids;    // request dedup index

    std::map<std::string, TransactionRecord> pending;   // rid -> record
    std::map<LsnKey, BufferedCommit> commit_buffer;     // out-of-order holds
    std::map<LsnKey, std::set<ServerId>> ack_wait;      // primary only
    std::map<std::string, std::string> origin_wait;     // rid -> client
    std::map<LsnKey, int> semi_acks;                    // sync bookkeeping
    std::map<std::string, ServerId> forwarded_from;     // relay bookkeeping

    FailureDetector detector;
    std::map<ServerId, std::string> peer_modes;  // last heartbeat mode
    ServerId known_primary = primary_id();
    std::map<std::int64_t, ServerId> reigns;  // epoch -> primary (durable)
    std::optional<TimeMs> primary_suspected_at;

    bool catchup_pending = false;
    TimeMs catchup_sent_at = 0;
    int catchup_attempts = 0;
};

// Per-server state machine. Handlers are deterministic functions of
// (state, input, now); all emission orders are fixed.
class Replica {
  public:
    Replica(const RegionTopology* topo, ServerId id, TimingConfig timing);

    const ReplicaState& state() const { return st_; }
    ReplicaState& mutable_state() { return st_; }
    ServerId id() const { return st_.id; }
    Mode mode() const { return st_.mode; }
    Role role() const { return st_.role; }

    // --- protocol handlers (one per message kind) ---
    Out on_client_write(const WriteRequest& req, TimeMs now);
    Out on_client_read(const std::string& client, const std::string& read_id,
                       const std::string& key, TimeMs now);
    Out on_forward_write(TransactionRecord rec, const ServerId& from, TimeMs now);
    Out on_primary_commit(TransactionRecord rec, const ServerId& from, TimeMs now);
    Out on_sync_ack(const TransactionRecord& rec, const ServerId& from, TimeMs now);
    Out on_semi_ack(const TransactionRecord& rec, const ServerId& from, TimeMs now);
    Out on_heartbeat(const ServerId& from, const HeartbeatInfo& info, TimeMs now);
    Out on_catchup_request(const ServerId& from, const LsnKey& requester_end,
                           TimeMs now);
    Out on_catchup_transfer(const ServerId& from, const Message& msg, TimeMs now);

    // Dispatches by kind and refreshes the failure detector for the sender.
    Out on_message(const Message& msg, TimeMs now);

    // --- timers and faults ---
    Out heartbeat_messages(TimeMs now);      // heartbeats to protocol neighbors
    Out detect_failures(TimeMs now);         // session-timeout sweep
    Out on_timer(TimeMs now);                // heartbeats + detection + retries
    Out on_crash(TimeMs now);
    Out on_recover(TimeMs now);

    // --- views used by tests and the harness ---
    LsnKey log_end() const;
    bool is_applied(const LsnKey& k) const;
    // Sync membership as this replica sees it: effective rank per server,
    // ascending; excludes the current primary. Demoted ex-primaries rank
    // after the static syncs.
    std::vector<std::pair<int, ServerId>> ranked_syncs() const;
    std::optional<int> effective_rank(const ServerId& s) const;

  private:
    Out make_heartbeat(const ServerId& to, TimeMs now) const;
    void commit_as_primary(TransactionRecord rec, TimeMs now, Out& out);
    void apply_record(const TransactionRecord& rec, TimeMs now, Out& out,
                      const char* src);
    void apply_commit_in_order(TransactionRecord rec, const ServerId& from,
                               TimeMs now, Out& out);
    void drain_buffer(TimeMs now, Out& out);
    void adopt_epoch(std::int64_t epoch, const ServerId& primary, TimeMs now,
                     Out& out);
    void promote(TimeMs now, Out& out);
    void recompute_mode(TimeMs now, Out& out, const char* reason);
    void finish_commit(const LsnKey& k, const TransactionRecord& rec, TimeMs now,
                       Out& out);
    void suspect(const ServerId& peer, TimeMs now, Out& out);
    void refresh_peer(const ServerId& peer, TimeMs now, Out& out);
    std::vector<ServerId> live_sync_targets() const;
    std::vector<ServerId> direct_semi_targets() const;
    std::vector<ServerId> monitored_peers() const;
    std::vector<ServerId> heartbeat_targets() const;
    ServerId catchup_target() const;
    void start_catchup(const ServerId& to, TimeMs now, Out& out);
    Message record_message(MessageKind kind, const ServerId& to,
                           TransactionRecord rec) const;
    Message reply_message(MessageKind kind, const std::string& client) const;

    const RegionTopology* topo_;
    TimingConfig timing_;
    ReplicaState st_;
};

}  // namespace repsim
