#pragma once

#include <optional>
#include <string>
#include <vector>

#include "repsim/lsn.hpp"
#include "repsim/status.hpp"

namespace repsim {

struct WriteRequest {
    std::string request_id;  // unique per scenario; replicas dedup on it
    std::string client;
    std::string key;
    std::string value;
    ServerId entry_server;  // the server whose client ack closes this write

    auto operator<=>(const WriteRequest&) const = default;
};

// A write's traveling state across the phases.
struct TransactionRecord {
    WriteRequest request;
    std::optional<Lsn> secondary_lsn;
    std::optional<Lsn> primary_lsn;
    std::optional<Status> status;
};

// One committed write as stored in a replica's log; primary_code identifies
// the server that assigned the primary LSN in that epoch.
struct LogEntry {
    std::int64_t epoch = 0;
    std::int64_t counter = 0;
    ServerId primary_code;
    WriteRequest request;

    LsnKey key() const { return LsnKey{epoch, counter}; }
    Lsn primary_lsn() const { return Lsn{'P', primary_code, epoch, counter}; }
};

enum class MessageKind {
    ForwardWrite,      // entry secondary -> parent -> primary
    CommitBroadcast,   // primary -> sync secondaries
    CommitToSemi,      // sync -> its children (or primary -> orphaned semis)
    AckToPrimary,      // sync -> primary, closes the synchronous wait
    AckToSyncParent,   // semi -> its parent, bookkeeping only
    ClientWrite,       // client -> entry server
    ClientWriteAck,    // entry server -> client
    ClientRead,        // client -> any server
    ClientReadReply,   // server -> client
    Heartbeat,
    CatchUpRequest,    // recovering/lagging server -> parent or primary
    CatchUpTransfer,   // log suffix back to the requester
    RedirectError,     // write rejected in ReadOnly mode; names the primary
};

const char* message_kind_name(MessageKind k);

struct HeartbeatInfo {
    std::int64_t epoch = 0;
    ServerId primary;               // sender's view of the current primary
    std::string sender_mode;        // "rw" | "ro"
    LsnKey last_committed;          // sender's log end, for anti-entropy
};

struct Message {
    MessageKind kind;
    EndpointId from;
    EndpointId to;
    std::uint64_t id = 0;  // stamped at schedule time; pairs send/deliver

    std::optional<TransactionRecord> record;

    // kind-specific payloads
    std::optional<HeartbeatInfo> heartbeat;
    std::optional<LsnKey> catchup_from;            // CatchUpRequest: requester log end
    std::vector<LogEntry> entries;                 // CatchUpTransfer
    std::optional<LsnKey> sender_end;              // CatchUpTransfer: sender log end
    std::optional<std::int64_t> epoch;             // CatchUpTransfer
    std::optional<ServerId> primary;               // CatchUpTransfer / RedirectError
    std::vector<std::pair<std::int64_t, ServerId>> reigns;  // epoch -> primary
    std::optional<std::string> key;                // ClientRead / ClientReadReply
    std::optional<std::string> value;              // ClientReadReply
    std::optional<bool> found;                     // ClientReadReply
    std::optional<std::string> read_id;            // ClientRead / ClientReadReply
};

}  // namespace repsim
