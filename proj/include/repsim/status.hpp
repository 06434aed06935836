#pragma once

#include <optional>
#include <string>

#include "repsim/server_id.hpp"

namespace repsim {

// The five transaction status values. The renderings are frozen verbatim,
// including the inconsistent "Level"/"level" capitalization; traces carry
// them bit-exact.
enum class Status {
    PendingSemiSync,
    PendingSync,
    PrimaryCommit,
    AckSync,
    AckSemiSync,
};

const std::string& status_text(Status s);
Status parse_status(const std::string& text);

// Per-phase transaction event observed by a replica.
enum class StatusEvent {
    ClientWriteAccepted,
    ForwardReceived,
    WriteApplied,
    CommitApplied,
};

// Table-driven status assignment, total on its five-row domain; any other
// (role, event) pair throws ProtocolError.
Status determine_status(Role role, StatusEvent event);

// Legal forward steps of a record's status. `from` is empty for a freshly
// accepted request. Sync-entry writes start directly at PendingSync and a
// semi applies a commit that still carries PrimaryCommit, so both of those
// first steps are legal alongside the adjacent chain edges.
bool allowed_transition(std::optional<Status> from, Status to);

}  // namespace repsim
