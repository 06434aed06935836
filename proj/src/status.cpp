#include "repsim/status.hpp"

#include <array>

#include "repsim/errors.hpp"

namespace repsim {

namespace {

const std::array<std::string, 5> kStatusText = {
    "pending from Secondary in semi synchronous replication level",
    "pending from Secondary in synchronous replication level",
    "Primary commit",
    "acknowledgement from synchronous replication Level",
    "acknowledgement from semi synchronous replication Level",
};

}  // namespace

const std::string& status_text(Status s) {
    return kStatusText[static_cast<std::size_t>(s)];
}

Status parse_status(const std::string& text) {
    for (std::size_t i = 0; i < kStatusText.size(); ++i)
        if (kStatusText[i] == text) return static_cast<Status>(i);
    throw ParseError("unknown status '" + text + "'");
}

Status determine_status(Role role, StatusEvent event) {
    if (role == Role::SemiSyncSecondary && event == StatusEvent::ClientWriteAccepted)
        return Status::PendingSemiSync;
    if (role == Role::SyncSecondary && event == StatusEvent::ForwardReceived)
        return Status::PendingSync;
    if (role == Role::Primary && event == StatusEvent::WriteApplied)
        return Status::PrimaryCommit;
    if (role == Role::SyncSecondary && event == StatusEvent::CommitApplied)
        return Status::AckSync;
    if (role == Role::SemiSyncSecondary && event == StatusEvent::CommitApplied)
        return Status::AckSemiSync;
    throw ProtocolError(std::string("no status for role ") + role_name(role) +
                        " event " + std::to_string(static_cast<int>(event)));
}

bool allowed_transition(std::optional<Status> from, Status to) {
    if (!from)
        return to == Status::PendingSemiSync || to == Status::PendingSync ||
               to == Status::PrimaryCommit;
    switch (*from) {
        case Status::PendingSemiSync: return to == Status::PendingSync;
        case Status::PendingSync: return to == Status::PrimaryCommit;
        case Status::PrimaryCommit:
            return to == Status::AckSync || to == Status::AckSemiSync;
        case Status::AckSync: return to == Status::AckSemiSync;
        case Status::AckSemiSync: return false;
    }
    return false;
}

}  // namespace repsim
