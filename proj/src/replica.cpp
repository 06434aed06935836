#include "repsim/replica.hpp"

#include <algorithm>

#include "repsim/errors.hpp"

namespace repsim {

namespace {

std::string key_text(const LsnKey& k) {
    return "e" + std::to_string(k.epoch) + "c" + std::to_string(k.counter);
}

TraceEvent ev(std::string tag,
              std::vector<std::pair<std::string, std::string>> fields) {
    return TraceEvent{std::move(tag), std::move(fields)};
}

}  // namespace

const char* mode_name(Mode m) {
    switch (m) {
        case Mode::ReadWrite: return "rw";
        case Mode::ReadOnly: return "ro";
        case Mode::Down: return "down";
    }
    return "?";
}

const char* message_kind_name(MessageKind k) {
    switch (k) {
        case MessageKind::ForwardWrite: return "ForwardWrite";
        case MessageKind::CommitBroadcast: return "CommitBroadcast";
        case MessageKind::CommitToSemi: return "CommitToSemi";
        case MessageKind::AckToPrimary: return "AckToPrimary";
        case MessageKind::AckToSyncParent: return "AckToSyncParent";
        case MessageKind::ClientWrite: return "ClientWrite";
        case MessageKind::ClientWriteAck: return "ClientWriteAck";
        case MessageKind::ClientRead: return "ClientRead";
        case MessageKind::ClientReadReply: return "ClientReadReply";
        case MessageKind::Heartbeat: return "Heartbeat";
        case MessageKind::CatchUpRequest: return "CatchUpRequest";
        case MessageKind::CatchUpTransfer: return "CatchUpTransfer";
        case MessageKind::RedirectError: return "RedirectError";
    }
    return "?";
}

void Out::merge(Out&& other) {
    for (auto& m : other.messages) messages.push_back(std::move(m));
    for (auto& r : other.replies) replies.push_back(std::move(r));
    for (auto& e : other.events) events.push_back(std::move(e));
}

Replica::Replica(const RegionTopology* topo, ServerId id, TimingConfig timing)
    : topo_(topo), timing_(timing) {
    st_.id = id;
    if (id.is_primary_id())
        st_.role = Role::Primary;
    else if (id.is_sync_id())
        st_.role = Role::SyncSecondary;
    else
        st_.role = Role::SemiSyncSecondary;
    st_.known_primary = topo->primary();
    st_.reigns[0] = topo->primary();
}

LsnKey Replica::log_end() const {
    return st_.applied_log.empty() ? LsnKey{0, 0} : st_.applied_log.back().key();
}

bool Replica::is_applied(const LsnKey& k) const {
    auto it = st_.epoch_max.find(k.epoch);
    return it != st_.epoch_max.end() && k.counter <= it->second;
}

std::optional<int> Replica::effective_rank(const ServerId& s) const {
    if (s == st_.known_primary) return std::nullopt;
    // latest reign, if any, demotes behind the static ranks
    std::optional<std::int64_t> last_reign;
    for (const auto& [e, p] : st_.reigns)
        if (p == s) last_reign = e;
    if (last_reign && *last_reign < st_.epoch)
        return static_cast<int>(topo_->branches().size()) +
               static_cast<int>(*last_reign) + 1;
    if (s.is_sync_id()) return topo_->priority_of(s);
    return std::nullopt;
}

std::vector<std::pair<int, ServerId>> Replica::ranked_syncs() const {
    std::vector<std::pair<int, ServerId>> out;
    std::set<ServerId> seen;
    for (const auto& b : topo_->branches()) {
        if (auto r = effective_rank(b.sync)) {
            out.emplace_back(*r, b.sync);
            seen.insert(b.sync);
        }
    }
    for (const auto& [e, p] : st_.reigns) {
        if (seen.count(p)) continue;
        if (auto r = effective_rank(p)) {
            out.emplace_back(*r, p);
            seen.insert(p);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<ServerId> Replica::live_sync_targets() const {
    std::vector<ServerId> out;
    for (const auto& [rank, s] : ranked_syncs())
        if (!st_.detector.suspected.count(s)) out.push_back(s);
    std::sort(out.begin(), out.end());
    return out;
}

// Semis the primary serves directly: children of suspected syncs plus, after
// a promotion, the primary's own former children.
std::vector<ServerId> Replica::direct_semi_targets() const {
    std::vector<ServerId> out;
    if (st_.role != Role::Primary) return out;
    for (const auto& c : topo_->children_of(st_.id)) out.push_back(c);
    for (const auto& [rank, s] : ranked_syncs())
        if (st_.detector.suspected.count(s))
            for (const auto& c : topo_->children_of(s)) out.push_back(c);
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<ServerId> Replica::monitored_peers() const {
    std::vector<ServerId> out;
    switch (st_.role) {
        case Role::Primary:
            for (const auto& [rank, s] : ranked_syncs()) out.push_back(s);
            for (const auto& c : topo_->children_of(st_.id)) out.push_back(c);
            break;
        case Role::SyncSecondary:
            out.push_back(st_.known_primary);
            for (const auto& c : topo_->children_of(st_.id)) out.push_back(c);
            break;
        case Role::SemiSyncSecondary:
            if (auto p = topo_->parent_of(st_.id)) out.push_back(*p);
            break;
    }
    return out;
}

std::vector<ServerId> Replica::heartbeat_targets() const {
    if (st_.role != Role::Primary) return monitored_peers();
    // the primary also heartbeats semis it serves directly, so orphans of a
    // downed sync can spot a stale log and catch up from it
    std::vector<ServerId> out;
    for (const auto& [rank, s] : ranked_syncs()) out.push_back(s);
    for (const auto& c : direct_semi_targets()) out.push_back(c);
    return out;
}

Out Replica::make_heartbeat(const ServerId& to, TimeMs now) const {
    (void)now;
    Out out;
    Message m;
    m.kind = MessageKind::Heartbeat;
    m.from = st_.id.code();
    m.to = to.code();
    m.heartbeat = HeartbeatInfo{st_.epoch, st_.known_primary,
                                mode_name(st_.mode), log_end()};
    out.messages.push_back(std::move(m));
    return out;
}

Message Replica::record_message(MessageKind kind, const ServerId& to,
                                TransactionRecord rec) const {
    Message m;
    m.kind = kind;
    m.from = st_.id.code();
    m.to = to.code();
    m.record = std::move(rec);
    return m;
}

Message Replica::reply_message(MessageKind kind, const std::string& client) const {
    Message m;
    m.kind = kind;
    m.from = st_.id.code();
    m.to = client;
    return m;
}

void Replica::recompute_mode(TimeMs now, Out& out, const char* reason) {
    if (st_.mode == Mode::Down) return;
    Mode next = Mode::ReadWrite;
    if (st_.catchup_pending) {
        next = Mode::ReadOnly;
    } else if (st_.role == Role::SemiSyncSecondary) {
        auto parent = topo_->parent_of(st_.id);
        if (parent) {
            auto pm = st_.peer_modes.find(*parent);
            bool parent_ro = pm != st_.peer_modes.end() && pm->second == "ro";
            if (st_.detector.suspected.count(*parent) || parent_ro)
                next = Mode::ReadOnly;
        }
    }
    if (next != st_.mode) {
        st_.mode = next;
        out.events.push_back(ev("mode", {{"m", mode_name(next)}, {"reason", reason}}));
        (void)now;
    }
}

void Replica::adopt_epoch(std::int64_t epoch, const ServerId& primary, TimeMs now,
                          Out& out) {
    if (epoch < st_.epoch) return;
    if (epoch == st_.epoch) {
        if (primary == st_.known_primary) return;
        // Same-epoch claim collision: the better pre-promotion rank wins.
        if (st_.role == Role::Primary && st_.known_primary == st_.id) {
            auto pre_rank = [&](const ServerId& s) -> std::optional<int> {
                std::optional<std::int64_t> last;
                for (const auto& [e, p] : st_.reigns)
                    if (p == s && e < epoch) last = e;
                if (last)
                    return static_cast<int>(topo_->branches().size()) +
                           static_cast<int>(*last) + 1;
                if (s.is_sync_id()) return topo_->priority_of(s);
                return std::nullopt;
            };
            auto mine = pre_rank(st_.id);
            auto theirs = pre_rank(primary);
            if (theirs && (!mine || *theirs < *mine)) {
                st_.role = Role::SyncSecondary;
                st_.known_primary = primary;
                st_.reigns[epoch] = primary;
                st_.write_counter = 1;
                st_.ack_wait.clear();
                out.events.push_back(ev("stepdown", {{"to", primary.code()},
                                                     {"epoch", std::to_string(epoch)}}));
            }
        }
        return;
    }
    st_.epoch = epoch;
    st_.known_primary = primary;
    st_.reigns[epoch] = primary;
    st_.write_counter = 1;
    st_.primary_suspected_at.reset();
    if (st_.role == Role::Primary && primary != st_.id) {
        // deposed: rejoin as a sync secondary, ranked after the static syncs
        st_.role = Role::SyncSecondary;
        st_.ack_wait.clear();
        out.events.push_back(ev("stepdown", {{"to", primary.code()},
                                             {"epoch", std::to_string(epoch)}}));
    }
    st_.detector.suspected.erase(primary);
    st_.detector.last_heard[primary] = now;
    out.events.push_back(ev("adopt", {{"epoch", std::to_string(epoch)},
                                      {"primary", primary.code()}}));
}

void Replica::promote(TimeMs now, Out& out) {
    st_.epoch += 1;
    st_.role = Role::Primary;
    st_.known_primary = st_.id;
    st_.reigns[st_.epoch] = st_.id;
    st_.write_counter = 1;
    st_.primary_suspected_at.reset();
    st_.ack_wait.clear();
    out.events.push_back(ev("promote", {{"epoch", std::to_string(st_.epoch)}}));
    recompute_mode(now, out, "promoted");
    // announce immediately; peers adopt the epoch on receipt
    for (const auto& t : heartbeat_targets()) out.merge(make_heartbeat(t, now));
}

void Replica::apply_record(const TransactionRecord& rec, TimeMs now, Out& out,
                           const char* src) {
    const Lsn& plsn = *rec.primary_lsn;
    LogEntry e{plsn.epoch, plsn.counter, plsn.server, rec.request};
    st_.applied_log.push_back(e);
    st_.store[rec.request.key] = rec.request.value;
    st_.epoch_max[e.epoch] = e.counter;
    st_.committed_rids[rec.request.request_id] = e.key();
    st_.pending.erase(rec.request.request_id);
    (void)now;
    out.events.push_back(ev("apply", {{"e", std::to_string(e.epoch)},
                                      {"c", std::to_string(e.counter)},
                                      {"plsn", format_lsn(plsn)},
                                      {"rid", rec.request.request_id},
                                      {"key", rec.request.key},
                                      {"val", rec.request.value},
                                      {"src", src}}));
}

void Replica::finish_commit(const LsnKey& k, const TransactionRecord& rec,
                            TimeMs now, Out& out) {
    out.events.push_back(ev("finish", {{"rid", rec.request.request_id},
                                       {"plsn", format_lsn(*rec.primary_lsn)}}));
    auto ow = st_.origin_wait.find(rec.request.request_id);
    if (ow != st_.origin_wait.end()) {
        Message ack = reply_message(MessageKind::ClientWriteAck, ow->second);
        ack.record = rec;
        ack.record->status = Status::PrimaryCommit;
        out.replies.push_back(std::move(ack));
        st_.origin_wait.erase(ow);
    }
    st_.ack_wait.erase(k);
    (void)now;
}

void Replica::commit_as_primary(TransactionRecord rec, TimeMs now, Out& out) {
    Lsn plsn{'P', st_.id, st_.epoch, st_.write_counter};
    st_.write_counter += 1;
    rec.primary_lsn = plsn;
    rec.status = determine_status(Role::Primary, StatusEvent::WriteApplied);
    apply_record(rec, now, out, "commit");

    const auto syncs = live_sync_targets();
    for (const auto& s : syncs)
        out.messages.push_back(record_message(MessageKind::CommitBroadcast, s, rec));
    for (const auto& s : direct_semi_targets())
        out.messages.push_back(record_message(MessageKind::CommitToSemi, s, rec));

    LsnKey k = key_of(plsn);
    if (!syncs.empty()) {
        st_.ack_wait[k] = std::set<ServerId>(syncs.begin(), syncs.end());
    } else {
        finish_commit(k, rec, now, out);
    }
}

Out Replica::on_client_write(const WriteRequest& req, TimeMs now) {
    Out out;
    if (st_.mode == Mode::Down) return out;
    if (req.entry_server != st_.id)
        throw ProtocolError("client write for " + req.entry_server.code() +
                            " delivered to " + st_.id.code());

    // Retried request that already committed here: ack straight away.
    auto done = st_.committed_rids.find(req.request_id);
    if (done != st_.committed_rids.end()) {
        const LsnKey k = done->second;
        TransactionRecord rec;
        rec.request = req;
        rec.primary_lsn = Lsn{'P', st_.reigns.at(k.epoch), k.epoch, k.counter};
        rec.status = st_.role == Role::Primary       ? Status::PrimaryCommit
                     : st_.role == Role::SyncSecondary ? Status::AckSync
                                                       : Status::AckSemiSync;
        Message ack = reply_message(MessageKind::ClientWriteAck, req.client);
        ack.record = rec;
        out.replies.push_back(std::move(ack));
        return out;
    }

    if (st_.mode == Mode::ReadOnly) {
        Message redir = reply_message(MessageKind::RedirectError, req.client);
        redir.primary = st_.known_primary;
        TransactionRecord rec;
        rec.request = req;
        redir.record = rec;
        out.replies.push_back(std::move(redir));
        out.events.push_back(ev("redirect", {{"rid", req.request_id},
                                             {"primary", st_.known_primary.code()}}));
        return out;
    }

    if (st_.role == Role::Primary) {
        if (live_sync_targets().empty()) {
            // No synchronous secondary can acknowledge: writes unavailable.
            Message redir = reply_message(MessageKind::RedirectError, req.client);
            redir.primary = st_.id;
            TransactionRecord rec;
            rec.request = req;
            redir.record = rec;
            out.replies.push_back(std::move(redir));
            out.events.push_back(ev("redirect", {{"rid", req.request_id},
                                                 {"primary", st_.id.code()}}));
            return out;
        }
        st_.origin_wait[req.request_id] = req.client;
        TransactionRecord rec;
        rec.request = req;
        commit_as_primary(std::move(rec), now, out);
        return out;
    }

    // Secondary entry: reuse the pending record on retry, otherwise assign a
    // fresh secondary LSN.
    TransactionRecord rec;
    auto pend = st_.pending.find(req.request_id);
    if (pend != st_.pending.end()) {
        rec = pend->second;
    } else {
        rec.request = req;
        rec.secondary_lsn = Lsn{'S', st_.id, st_.epoch, st_.write_counter};
        st_.write_counter += 1;
        rec.status = st_.role == Role::SemiSyncSecondary
                         ? determine_status(Role::SemiSyncSecondary,
                                            StatusEvent::ClientWriteAccepted)
                         : determine_status(Role::SyncSecondary,
                                            StatusEvent::ForwardReceived);
        st_.pending[req.request_id] = rec;
    }
    st_.origin_wait[req.request_id] = req.client;

    ServerId target = st_.role == Role::SemiSyncSecondary
                          ? *topo_->parent_of(st_.id)
                          : st_.known_primary;
    out.messages.push_back(record_message(MessageKind::ForwardWrite, target, rec));
    return out;
}

Out Replica::on_client_read(const std::string& client, const std::string& read_id,
                            const std::string& key, TimeMs now) {
    Out out;
    (void)now;
    if (st_.mode == Mode::Down) return out;
    Message reply = reply_message(MessageKind::ClientReadReply, client);
    reply.read_id = read_id;
    reply.key = key;
    auto it = st_.store.find(key);
    reply.found = it != st_.store.end();
    if (*reply.found) reply.value = it->second;
    out.events.push_back(ev("read", {{"rid", read_id},
                                     {"key", key},
                                     {"found", *reply.found ? "1" : "0"}}));
    out.replies.push_back(std::move(reply));
    return out;
}

Out Replica::on_forward_write(TransactionRecord rec, const ServerId& from,
                              TimeMs now) {
    Out out;
    if (!rec.status ||
        (*rec.status != Status::PendingSemiSync && *rec.status != Status::PendingSync))
        throw ProtocolError("forward with status " +
                            (rec.status ? status_text(*rec.status) : "none"));

    if (st_.role == Role::SemiSyncSecondary)
        throw ProtocolError("forward delivered to semi " + st_.id.code());

    if (st_.role == Role::SyncSecondary) {
        if (*rec.status != Status::PendingSemiSync)
            throw ProtocolError("sync got forward with status " +
                                status_text(*rec.status));
        const std::string& rid = rec.request.request_id;
        if (st_.committed_rids.count(rid)) {
            out.events.push_back(ev("warn", {{"what", "dup-forward"}, {"rid", rid}}));
            return out;
        }
        rec.status = determine_status(Role::SyncSecondary, StatusEvent::ForwardReceived);
        st_.pending[rid] = rec;
        st_.forwarded_from[rid] = from;
        out.messages.push_back(
            record_message(MessageKind::ForwardWrite, st_.known_primary, rec));
        return out;
    }

    // Primary. PendingSemiSync arrives from the primary's own former children
    // after a promotion: their parent now IS the primary, so it performs the
    // sync-level receipt in place before committing.
    if (*rec.status == Status::PendingSemiSync) {
        rec.status = determine_status(Role::SyncSecondary, StatusEvent::ForwardReceived);
        out.events.push_back(ev("relay", {{"rid", rec.request.request_id},
                                          {"status", status_text(*rec.status)}}));
    }
    const std::string& rid = rec.request.request_id;
    auto done = st_.committed_rids.find(rid);
    if (done != st_.committed_rids.end()) {
        // Duplicate: re-emit the prior commit outcome; no state change.
        const LsnKey k = done->second;
        TransactionRecord again;
        again.request = rec.request;
        again.secondary_lsn = rec.secondary_lsn;
        again.primary_lsn = Lsn{'P', st_.reigns.at(k.epoch), k.epoch, k.counter};
        again.status = Status::PrimaryCommit;
        out.events.push_back(ev("warn", {{"what", "dup-forward"}, {"rid", rid}}));
        for (const auto& s : live_sync_targets())
            out.messages.push_back(
                record_message(MessageKind::CommitBroadcast, s, again));
        for (const auto& s : direct_semi_targets())
            out.messages.push_back(record_message(MessageKind::CommitToSemi, s, again));
        return out;
    }
    commit_as_primary(std::move(rec), now, out);
    return out;
}

void Replica::apply_commit_in_order(TransactionRecord rec, const ServerId& from,
                                    TimeMs now, Out& out) {
    apply_record(rec, now, out, "commit");
    const std::string& rid = rec.request.request_id;

    if (st_.role == Role::SyncSecondary) {
        TransactionRecord acked = rec;
        acked.status = determine_status(Role::SyncSecondary, StatusEvent::CommitApplied);
        // children receive the commit still marked PrimaryCommit; only the
        // primary-bound ack carries AckSync
        for (const auto& c : topo_->children_of(st_.id))
            if (!st_.detector.suspected.count(c))
                out.messages.push_back(record_message(MessageKind::CommitToSemi, c, rec));
        out.messages.push_back(record_message(MessageKind::AckToPrimary,
                                              rec.primary_lsn->server, acked));
        auto ow = st_.origin_wait.find(rid);
        if (ow != st_.origin_wait.end()) {
            Message ack = reply_message(MessageKind::ClientWriteAck, ow->second);
            ack.record = acked;
            out.replies.push_back(std::move(ack));
            st_.origin_wait.erase(ow);
        }
    } else if (st_.role == Role::SemiSyncSecondary) {
        TransactionRecord acked = rec;
        acked.status =
            determine_status(Role::SemiSyncSecondary, StatusEvent::CommitApplied);
        if (auto parent = topo_->parent_of(st_.id))
            out.messages.push_back(
                record_message(MessageKind::AckToSyncParent, *parent, acked));
        auto ow = st_.origin_wait.find(rid);
        if (ow != st_.origin_wait.end()) {
            Message ack = reply_message(MessageKind::ClientWriteAck, ow->second);
            ack.record = acked;
            out.replies.push_back(std::move(ack));
            st_.origin_wait.erase(ow);
        }
    }
    (void)from;
}

void Replica::drain_buffer(TimeMs now, Out& out) {
    for (;;) {
        // prune buffered commits that became stale or duplicate
        bool pruned = false;
        for (auto it = st_.commit_buffer.begin(); it != st_.commit_buffer.end();) {
            if (it->first.epoch < st_.epoch || is_applied(it->first)) {
                it = st_.commit_buffer.erase(it);
                pruned = true;
            } else {
                ++it;
            }
        }
        LsnKey end = log_end();
        LsnKey next{end.epoch, end.counter + 1};
        auto it = st_.commit_buffer.find(next);
        if (it == st_.commit_buffer.end()) {
            if (pruned) continue;
            return;
        }
        BufferedCommit bc = it->second;
        st_.commit_buffer.erase(it);
        apply_commit_in_order(std::move(bc.record), bc.from, now, out);
    }
}

Out Replica::on_primary_commit(TransactionRecord rec, const ServerId& from,
                               TimeMs now) {
    Out out;
    if (!rec.status || *rec.status != Status::PrimaryCommit || !rec.primary_lsn)
        throw ProtocolError("commit without PrimaryCommit status");

    const LsnKey k = key_of(*rec.primary_lsn);
    if (is_applied(k)) {
        st_.pending.erase(rec.request.request_id);
        out.events.push_back(ev("warn", {{"what", "dup-commit"},
                                         {"plsn", format_lsn(*rec.primary_lsn)}}));
        return out;
    }
    if (k.epoch < st_.epoch) {
        out.events.push_back(ev("warn", {{"what", "stale-epoch-commit"},
                                         {"plsn", format_lsn(*rec.primary_lsn)}}));
        return out;
    }

    LsnKey end = log_end();
    const bool in_order = k.epoch == end.epoch && k.counter == end.counter + 1;
    if (!in_order) {
        st_.commit_buffer[k] = BufferedCommit{std::move(rec), from};
        out.events.push_back(ev("lag", {{"have", key_text(end)}, {"need", key_text(k)}}));
        if (!st_.catchup_pending) start_catchup(from, now, out);
        return out;
    }
    apply_commit_in_order(std::move(rec), from, now, out);
    drain_buffer(now, out);
    return out;
}

Out Replica::on_sync_ack(const TransactionRecord& rec, const ServerId& from,
                         TimeMs now) {
    Out out;
    if (st_.role != Role::Primary)
        throw ProtocolError("sync ack delivered to " + st_.id.code());
    if (!rec.status || *rec.status != Status::AckSync || !rec.primary_lsn)
        throw ProtocolError("bad sync ack");
    if (!effective_rank(from) && from != st_.id)
        throw ProtocolError("sync ack from non-sync " + from.code());

    const LsnKey k = key_of(*rec.primary_lsn);
    auto it = st_.ack_wait.find(k);
    if (it == st_.ack_wait.end()) {
        if (is_applied(k)) {
            out.events.push_back(ev("warn", {{"what", "late-ack"},
                                             {"plsn", format_lsn(*rec.primary_lsn)},
                                             {"from", from.code()}}));
            return out;
        }
        throw ProtocolError("ack for unknown LSN " + format_lsn(*rec.primary_lsn));
    }
    it->second.erase(from);
    out.events.push_back(ev("ackwait", {{"plsn", format_lsn(*rec.primary_lsn)},
                                        {"left", std::to_string(it->second.size())}}));
    if (it->second.empty()) finish_commit(k, rec, now, out);
    return out;
}

Out Replica::on_semi_ack(const TransactionRecord& rec, const ServerId& from,
                         TimeMs now) {
    Out out;
    (void)now;
    // Accepted at a sync parent, or at a promoted primary serving its former
    // children directly. Bookkeeping only; nothing travels onward.
    if (st_.role == Role::SemiSyncSecondary)
        throw ProtocolError("semi ack delivered to semi " + st_.id.code());
    if (!rec.primary_lsn) throw ProtocolError("semi ack without primary LSN");
    const LsnKey k = key_of(*rec.primary_lsn);
    if (!is_applied(k)) {
        out.events.push_back(ev("warn", {{"what", "semi-ack-unknown"},
                                         {"plsn", format_lsn(*rec.primary_lsn)},
                                         {"from", from.code()}}));
        return out;
    }
    int n = ++st_.semi_acks[k];
    out.events.push_back(ev("semiack", {{"plsn", format_lsn(*rec.primary_lsn)},
                                        {"n", std::to_string(n)}}));
    return out;
}

Out Replica::on_heartbeat(const ServerId& from, const HeartbeatInfo& info,
                          TimeMs now) {
    Out out;
    st_.peer_modes[from] = info.sender_mode;
    st_.reigns.insert({info.epoch, info.primary});
    adopt_epoch(info.epoch, info.primary, now, out);

    // anti-entropy: chase the commit source when its log is ahead (the
    // parent for a semi, the primary otherwise; orphan semis hear the
    // primary directly while their parent is down)
    const bool source = (st_.role == Role::SemiSyncSecondary &&
                         topo_->parent_of(st_.id) == std::optional<ServerId>(from)) ||
                        (st_.role != Role::Primary && from == st_.known_primary);
    if (source && !st_.catchup_pending && log_end() < info.last_committed)
        start_catchup(from, now, out);

    recompute_mode(now, out, "heartbeat");
    return out;
}

Out Replica::on_catchup_request(const ServerId& from, const LsnKey& requester_end,
                                TimeMs now) {
    Out out;
    (void)now;
    Message m;
    m.kind = MessageKind::CatchUpTransfer;
    m.from = st_.id.code();
    m.to = from.code();
    for (const auto& e : st_.applied_log)
        if (requester_end < e.key()) m.entries.push_back(e);
    m.sender_end = log_end();
    m.epoch = st_.epoch;
    m.primary = st_.known_primary;
    for (const auto& [e, p] : st_.reigns) m.reigns.emplace_back(e, p);
    out.events.push_back(ev("serve-catchup", {{"to", from.code()},
                                              {"n", std::to_string(m.entries.size())}}));
    out.messages.push_back(std::move(m));
    return out;
}

Out Replica::on_catchup_transfer(const ServerId& from, const Message& msg,
                                 TimeMs now) {
    Out out;
    if (!st_.catchup_pending) {
        out.events.push_back(ev("warn", {{"what", "late-transfer"},
                                         {"from", from.code()}}));
        return out;
    }
    for (const auto& [e, p] : msg.reigns) st_.reigns.insert({e, p});
    if (msg.epoch && msg.primary) adopt_epoch(*msg.epoch, *msg.primary, now, out);

    for (const auto& entry : msg.entries) {
        if (is_applied(entry.key())) continue;
        auto buffered = st_.commit_buffer.find(entry.key());
        if (buffered != st_.commit_buffer.end()) {
            BufferedCommit bc = buffered->second;
            st_.commit_buffer.erase(buffered);
            apply_commit_in_order(std::move(bc.record), bc.from, now, out);
        } else {
            TransactionRecord rec;
            rec.request = entry.request;
            rec.primary_lsn = entry.primary_lsn();
            rec.status = Status::PrimaryCommit;
            apply_record(rec, now, out, "transfer");
        }
    }
    drain_buffer(now, out);

    if (msg.sender_end && !(log_end() < *msg.sender_end)) {
        st_.catchup_pending = false;
        st_.catchup_attempts = 0;
        out.events.push_back(ev("caughtup", {{"end", key_text(log_end())}}));
        recompute_mode(now, out, "caughtup");
    }
    return out;
}

void Replica::start_catchup(const ServerId& to, TimeMs now, Out& out) {
    st_.catchup_pending = true;
    st_.catchup_sent_at = now;
    Message m;
    m.kind = MessageKind::CatchUpRequest;
    m.from = st_.id.code();
    m.to = to.code();
    m.catchup_from = log_end();
    out.messages.push_back(std::move(m));
    recompute_mode(now, out, "catchup");
}

ServerId Replica::catchup_target() const {
    std::vector<ServerId> ladder;
    auto push = [&](const ServerId& s) {
        if (s != st_.id &&
            std::find(ladder.begin(), ladder.end(), s) == ladder.end())
            ladder.push_back(s);
    };
    if (auto p = topo_->parent_of(st_.id)) push(*p);
    push(st_.known_primary);
    for (const auto& s : failover_order(*topo_)) push(s);
    if (ladder.empty()) return st_.known_primary;
    return ladder[static_cast<std::size_t>(st_.catchup_attempts) % ladder.size()];
}

void Replica::suspect(const ServerId& peer, TimeMs now, Out& out) {
    st_.detector.suspected.insert(peer);
    // failover situation by the peer's current function: the primary (C),
    // a synchronous secondary (B), or an outer secondary (A)
    const std::string situation = peer == st_.known_primary ? "C"
                                  : effective_rank(peer)    ? "B"
                                                            : "A";
    out.events.push_back(ev("suspect", {{"peer", peer.code()},
                                        {"situation", situation}}));
    if (st_.role == Role::Primary) {
        // Situation B: stop waiting on the suspected sync; finish commits
        // that were only blocked on it.
        std::vector<std::pair<LsnKey, TransactionRecord>> finished;
        for (auto it = st_.ack_wait.begin(); it != st_.ack_wait.end();) {
            it->second.erase(peer);
            if (it->second.empty()) {
                LsnKey k = it->first;
                // reconstruct the record from the log for the finish event
                TransactionRecord rec;
                for (const auto& e : st_.applied_log)
                    if (e.key() == k) {
                        rec.request = e.request;
                        rec.primary_lsn = e.primary_lsn();
                        rec.status = Status::PrimaryCommit;
                        break;
                    }
                it = st_.ack_wait.erase(it);
                finished.emplace_back(k, std::move(rec));
            } else {
                ++it;
            }
        }
        for (auto& [k, rec] : finished) finish_commit(k, rec, now, out);
    }
    if (st_.role == Role::SyncSecondary && peer == st_.known_primary &&
        !st_.primary_suspected_at)
        st_.primary_suspected_at = now;
    recompute_mode(now, out, "suspect");
}

void Replica::refresh_peer(const ServerId& peer, TimeMs now, Out& out) {
    st_.detector.last_heard[peer] = now;
    if (st_.detector.suspected.erase(peer)) {
        out.events.push_back(ev("unsuspect", {{"peer", peer.code()}}));
        if (peer == st_.known_primary) st_.primary_suspected_at.reset();
        recompute_mode(now, out, "unsuspect");
    }
}

Out Replica::heartbeat_messages(TimeMs now) {
    Out out;
    if (st_.mode == Mode::Down) return out;
    for (const auto& t : heartbeat_targets()) out.merge(make_heartbeat(t, now));
    return out;
}

Out Replica::detect_failures(TimeMs now) {
    Out out;
    if (st_.mode == Mode::Down) return out;
    for (const auto& p : monitored_peers()) {
        auto heard = st_.detector.last_heard.find(p);
        if (heard == st_.detector.last_heard.end()) {
            st_.detector.last_heard[p] = now;  // first sight: grace period
            continue;
        }
        if (st_.detector.suspected.count(p)) continue;
        if (now - heard->second > timing_.session_timeout_ms) suspect(p, now, out);
    }
    return out;
}

Out Replica::on_timer(TimeMs now) {
    Out out;
    if (st_.mode == Mode::Down) return out;
    out.merge(heartbeat_messages(now));
    out.merge(detect_failures(now));

    // failover C: promote when every better-ranked sync has had its window
    if (st_.role == Role::SyncSecondary && st_.primary_suspected_at &&
        st_.detector.suspected.count(st_.known_primary) && !st_.catchup_pending) {
        int position = 0;
        for (const auto& [rank, s] : ranked_syncs()) {
            if (s == st_.id) break;
            ++position;
        }
        if (now >= *st_.primary_suspected_at +
                       position * timing_.session_timeout_ms)
            promote(now, out);
    }

    // catch-up retry ladder: parent, then primary, then the sync ranks
    if (st_.catchup_pending &&
        now - st_.catchup_sent_at > timing_.session_timeout_ms) {
        st_.catchup_attempts += 1;
        start_catchup(catchup_target(), now, out);
    }
    return out;
}

Out Replica::on_crash(TimeMs now) {
    Out out;
    (void)now;
    st_.mode = Mode::Down;
    out.events.push_back(ev("mode", {{"m", "down"}, {"reason", "crash"}}));
    return out;
}

Out Replica::on_recover(TimeMs now) {
    Out out;
    // volatile state is gone; durable log/store/counters survive
    st_.pending.clear();
    st_.origin_wait.clear();
    st_.ack_wait.clear();
    st_.commit_buffer.clear();
    st_.semi_acks.clear();
    st_.forwarded_from.clear();
    st_.peer_modes.clear();
    st_.detector = FailureDetector{};
    st_.primary_suspected_at.reset();
    st_.mode = Mode::ReadOnly;
    out.events.push_back(ev("mode", {{"m", "ro"}, {"reason", "recover"}}));

    // An ex-primary keeps its role until catch-up reveals whether anyone
    // promoted meanwhile; adopt_epoch demotes it the moment a higher epoch
    // shows up. If nobody promoted it simply resumes once caught up.
    for (const auto& p : monitored_peers()) st_.detector.last_heard[p] = now;

    st_.catchup_attempts = 0;
    start_catchup(catchup_target(), now, out);
    return out;
}

Out Replica::on_message(const Message& msg, TimeMs now) {
    Out out;
    if (st_.mode == Mode::Down) return out;

    // any traffic from a server is liveness evidence
    ServerId sender{};
    bool from_server = false;
    if (msg.from.size() == 2) {
        try {
            sender = parse_server_id(msg.from);
            from_server = topo_->contains(sender);
        } catch (const ParseError&) {
            from_server = false;
        }
    }
    if (from_server) refresh_peer(sender, now, out);

    switch (msg.kind) {
        case MessageKind::ClientWrite:
            out.merge(on_client_write(msg.record->request, now));
            break;
        case MessageKind::ClientRead:
            out.merge(on_client_read(msg.from, msg.read_id.value_or(""),
                                     msg.key.value_or(""), now));
            break;
        case MessageKind::ForwardWrite:
            out.merge(on_forward_write(*msg.record, sender, now));
            break;
        case MessageKind::CommitBroadcast:
        case MessageKind::CommitToSemi:
            out.merge(on_primary_commit(*msg.record, sender, now));
            break;
        case MessageKind::AckToPrimary:
            out.merge(on_sync_ack(*msg.record, sender, now));
            break;
        case MessageKind::AckToSyncParent:
            out.merge(on_semi_ack(*msg.record, sender, now));
            break;
        case MessageKind::Heartbeat:
            out.merge(on_heartbeat(sender, *msg.heartbeat, now));
            break;
        case MessageKind::CatchUpRequest:
            out.merge(on_catchup_request(sender, *msg.catchup_from, now));
            break;
        case MessageKind::CatchUpTransfer:
            out.merge(on_catchup_transfer(sender, msg, now));
            break;
        default:
            throw ProtocolError(std::string("no handler for ") +
                                message_kind_name(msg.kind));
    }
    return out;
}

}  // namespace repsim
