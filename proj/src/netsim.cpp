#include "repsim/netsim.hpp"

#include <algorithm>

#include "repsim/errors.hpp"

namespace repsim {

namespace {
constexpr int kMaxClientAttempts = 16;
}

const char* run_reason_name(RunReason r) {
    return r == RunReason::Quiescent ? "quiescent" : "max_time";
}

World::World(const Scenario& scenario) : scenario_(scenario), rng_(scenario.seed) {
    topo_ = std::make_unique<RegionTopology>(
        build_topology(scenario_.branches, scenario_.semis_per_branch,
                       scenario_.priorities, scenario_.default_latency_ms));
    for (const auto& s : topo_->servers()) {
        topo_->set_latency(kClientEndpoint, s.code(), scenario_.client_latency_ms);
        topo_->set_latency(s.code(), kClientEndpoint, scenario_.client_latency_ms);
    }
    for (const auto& l : scenario_.links) topo_->set_latency(l.from, l.to, l.latency_ms);

    TimingConfig timing{scenario_.heartbeat_ms, scenario_.session_timeout_ms};
    for (const auto& s : topo_->servers())
        replicas_.emplace(s, Replica(topo_.get(), s, timing));

    // faults first, then ops, then the per-server timer chains; ties at the
    // same time resolve in that order
    for (const auto& f : scenario_.faults) {
        SimEvent ev;
        ev.at = f.at;
        ev.kind = f.crash ? SimEvent::Kind::Crash : SimEvent::Kind::Recover;
        ev.server = parse_server_id(f.server);
        schedule(std::move(ev));
    }
    for (const auto& op : scenario_.ops) {
        SimEvent ev;
        ev.at = op.at;
        ev.kind = SimEvent::Kind::ClientOp;
        ev.op = ClientOp{op.at, op.client, parse_server_id(op.server),
                         op.is_write, op.id, op.key, op.value, 1};
        schedule(std::move(ev));
    }
    for (const auto& s : topo_->servers()) {
        SimEvent ev;
        ev.at = scenario_.heartbeat_ms;
        ev.kind = SimEvent::Kind::Timer;
        ev.server = s;
        schedule(std::move(ev));
    }
}

Replica& World::replica(const ServerId& id) {
    auto it = replicas_.find(id);
    if (it == replicas_.end()) throw LookupError("no replica " + id.code());
    return it->second;
}

const Replica& World::replica(const ServerId& id) const {
    auto it = replicas_.find(id);
    if (it == replicas_.end()) throw LookupError("no replica " + id.code());
    return it->second;
}

std::vector<const Replica*> World::replicas() const {
    std::vector<const Replica*> out;
    for (const auto& [id, r] : replicas_) out.push_back(&r);
    return out;
}

void World::note_scheduled(const SimEvent& ev, int delta) {
    switch (ev.kind) {
        case SimEvent::Kind::Deliver:
            if (ev.msg.kind != MessageKind::Heartbeat) pending_protocol_ += delta;
            break;
        case SimEvent::Kind::Crash:
        case SimEvent::Kind::Recover:
        case SimEvent::Kind::ClientOp:
            pending_disruptive_ += delta;
            break;
        case SimEvent::Kind::Timer:
            break;
    }
}

void World::schedule(SimEvent ev) {
    if (ev.at < now_)
        throw ScheduleError("event at t=" + std::to_string(ev.at) +
                            " scheduled in the past (now=" + std::to_string(now_) +
                            ")");
    ev.seq = next_seq_++;
    note_scheduled(ev, +1);
    queue_.push(std::move(ev));
}

void World::record(TimeMs at, const std::string& endpoint, const std::string& tag,
                   std::vector<std::pair<std::string, std::string>> fields) {
    trace_.push_back(TraceRecord{at, endpoint, tag, std::move(fields)});
}

TimeMs World::link_delay(const EndpointId& from, const EndpointId& to) {
    TimeMs d = topo_->latency(from, to);
    if (scenario_.jitter_ms > 0)
        d += static_cast<TimeMs>(rng_() %
                                 static_cast<std::uint64_t>(scenario_.jitter_ms + 1));
    return d;
}

void World::set_link_up(const EndpointId& a, const EndpointId& b, bool up) {
    link_up_[{a, b}] = up;
}

void World::send_message(Message msg) {
    msg.id = ++next_msg_id_;
    auto fields = message_fields(msg);
    std::vector<std::pair<std::string, std::string>> line;
    line.emplace_back("msg", std::to_string(msg.id));
    line.emplace_back("kind", message_kind_name(msg.kind));
    line.emplace_back("to", msg.to);
    line.insert(line.end(), fields.begin(), fields.end());
    record(now_, msg.from, "send", std::move(line));

    auto up = link_up_.find({msg.from, msg.to});
    if (up != link_up_.end() && !up->second) {
        record(now_, msg.from, "linkdrop",
               {{"msg", std::to_string(msg.id)}, {"to", msg.to}});
        return;  // down links silently drop: no Deliver event
    }

    TimeMs at = now_ + link_delay(msg.from, msg.to);
    auto& floor = fifo_floor_[{msg.from, msg.to}];
    at = std::max(at, floor);  // per-pair FIFO even under jitter
    floor = at;

    SimEvent ev;
    ev.at = at;
    ev.kind = SimEvent::Kind::Deliver;
    ev.msg = std::move(msg);
    schedule(std::move(ev));
}

void World::emit_out(const ServerId& server, Out&& out) {
    for (auto& e : out.events) record(now_, server.code(), e.tag, std::move(e.fields));
    for (auto& m : out.messages) send_message(std::move(m));
    for (auto& r : out.replies) send_message(std::move(r));
}

ServerId World::route(const ServerId& requested) const {
    std::vector<ServerId> cand;
    cand.push_back(requested);
    if (requested.is_semi_id()) cand.push_back(*topo_->parent_of(requested));
    for (const auto& [id, r] : replicas_)
        if (r.role() == Role::Primary && r.mode() != Mode::Down) {
            cand.push_back(id);
            break;
        }
    for (const auto& s : failover_order(*topo_)) cand.push_back(s);
    for (const auto& c : cand)
        if (replicas_.at(c).mode() != Mode::Down) return c;
    return requested;  // full outage: deliveries will be consumed
}

void World::dispatch_client_op(const SimEvent& ev, bool is_retry) {
    const ClientOp& op = ev.op;
    ServerId target = route(op.entry);
    record(now_, op.client, is_retry ? "retry" : "clientop",
           {{"op", op.is_write ? "write" : "read"},
            {"rid", op.rid},
            {"target", op.entry.code()},
            {"route", target.code()},
            {"attempt", std::to_string(op.attempt)}});

    Message m;
    m.from = op.client;
    m.to = target.code();
    if (op.is_write) {
        m.kind = MessageKind::ClientWrite;
        TransactionRecord rec;
        rec.request = WriteRequest{op.rid, op.client, op.key, op.value, target};
        m.record = std::move(rec);
    } else {
        m.kind = MessageKind::ClientRead;
        m.read_id = op.rid;
        m.key = op.key;
    }
    send_message(std::move(m));

    PendingClientOp pending;
    pending.op = op;
    pending.deadline = now_ + scenario_.client_retry_ms;
    unresolved_[op.rid] = std::move(pending);
}

void World::sweep_client_retries(TimeMs now) {
    std::vector<std::string> due;
    for (const auto& [rid, p] : unresolved_)
        if (p.deadline <= now) due.push_back(rid);
    for (const auto& rid : due) {
        PendingClientOp& p = unresolved_[rid];
        if (p.op.attempt >= kMaxClientAttempts) {
            record(now, p.op.client, "giveup", {{"rid", rid}});
            unresolved_.erase(rid);
            continue;
        }
        SimEvent ev;
        ev.at = now;
        ev.kind = SimEvent::Kind::ClientOp;
        ev.op = p.op;
        ev.op.attempt += 1;
        dispatch_client_op(ev, true);
    }
}

void World::deliver_to_client(const Message& msg) {
    switch (msg.kind) {
        case MessageKind::ClientWriteAck:
            unresolved_.erase(msg.record->request.request_id);
            break;
        case MessageKind::ClientReadReply:
            unresolved_.erase(msg.read_id.value_or(""));
            break;
        case MessageKind::RedirectError: {
            const std::string rid = msg.record ? msg.record->request.request_id : "";
            auto it = unresolved_.find(rid);
            if (it == unresolved_.end()) break;  // already satisfied elsewhere
            if (it->second.op.attempt >= kMaxClientAttempts) {
                record(now_, it->second.op.client, "giveup", {{"rid", rid}});
                unresolved_.erase(it);
                break;
            }
            // reissue the same request at the primary the server named
            ClientOp op = it->second.op;
            op.attempt += 1;
            if (msg.primary) op.entry = *msg.primary;
            it->second.op = op;
            SimEvent next;
            next.at = now_;
            next.kind = SimEvent::Kind::ClientOp;
            next.op = std::move(op);
            schedule(std::move(next));
            break;
        }
        default:
            break;
    }
}

void World::dispatch_deliver(const SimEvent& ev) {
    const Message& msg = ev.msg;
    auto fields = message_fields(msg);
    std::vector<std::pair<std::string, std::string>> line;
    line.emplace_back("msg", std::to_string(msg.id));
    line.emplace_back("kind", message_kind_name(msg.kind));
    line.emplace_back("from", msg.from);
    // server destination?
    bool to_server = false;
    ServerId dest{};
    if (msg.to.size() == 2) {
        try {
            dest = parse_server_id(msg.to);
            to_server = topo_->contains(dest);
        } catch (const ParseError&) {
            to_server = false;
        }
    }
    if (to_server && replicas_.at(dest).mode() == Mode::Down) {
        // receiver-side drop: process death consumes in-flight messages
        record(now_, msg.to, "drop", std::move(line));
        return;
    }
    line.insert(line.end(), fields.begin(), fields.end());
    record(now_, msg.to, "deliver", std::move(line));
    if (to_server) {
        emit_out(dest, replica(dest).on_message(msg, now_));
    } else {
        deliver_to_client(msg);
    }
}

void World::dispatch_timer(const SimEvent& ev) {
    Replica& r = replica(ev.server);
    if (r.mode() == Mode::Down) {
        record(now_, ev.server.code(), "timer", {{"live", "0"}});
        return;  // chain ends; Recover starts a new one
    }
    record(now_, ev.server.code(), "timer", {});
    emit_out(ev.server, r.on_timer(now_));
    SimEvent next;
    next.at = now_ + scenario_.heartbeat_ms;
    next.kind = SimEvent::Kind::Timer;
    next.server = ev.server;
    schedule(std::move(next));
}

bool World::step() {
    if (queue_.empty()) return false;
    SimEvent ev = queue_.top();
    queue_.pop();
    note_scheduled(ev, -1);
    now_ = ev.at;
    sweep_client_retries(now_);
    switch (ev.kind) {
        case SimEvent::Kind::Deliver:
            dispatch_deliver(ev);
            break;
        case SimEvent::Kind::Timer:
            dispatch_timer(ev);
            break;
        case SimEvent::Kind::Crash: {
            record(now_, ev.server.code(), "crash", {});
            emit_out(ev.server, replica(ev.server).on_crash(now_));
            settle_horizon_ = std::max(
                settle_horizon_,
                now_ + scenario_.session_timeout_ms + 2 * scenario_.heartbeat_ms);
            break;
        }
        case SimEvent::Kind::Recover: {
            record(now_, ev.server.code(), "recover", {});
            emit_out(ev.server, replica(ev.server).on_recover(now_));
            SimEvent timer;
            timer.at = now_ + scenario_.heartbeat_ms;
            timer.kind = SimEvent::Kind::Timer;
            timer.server = ev.server;
            schedule(std::move(timer));
            settle_horizon_ = std::max(
                settle_horizon_,
                now_ + scenario_.session_timeout_ms + 2 * scenario_.heartbeat_ms);
            break;
        }
        case SimEvent::Kind::ClientOp:
            dispatch_client_op(ev, ev.op.attempt > 1);
            break;
    }
    return true;
}

bool World::quiescent() const {
    if (pending_protocol_ > 0 || pending_disruptive_ > 0 || !unresolved_.empty())
        return false;
    if (now_ < settle_horizon_) return false;
    const Replica* primary = nullptr;
    for (const auto& [id, r] : replicas_) {
        if (r.mode() == Mode::Down) continue;
        if (r.state().catchup_pending) return false;
        if (r.state().primary_suspected_at) return false;
        if (!primary && r.role() == Role::Primary) primary = &r;
    }
    if (primary) {
        // a live replica lagging the primary will still be pulled forward by
        // heartbeat anti-entropy; quiescence waits for that
        for (const auto& [id, r] : replicas_) {
            if (r.mode() == Mode::Down) continue;
            if (r.log_end() < primary->log_end()) return false;
        }
    }
    return true;
}

RunReason World::run_until_quiescent() {
    while (!queue_.empty()) {
        if (quiescent()) {
            reason_ = RunReason::Quiescent;
            return reason_;
        }
        if (queue_.top().at > scenario_.max_time_ms) {
            reason_ = RunReason::MaxTime;
            return reason_;
        }
        step();
    }
    reason_ = quiescent() ? RunReason::Quiescent : RunReason::MaxTime;
    return reason_;
}

}  // namespace repsim
