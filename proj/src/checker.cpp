#include "repsim/checker.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <set>

namespace repsim {

namespace {

struct Checker {
    const ParsedTrace& t;
    TraceReport report;
    std::size_t violations_before = 0;

    explicit Checker(const ParsedTrace& trace) : t(trace) {}

    std::size_t line_no(std::size_t idx) const { return t.line_numbers[idx]; }

    void flag(const std::string& check, std::size_t idx, const std::string& detail) {
        report.violations.push_back(Violation{check, line_no(idx), detail});
    }

    void begin(const std::string&) { violations_before = report.violations.size(); }

    void end(const std::string& name) {
        report.checks.emplace_back(name,
                                   report.violations.size() == violations_before);
    }

    static bool is_processed_event(const std::string& tag) {
        return tag == "deliver" || tag == "drop" || tag == "timer" ||
               tag == "clientop" || tag == "retry" || tag == "crash" ||
               tag == "recover";
    }

    // --- status transition legality ---------------------------------------
    void check_status_transitions() {
        begin("status-transitions");
        bool ctx_active = false;
        std::optional<Status> ctx_status;
        for (std::size_t i = 0; i < t.records.size(); ++i) {
            const TraceRecord& r = t.records[i];
            if (is_processed_event(r.tag)) {
                ctx_active = false;
                if (r.tag == "deliver") {
                    const std::string* kind = r.field("kind");
                    if (kind && *kind == "ClientWrite") {
                        ctx_active = true;
                        ctx_status.reset();
                    } else if (kind && r.field("rid")) {
                        if (const std::string* st = r.field("status")) {
                            ctx_active = true;
                            ctx_status = parse_status(*st);
                        }
                    }
                }
                continue;
            }
            if (!ctx_active) continue;
            if (r.tag == "relay") {
                // the server performed an intermediate phase step in place
                const std::string* st = r.field("status");
                if (!st) continue;
                Status step = parse_status(*st);
                if (!allowed_transition(ctx_status, step))
                    flag("status-transitions", i,
                         "illegal " +
                             (ctx_status ? status_text(*ctx_status)
                                         : std::string("none")) +
                             " -> " + status_text(step));
                ctx_status = step;
                continue;
            }
            if (r.tag != "send") continue;
            const std::string* kind = r.field("kind");
            if (!kind || *kind == "ClientWriteAck") continue;  // reply mirror
            const std::string* st = r.field("status");
            if (!st) continue;
            Status out = parse_status(*st);
            if (ctx_status && out == *ctx_status) continue;  // pass-through copy
            if (!allowed_transition(ctx_status, out))
                flag("status-transitions", i,
                     "illegal " +
                         (ctx_status ? status_text(*ctx_status) : std::string("none")) +
                         " -> " + status_text(out));
        }
        end("status-transitions");
    }

    // --- per-epoch prefix consistency --------------------------------------
    void check_prefix_consistency() {
        begin("prefix-consistency");
        struct Applied {
            std::int64_t e, c;
            std::string rid;
            std::size_t idx;
        };
        std::map<std::string, std::vector<Applied>> per_server;
        // epoch -> counter -> (rid, owner server)
        std::map<std::int64_t, std::map<std::int64_t, std::string>> owner_rid;
        for (std::size_t i = 0; i < t.records.size(); ++i) {
            const TraceRecord& r = t.records[i];
            if (r.tag != "apply") continue;
            Applied a{std::stoll(*r.field("e")), std::stoll(*r.field("c")),
                      *r.field("rid"), i};
            const std::string& plsn = *r.field("plsn");
            if (plsn.size() >= 3 && plsn.substr(1, 2) == r.endpoint) {
                auto [it, fresh] = owner_rid[a.e].try_emplace(a.c, a.rid);
                if (!fresh && it->second != a.rid)
                    flag("prefix-consistency", i,
                         "two commits at e" + std::to_string(a.e) + "c" +
                             std::to_string(a.c));
            }
            per_server[r.endpoint].push_back(std::move(a));
        }
        for (const auto& [server, seq] : per_server) {
            std::int64_t cur_epoch = -1, cur_counter = 0;
            for (const auto& a : seq) {
                if (a.e < cur_epoch) {
                    flag("prefix-consistency", a.idx,
                         server + " applied epoch " + std::to_string(a.e) +
                             " after epoch " + std::to_string(cur_epoch));
                    continue;
                }
                if (a.e > cur_epoch) {
                    cur_epoch = a.e;
                    cur_counter = 0;
                }
                if (a.c != cur_counter + 1)
                    flag("prefix-consistency", a.idx,
                         server + " log gap in epoch " + std::to_string(a.e) +
                             ": counter " + std::to_string(a.c) + " after " +
                             std::to_string(cur_counter));
                cur_counter = a.c;
                auto eit = owner_rid.find(a.e);
                if (eit != owner_rid.end()) {
                    auto cit = eit->second.find(a.c);
                    if (cit != eit->second.end() && cit->second != a.rid)
                        flag("prefix-consistency", a.idx,
                             server + " diverges at e" + std::to_string(a.e) + "c" +
                                 std::to_string(a.c) + ": rid " + a.rid + " vs " +
                                 cit->second);
                }
            }
        }
        end("prefix-consistency");
    }

    // --- single primary outside the stabilization window --------------------
    void check_single_primary() {
        begin("single-primary");
        const TimeMs grace = t.session_timeout_ms + 2 * t.heartbeat_ms;
        std::set<std::string> alive_primaries = {"01"};
        std::set<std::string> down;
        bool overlapping = false;
        TimeMs overlap_start = 0;
        std::size_t overlap_idx = 0;
        TimeMs last_t = 0;

        auto update = [&](TimeMs now, std::size_t idx) {
            last_t = now;
            std::size_t live = 0;
            for (const auto& p : alive_primaries)
                if (!down.count(p)) ++live;
            if (live >= 2) {
                if (!overlapping) {
                    overlapping = true;
                    overlap_start = now;
                    overlap_idx = idx;
                }
            } else if (overlapping) {
                if (now - overlap_start > grace)
                    flag("single-primary", overlap_idx,
                         "two live primaries for " +
                             std::to_string(now - overlap_start) + "ms");
                overlapping = false;
            }
        };

        for (std::size_t i = 0; i < t.records.size(); ++i) {
            const TraceRecord& r = t.records[i];
            if (r.tag == "promote") {
                alive_primaries.insert(r.endpoint);
            } else if (r.tag == "stepdown") {
                alive_primaries.erase(r.endpoint);
            } else if (r.tag == "crash") {
                down.insert(r.endpoint);
            } else if (r.tag == "recover") {
                down.erase(r.endpoint);
                // a recovered ex-primary only resumes primacy if no one
                // promoted past it; it announces via promote/adopt events,
                // so keep it listed until a stepdown says otherwise
            } else {
                continue;
            }
            update(r.at, i);
        }
        (void)last_t;
        const TimeMs trace_end = t.records.empty() ? 0 : t.records.back().at;
        if (overlapping && trace_end - overlap_start > grace)
            flag("single-primary", overlap_idx,
                 "two live primaries at end of trace");
        end("single-primary");
    }

    // --- fault-free message-count constants ---------------------------------
    void check_message_counts() {
        begin("message-counts");
        if (t.fault_count != 0 || t.branches != 4 || t.semis != 3) {
            end("message-counts");
            return;
        }
        static const std::set<std::string> kKinds = {
            "ForwardWrite", "CommitBroadcast", "CommitToSemi",
            "AckToPrimary", "AckToSyncParent", "ClientWriteAck"};
        std::map<std::string, long> counts;
        std::map<std::string, std::pair<std::string, std::size_t>> entry_of;
        for (std::size_t i = 0; i < t.records.size(); ++i) {
            const TraceRecord& r = t.records[i];
            if ((r.tag == "clientop" || r.tag == "retry") &&
                *r.field("op") == "write") {
                entry_of[*r.field("rid")] = {*r.field("route"), i};
            } else if (r.tag == "send" && kKinds.count(*r.field("kind"))) {
                if (const std::string* rid = r.field("rid")) counts[*rid] += 1;
            }
        }
        for (const auto& [rid, routed] : entry_of) {
            const std::string& server = routed.first;
            long expect = server == "01" ? 33 : (server[1] == '1' ? 34 : 35);
            long got = counts.count(rid) ? counts[rid] : 0;
            if (got != expect)
                flag("message-counts", routed.second,
                     rid + " at " + server + ": " + std::to_string(got) +
                         " messages, expected " + std::to_string(expect));
        }
        end("message-counts");
    }

    // --- read-your-writes ----------------------------------------------------
    void check_read_your_writes() {
        begin("read-your-writes");
        // last applied value per (server, key) as the trace progresses
        std::map<std::pair<std::string, std::string>, std::string> last_val;
        std::string ctx_server;  // server currently processing a ClientRead
        for (std::size_t i = 0; i < t.records.size(); ++i) {
            const TraceRecord& r = t.records[i];
            if (r.tag == "apply") {
                last_val[{r.endpoint, *r.field("key")}] = *r.field("val");
                continue;
            }
            if (is_processed_event(r.tag)) {
                ctx_server.clear();
                if (r.tag == "deliver") {
                    const std::string* kind = r.field("kind");
                    if (kind && *kind == "ClientRead") ctx_server = r.endpoint;
                }
                continue;
            }
            if (r.tag != "send" || ctx_server.empty()) continue;
            const std::string* kind = r.field("kind");
            if (!kind || *kind != "ClientReadReply") continue;
            const std::string& key = *r.field("key");
            auto it = last_val.find({ctx_server, key});
            const bool found = *r.field("found") == "1";
            if (it == last_val.end()) {
                if (found)
                    flag("read-your-writes", i,
                         ctx_server + " returned a value for never-applied key " +
                             key);
            } else if (!found) {
                flag("read-your-writes", i,
                     ctx_server + " returned not-found for applied key " + key);
            } else if (*r.field("val") != it->second) {
                flag("read-your-writes", i,
                     ctx_server + " returned stale value '" + *r.field("val") +
                         "' for key " + key + " (applied '" + it->second + "')");
            }
        }
        end("read-your-writes");
    }

    // --- FIFO links and causality ---------------------------------------------
    void check_fifo_causality() {
        begin("fifo");
        struct SendInfo {
            std::size_t order;
            TimeMs at;
        };
        std::map<std::string, SendInfo> sends;  // msg id -> info
        std::map<std::pair<std::string, std::string>, std::size_t> last_order;
        std::size_t order = 0;
        for (std::size_t i = 0; i < t.records.size(); ++i) {
            const TraceRecord& r = t.records[i];
            if (r.tag == "send") {
                sends[*r.field("msg")] = SendInfo{order++, r.at};
            } else if (r.tag == "deliver" || r.tag == "drop") {
                const std::string* msg = r.field("msg");
                const std::string* from = r.field("from");
                if (!msg) continue;
                auto s = sends.find(*msg);
                if (s == sends.end()) {
                    flag("fifo", i, "delivery of never-sent msg " + *msg);
                    continue;
                }
                if (r.at < s->second.at)
                    flag("fifo", i, "msg " + *msg + " delivered before it was sent");
                if (from) {
                    auto key = std::make_pair(*from, r.endpoint);
                    auto lo = last_order.find(key);
                    if (lo != last_order.end() && s->second.order < lo->second)
                        flag("fifo", i,
                             "out-of-order delivery on " + *from + "->" + r.endpoint +
                                 " (msg " + *msg + ")");
                    last_order[key] = s->second.order;
                }
            }
        }
        end("fifo");
    }
};

}  // namespace

TraceReport verify_trace(const ParsedTrace& trace) {
    Checker c(trace);
    c.check_status_transitions();
    c.check_prefix_consistency();
    c.check_single_primary();
    c.check_message_counts();
    c.check_read_your_writes();
    c.check_fifo_causality();
    return std::move(c.report);
}

ConvergenceReport check_convergence(const World& world) {
    const Replica* ref = nullptr;
    for (const Replica* r : world.replicas()) {
        if (r->mode() == Mode::Down) continue;
        ref = r;
        break;
    }
    if (!ref) return {true, "no live replicas"};

    auto log_tuple = [](const LogEntry& e) {
        return std::make_tuple(e.epoch, e.counter, e.request.request_id);
    };

    for (const Replica* r : world.replicas()) {
        if (r->mode() == Mode::Down || r == ref) continue;
        const auto& a = ref->state();
        const auto& b = r->state();
        if (a.applied_log.size() != b.applied_log.size())
            return {false, r->id().code() + " log length " +
                               std::to_string(b.applied_log.size()) + " vs " +
                               ref->id().code() + " " +
                               std::to_string(a.applied_log.size())};
        for (std::size_t i = 0; i < a.applied_log.size(); ++i)
            if (log_tuple(a.applied_log[i]) != log_tuple(b.applied_log[i]))
                return {false, r->id().code() + " log diverges at index " +
                                   std::to_string(i)};
        if (a.store != b.store) {
            for (const auto& [k, v] : a.store) {
                auto it = b.store.find(k);
                if (it == b.store.end())
                    return {false, r->id().code() + " missing key " + k};
                if (it->second != v)
                    return {false, r->id().code() + " key " + k + " = '" +
                                       it->second + "' vs '" + v + "'"};
            }
            for (const auto& [k, v] : b.store)
                if (!a.store.count(k))
                    return {false, r->id().code() + " extra key " + k};
        }
    }
    for (const Replica* r : world.replicas()) {
        if (r->mode() == Mode::Down) continue;
        if (!r->state().pending.empty())
            return {false, r->id().code() + " has " +
                               std::to_string(r->state().pending.size()) +
                               " pending records (first: " +
                               r->state().pending.begin()->first + ")"};
    }
    return {true, "converged"};
}

}  // namespace repsim
