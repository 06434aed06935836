#include "repsim/trace.hpp"

#include <sstream>

#include "repsim/errors.hpp"

namespace repsim {

namespace {

std::string key_text(const LsnKey& k) {
    return "e" + std::to_string(k.epoch) + "c" + std::to_string(k.counter);
}

}  // namespace

const std::string* TraceRecord::field(const std::string& key) const {
    for (const auto& [k, v] : fields)
        if (k == key) return &v;
    return nullptr;
}

std::vector<std::pair<std::string, std::string>> message_fields(const Message& m) {
    std::vector<std::pair<std::string, std::string>> f;
    switch (m.kind) {
        case MessageKind::ForwardWrite:
        case MessageKind::CommitBroadcast:
        case MessageKind::CommitToSemi:
        case MessageKind::AckToPrimary:
        case MessageKind::AckToSyncParent:
        case MessageKind::ClientWrite:
        case MessageKind::ClientWriteAck: {
            const TransactionRecord& r = *m.record;
            f.emplace_back("rid", r.request.request_id);
            f.emplace_back("slsn",
                           r.secondary_lsn ? format_lsn(*r.secondary_lsn) : "-");
            f.emplace_back("plsn", r.primary_lsn ? format_lsn(*r.primary_lsn) : "-");
            if (r.primary_lsn)
                f.emplace_back("ep", std::to_string(r.primary_lsn->epoch));
            if (r.status) f.emplace_back("status", status_text(*r.status));
            break;
        }
        case MessageKind::RedirectError:
            if (m.record) f.emplace_back("rid", m.record->request.request_id);
            f.emplace_back("primary", m.primary ? m.primary->code() : "-");
            break;
        case MessageKind::ClientRead:
            f.emplace_back("rid", m.read_id.value_or("-"));
            f.emplace_back("key", m.key.value_or("-"));
            break;
        case MessageKind::ClientReadReply:
            f.emplace_back("rid", m.read_id.value_or("-"));
            f.emplace_back("key", m.key.value_or("-"));
            f.emplace_back("found", m.found.value_or(false) ? "1" : "0");
            if (m.found.value_or(false)) f.emplace_back("val", m.value.value_or(""));
            break;
        case MessageKind::Heartbeat:
            f.emplace_back("epoch", std::to_string(m.heartbeat->epoch));
            f.emplace_back("primary", m.heartbeat->primary.code());
            f.emplace_back("mode", m.heartbeat->sender_mode);
            f.emplace_back("last", key_text(m.heartbeat->last_committed));
            break;
        case MessageKind::CatchUpRequest:
            f.emplace_back("have", key_text(*m.catchup_from));
            break;
        case MessageKind::CatchUpTransfer:
            f.emplace_back("n", std::to_string(m.entries.size()));
            f.emplace_back("end", key_text(*m.sender_end));
            f.emplace_back("epoch", std::to_string(*m.epoch));
            f.emplace_back("primary", m.primary->code());
            break;
    }
    return f;
}

std::string render_trace_record(const TraceRecord& r) {
    std::string out = "t=" + std::to_string(r.at) + " " + r.endpoint + " " + r.tag;
    for (const auto& [k, v] : r.fields) out += " " + k + "=" + v;
    return out;
}

TraceRecord parse_trace_line(const std::string& line) {
    TraceRecord r;
    if (line.rfind("t=", 0) != 0) throw ParseError("trace line must start with t=");
    std::size_t pos = line.find(' ');
    if (pos == std::string::npos) throw ParseError("truncated trace line");
    r.at = std::stoll(line.substr(2, pos - 2));
    std::size_t p2 = line.find(' ', pos + 1);
    if (p2 == std::string::npos) throw ParseError("truncated trace line");
    r.endpoint = line.substr(pos + 1, p2 - pos - 1);
    std::size_t p3 = line.find(' ', p2 + 1);
    r.tag = line.substr(p2 + 1, p3 == std::string::npos ? std::string::npos
                                                        : p3 - p2 - 1);
    std::size_t cur = p3;
    while (cur != std::string::npos) {
        std::size_t start = cur + 1;
        std::size_t eq = line.find('=', start);
        if (eq == std::string::npos) throw ParseError("field without '='");
        std::string key = line.substr(start, eq - start);
        if (key == "status") {
            // status values contain spaces and are always the final field
            r.fields.emplace_back(key, line.substr(eq + 1));
            break;
        }
        std::size_t end = line.find(' ', eq + 1);
        r.fields.emplace_back(key, line.substr(eq + 1,
                                               end == std::string::npos
                                                   ? std::string::npos
                                                   : end - eq - 1));
        cur = end;
    }
    return r;
}

std::vector<std::string> trace_header(const Scenario& s) {
    std::string prios;
    for (std::size_t i = 0; i < s.priorities.size(); ++i)
        prios += (i ? "," : "") + std::to_string(s.priorities[i]);
    std::vector<std::string> h;
    h.push_back("# repsim trace v1");
    h.push_back("# topology branches=" + std::to_string(s.branches) +
                " semis=" + std::to_string(s.semis_per_branch) +
                " priorities=" + prios);
    h.push_back("# timing hb=" + std::to_string(s.heartbeat_ms) +
                " timeout=" + std::to_string(s.session_timeout_ms) +
                " latency=" + std::to_string(s.default_latency_ms) +
                " client=" + std::to_string(s.client_latency_ms) +
                " retry=" + std::to_string(s.client_retry_ms) +
                " jitter=" + std::to_string(s.jitter_ms) +
                " seed=" + std::to_string(s.seed));
    h.push_back("# faults n=" + std::to_string(s.faults.size()));
    return h;
}

std::string render_trace(const Scenario& s, const std::vector<TraceRecord>& recs) {
    std::string out;
    for (const auto& line : trace_header(s)) out += line + "\n";
    for (const auto& r : recs) out += render_trace_record(r) + "\n";
    return out;
}

ParsedTrace parse_trace(const std::string& text) {
    ParsedTrace t;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream hs(line);
            std::string hash, word, kv;
            hs >> hash >> word;
            auto grab = [&](const std::string& token, const std::string& key) {
                if (token.rfind(key + "=", 0) == 0)
                    return token.substr(key.size() + 1);
                return std::string();
            };
            while (hs >> kv) {
                if (word == "topology") {
                    if (auto v = grab(kv, "branches"); !v.empty())
                        t.branches = std::stoi(v);
                    if (auto v = grab(kv, "semis"); !v.empty()) t.semis = std::stoi(v);
                } else if (word == "timing") {
                    if (auto v = grab(kv, "hb"); !v.empty())
                        t.heartbeat_ms = std::stoll(v);
                    if (auto v = grab(kv, "timeout"); !v.empty())
                        t.session_timeout_ms = std::stoll(v);
                } else if (word == "faults") {
                    if (auto v = grab(kv, "n"); !v.empty())
                        t.fault_count = std::stoul(v);
                }
            }
            continue;
        }
        try {
            t.records.push_back(parse_trace_line(line));
            t.line_numbers.push_back(line_no);
        } catch (const std::exception& e) {
            throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return t;
}

}  // namespace repsim
