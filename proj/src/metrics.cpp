#include "repsim/metrics.hpp"

#include <algorithm>
#include <set>

#include <json.hpp>

namespace repsim {

namespace {

const std::set<std::string> kWriteFlowKinds = {
    "ForwardWrite", "CommitBroadcast", "CommitToSemi",
    "AckToPrimary", "AckToSyncParent", "ClientWriteAck"};

}  // namespace

const WriteMetric* Metrics::write(const std::string& rid) const {
    for (const auto& w : writes)
        if (w.rid == rid) return &w;
    return nullptr;
}

Metrics build_metrics(const std::vector<TraceRecord>& records,
                      const std::vector<std::string>& server_codes,
                      TimeMs end_time, const std::string& reason) {
    Metrics m;
    m.end_time = end_time;
    m.reason = reason;
    for (const auto& s : server_codes) {
        m.servers[s];
        m.availability.push_back({0, s, "rw"});
    }

    std::map<std::string, WriteMetric> writes;
    std::map<std::string, ReadMetric> reads;
    std::vector<std::string> write_order, read_order;

    for (const auto& r : records) {
        if (r.tag == "clientop" || r.tag == "retry") {
            const std::string rid = *r.field("rid");
            const bool is_write = *r.field("op") == "write";
            if (is_write) {
                auto [it, fresh] = writes.try_emplace(rid);
                WriteMetric& w = it->second;
                if (fresh) {
                    write_order.push_back(rid);
                    w.rid = rid;
                    w.client = r.endpoint;
                    w.entry = *r.field("target");
                    w.sent_at = r.at;
                }
                w.routed = *r.field("route");
                w.attempts = std::stoi(*r.field("attempt"));
            } else {
                auto [it, fresh] = reads.try_emplace(rid);
                ReadMetric& rd = it->second;
                if (fresh) {
                    read_order.push_back(rid);
                    rd.rid = rid;
                    rd.client = r.endpoint;
                    rd.sent_at = r.at;
                }
                rd.server = *r.field("route");
            }
        } else if (r.tag == "send") {
            const std::string& kind = *r.field("kind");
            if (kWriteFlowKinds.count(kind)) {
                if (const auto* rid = r.field("rid")) {
                    auto it = writes.find(*rid);
                    if (it != writes.end()) it->second.messages += 1;
                }
            }
        } else if (r.tag == "deliver") {
            const std::string& kind = *r.field("kind");
            if (kind == "ClientWriteAck") {
                auto it = writes.find(*r.field("rid"));
                if (it != writes.end() && it->second.acked_at < 0) {
                    it->second.acked_at = r.at;
                    if (const auto* plsn = r.field("plsn")) it->second.plsn = *plsn;
                    if (const auto* ep = r.field("ep"))
                        it->second.epoch = std::stoll(*ep);
                }
            } else if (kind == "ClientReadReply") {
                auto it = reads.find(*r.field("rid"));
                if (it != reads.end() && it->second.replied_at < 0) {
                    it->second.replied_at = r.at;
                    if (const auto* k = r.field("key")) it->second.key = *k;
                    it->second.found = *r.field("found") == "1";
                    if (const auto* v = r.field("val")) it->second.value = *v;
                }
            }
        } else if (r.tag == "apply") {
            m.servers[r.endpoint].applied += 1;
        } else if (r.tag == "read") {
            m.servers[r.endpoint].reads += 1;
        } else if (r.tag == "mode") {
            m.availability.push_back({r.at, r.endpoint, *r.field("m")});
        } else if (r.tag == "promote") {
            m.promotions.push_back({r.at, r.endpoint, std::stoll(*r.field("epoch"))});
        }
    }

    for (const auto& rid : write_order) m.writes.push_back(writes[rid]);
    for (const auto& rid : read_order) m.reads.push_back(reads[rid]);
    return m;
}

std::string metrics_to_json(const Metrics& m) {
    nlohmann::ordered_json j;
    j["reason"] = m.reason;
    j["end_time"] = m.end_time;
    j["writes"] = nlohmann::ordered_json::array();
    for (const auto& w : m.writes) {
        nlohmann::ordered_json e;
        e["rid"] = w.rid;
        e["client"] = w.client;
        e["entry"] = w.entry;
        e["routed"] = w.routed;
        e["sent_at"] = w.sent_at;
        e["acked"] = w.acked_at >= 0;
        if (w.acked_at >= 0) {
            e["acked_at"] = w.acked_at;
            e["latency_ms"] = w.latency();
            e["plsn"] = w.plsn;
            e["epoch"] = w.epoch;
        }
        e["attempts"] = w.attempts;
        e["messages"] = w.messages;
        j["writes"].push_back(std::move(e));
    }
    j["reads"] = nlohmann::ordered_json::array();
    for (const auto& r : m.reads) {
        nlohmann::ordered_json e;
        e["rid"] = r.rid;
        e["client"] = r.client;
        e["server"] = r.server;
        e["key"] = r.key;
        e["sent_at"] = r.sent_at;
        e["replied"] = r.replied_at >= 0;
        if (r.replied_at >= 0) {
            e["replied_at"] = r.replied_at;
            e["found"] = r.found;
            if (r.found) e["value"] = r.value;
        }
        j["reads"].push_back(std::move(e));
    }
    j["servers"] = nlohmann::ordered_json::object();
    for (const auto& [code, c] : m.servers)
        j["servers"][code] = {{"applied", c.applied}, {"reads", c.reads}};
    j["availability"] = nlohmann::ordered_json::array();
    for (const auto& a : m.availability)
        j["availability"].push_back(
            {{"at", a.at}, {"server", a.server}, {"mode", a.mode}});
    j["promotions"] = nlohmann::ordered_json::array();
    for (const auto& p : m.promotions)
        j["promotions"].push_back(
            {{"at", p.at}, {"server", p.server}, {"epoch", p.epoch}});
    return j.dump(2) + "\n";
}

}  // namespace repsim
