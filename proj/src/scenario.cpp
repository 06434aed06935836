#include "repsim/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "repsim/errors.hpp"
#include "repsim/topology.hpp"

namespace repsim {

namespace {

using nlohmann::json;

bool plain_token(const std::string& s) {
    if (s.empty()) return false;
    for (char c : s) {
        bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                  (c >= '0' && c <= '9') || c == '_' || c == '-' || c == '.';
        if (!ok) return false;
    }
    return true;
}

void require_token(const std::string& s, const std::string& what) {
    if (!plain_token(s))
        throw LoadError(what + " '" + s + "' must match [A-Za-z0-9_.-]+");
}

}  // namespace

void validate_scenario(Scenario& s) {
    // the topology builder re-validates shape; surface its errors as load errors
    RegionTopology topo = [&] {
        try {
            return build_topology(s.branches, s.semis_per_branch, s.priorities,
                                  s.default_latency_ms);
        } catch (const ConfigError& e) {
            throw LoadError(std::string("topology: ") + e.what());
        }
    }();

    if (s.session_timeout_ms <= s.heartbeat_ms)
        throw LoadError("session_timeout_ms must exceed heartbeat_ms");
    if (s.heartbeat_ms <= 0 || s.client_latency_ms <= 0 || s.client_retry_ms <= 0 ||
        s.max_time_ms <= 0)
        throw LoadError("timing values must be positive");
    if (s.jitter_ms < 0) throw LoadError("jitter_ms must be >= 0");

    for (std::size_t i = 0; i < s.links.size(); ++i) {
        const auto& l = s.links[i];
        if (l.latency_ms <= 0)
            throw LoadError("links[" + std::to_string(i) + "]: latency must be > 0");
        for (const EndpointId& e : {l.from, l.to}) {
            if (e == kClientEndpoint) continue;
            try {
                ServerId id = parse_server_id(e);
                if (!topo.contains(id)) throw LoadError("");
            } catch (...) {
                throw LoadError("links[" + std::to_string(i) + "]: unknown endpoint '" +
                                e + "'");
            }
        }
    }

    std::set<std::string> ids;
    int next_write = 1, next_read = 1;
    for (std::size_t i = 0; i < s.ops.size(); ++i) {
        auto& op = s.ops[i];
        const std::string where = "ops[" + std::to_string(i) + "]";
        if (op.at < 0) throw LoadError(where + ": time must be >= 0");
        require_token(op.client, where + ": client");
        require_token(op.key, where + ": key");
        if (op.is_write) require_token(op.value, where + ": value");
        ServerId entry;
        try {
            entry = parse_server_id(op.server);
        } catch (const ParseError&) {
            throw LoadError(where + ": bad server id '" + op.server + "'");
        }
        if (!topo.contains(entry))
            throw LoadError(where + ": unknown server " + op.server);
        if (op.id.empty())
            op.id = (op.is_write ? "w" : "r") +
                    std::to_string(op.is_write ? next_write++ : next_read++);
        require_token(op.id, where + ": id");
        if (!ids.insert(op.id).second)
            throw LoadError(where + ": duplicate op id '" + op.id + "'");
    }

    std::map<std::string, bool> down;
    std::stable_sort(s.faults.begin(), s.faults.end(),
                     [](const ScenarioFault& a, const ScenarioFault& b) {
                         return a.at < b.at;
                     });
    for (std::size_t i = 0; i < s.faults.size(); ++i) {
        const auto& f = s.faults[i];
        const std::string where = "faults[" + std::to_string(i) + "]";
        if (f.at < 0) throw LoadError(where + ": time must be >= 0");
        try {
            if (!topo.contains(parse_server_id(f.server))) throw LoadError("");
        } catch (...) {
            throw LoadError(where + ": unknown server '" + f.server + "'");
        }
        bool& is_down = down[f.server];
        if (f.crash == is_down)
            throw LoadError(where + (f.crash ? ": crash of already-down server "
                                             : ": recover of up server ") +
                            f.server);
        is_down = f.crash;
    }
    std::stable_sort(s.ops.begin(), s.ops.end(),
                     [](const ScenarioOp& a, const ScenarioOp& b) {
                         return a.at < b.at;
                     });
}

Scenario parse_scenario(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw LoadError(std::string("bad JSON: ") + e.what());
    }
    Scenario s;
    try {
        if (j.contains("topology")) {
            const auto& t = j["topology"];
            s.branches = t.value("branches", s.branches);
            s.semis_per_branch = t.value("semis_per_branch", s.semis_per_branch);
            if (t.contains("priorities"))
                s.priorities = t["priorities"].get<std::vector<int>>();
            else if (s.branches != 4) {
                s.priorities.clear();
                for (int i = 1; i <= s.branches; ++i) s.priorities.push_back(i);
            }
            s.default_latency_ms = t.value("default_latency_ms", s.default_latency_ms);
        }
        if (j.contains("timing")) {
            const auto& t = j["timing"];
            s.heartbeat_ms = t.value("heartbeat_ms", s.heartbeat_ms);
            s.session_timeout_ms = t.value("session_timeout_ms", s.session_timeout_ms);
            s.client_latency_ms = t.value("client_latency_ms", s.client_latency_ms);
            s.client_retry_ms = t.value("client_retry_ms", s.client_retry_ms);
            s.max_time_ms = t.value("max_time_ms", s.max_time_ms);
            s.jitter_ms = t.value("jitter_ms", s.jitter_ms);
            s.seed = t.value("seed", s.seed);
        }
        for (const auto& l : j.value("links", json::array())) {
            LinkOverride o;
            o.from = l.at("from").get<std::string>();
            o.to = l.at("to").get<std::string>();
            o.latency_ms = l.at("latency_ms").get<TimeMs>();
            s.links.push_back(std::move(o));
        }
        for (const auto& e : j.value("ops", json::array())) {
            ScenarioOp op;
            op.at = e.at("at").get<TimeMs>();
            op.client = e.at("client").get<std::string>();
            op.server = e.at("server").get<std::string>();
            std::string kind = e.at("op").get<std::string>();
            if (kind != "write" && kind != "read")
                throw LoadError("op must be 'write' or 'read'");
            op.is_write = kind == "write";
            op.key = e.at("key").get<std::string>();
            if (op.is_write) op.value = e.at("value").get<std::string>();
            op.id = e.value("id", std::string());
            s.ops.push_back(std::move(op));
        }
        for (const auto& e : j.value("faults", json::array())) {
            ScenarioFault f;
            f.at = e.at("at").get<TimeMs>();
            std::string kind = e.at("fault").get<std::string>();
            if (kind != "crash" && kind != "recover")
                throw LoadError("fault must be 'crash' or 'recover'");
            f.crash = kind == "crash";
            f.server = e.at("server").get<std::string>();
            s.faults.push_back(std::move(f));
        }
    } catch (const json::exception& e) {
        throw LoadError(std::string("bad scenario field: ") + e.what());
    }
    validate_scenario(s);
    return s;
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open scenario file " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return parse_scenario(buf.str());
    } catch (const LoadError& e) {
        throw LoadError(path + ": " + e.what());
    }
}

std::string scenario_to_json(const Scenario& s) {
    nlohmann::ordered_json j;
    j["topology"] = {{"branches", s.branches},
                     {"semis_per_branch", s.semis_per_branch},
                     {"priorities", s.priorities},
                     {"default_latency_ms", s.default_latency_ms}};
    j["timing"] = {{"heartbeat_ms", s.heartbeat_ms},
                   {"session_timeout_ms", s.session_timeout_ms},
                   {"client_latency_ms", s.client_latency_ms},
                   {"client_retry_ms", s.client_retry_ms},
                   {"max_time_ms", s.max_time_ms},
                   {"jitter_ms", s.jitter_ms},
                   {"seed", s.seed}};
    j["links"] = nlohmann::ordered_json::array();
    for (const auto& l : s.links)
        j["links"].push_back(
            {{"from", l.from}, {"to", l.to}, {"latency_ms", l.latency_ms}});
    j["ops"] = nlohmann::ordered_json::array();
    for (const auto& op : s.ops) {
        nlohmann::ordered_json e = {{"at", op.at},
                                    {"client", op.client},
                                    {"server", op.server},
                                    {"op", op.is_write ? "write" : "read"},
                                    {"key", op.key}};
        if (op.is_write) e["value"] = op.value;
        if (!op.id.empty()) e["id"] = op.id;
        j["ops"].push_back(std::move(e));
    }
    j["faults"] = nlohmann::ordered_json::array();
    for (const auto& f : s.faults)
        j["faults"].push_back({{"at", f.at},
                               {"fault", f.crash ? "crash" : "recover"},
                               {"server", f.server}});
    return j.dump(2) + "\n";
}

}  // namespace repsim
