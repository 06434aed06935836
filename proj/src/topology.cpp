#include "repsim/topology.hpp"

#include <algorithm>
#include <set>

namespace repsim {

const char* role_name(Role r) {
    switch (r) {
        case Role::Primary: return "primary";
        case Role::SyncSecondary: return "sync";
        case Role::SemiSyncSecondary: return "semi";
    }
    return "?";
}

ServerId parse_server_id(const std::string& code) {
    if (code.size() != 2 || code[0] < '0' || code[0] > '9' || code[1] < '0' ||
        code[1] > '9')
        throw ParseError("bad server id '" + code + "'");
    ServerId s{static_cast<std::uint8_t>(code[0] - '0'),
               static_cast<std::uint8_t>(code[1] - '0')};
    if (s.node == 0 || (s.branch == 0 && s.node != 1))
        throw ParseError("bad server id '" + code + "'");
    return s;
}

const std::vector<ServerId> RegionTopology::kNoChildren;

RegionTopology::RegionTopology(
    std::vector<Branch> branches,
    std::map<std::pair<EndpointId, EndpointId>, TimeMs> links)
    : branches_(std::move(branches)), links_(std::move(links)) {
    servers_.insert(primary_id());
    server_list_.push_back(primary_id());
    std::set<int> ranks;
    for (const auto& b : branches_) {
        if (!b.sync.is_sync_id())
            throw ConfigError("branch head " + b.sync.code() + " is not a sync id");
        if (!ranks.insert(b.priority.rank).second)
            throw ConfigError("duplicate failover priority " +
                              std::to_string(b.priority.rank));
        if (!servers_.insert(b.sync).second)
            throw ConfigError("duplicate server " + b.sync.code());
        server_list_.push_back(b.sync);
        parent_[b.sync] = primary_id();
        children_[primary_id()];  // primary has no semi children
        for (const auto& c : b.children) {
            if (!c.is_semi_id() || c.branch != b.sync.branch)
                throw ConfigError("semi " + c.code() + " not in branch " +
                                  b.sync.code());
            if (!servers_.insert(c).second)
                throw ConfigError("duplicate server " + c.code());
            server_list_.push_back(c);
            parent_[c] = b.sync;
            children_[b.sync].push_back(c);
        }
    }
    for (const auto& [pair, ms] : links_)
        if (ms <= 0)
            throw ConfigError("non-positive latency on link " + pair.first + "->" +
                              pair.second);
}

std::optional<ServerId> RegionTopology::parent_of(const ServerId& s) const {
    if (!contains(s)) throw LookupError("unknown server " + s.code());
    if (s.is_primary_id()) return std::nullopt;
    return parent_.at(s);
}

const std::vector<ServerId>& RegionTopology::children_of(const ServerId& s) const {
    if (!contains(s)) throw LookupError("unknown server " + s.code());
    auto it = children_.find(s);
    return it == children_.end() ? kNoChildren : it->second;
}

int RegionTopology::priority_of(const ServerId& sync) const {
    for (const auto& b : branches_)
        if (b.sync == sync) return b.priority.rank;
    throw LookupError("no priority for " + sync.code());
}

TimeMs RegionTopology::latency(const EndpointId& from, const EndpointId& to) const {
    auto is_server = [this](const EndpointId& e) {
        if (e.size() != 2) return false;
        try {
            return contains(parse_server_id(e));
        } catch (const ParseError&) {
            return false;
        }
    };
    EndpointId f = is_server(from) ? from : kClientEndpoint;
    EndpointId t = is_server(to) ? to : kClientEndpoint;
    auto it = links_.find({f, t});
    if (it != links_.end()) return it->second;
    return default_latency_;
}

void RegionTopology::set_latency(const EndpointId& from, const EndpointId& to,
                                 TimeMs ms) {
    if (ms <= 0)
        throw ConfigError("non-positive latency on link " + from + "->" + to);
    links_[{from, to}] = ms;
}

std::size_t RegionTopology::protocol_edge_count() const { return parent_.size(); }

RegionTopology build_topology(int branch_count, int semis_per_branch,
                              const std::vector<int>& priorities,
                              TimeMs default_latency_ms) {
    if (branch_count < 1)
        throw ConfigError("branch_count must be >= 1");
    if (branch_count > 4)
        throw ConfigError("branch_count > 4 exhausts the id scheme");
    if (semis_per_branch < 0 || semis_per_branch > 8)
        throw ConfigError("semis_per_branch must be in 0..8");
    if (static_cast<int>(priorities.size()) != branch_count)
        throw ConfigError("need one priority per branch");
    std::set<int> seen;
    for (int p : priorities) {
        if (p < 1 || p > branch_count)
            throw ConfigError("priority " + std::to_string(p) + " out of range");
        if (!seen.insert(p).second)
            throw ConfigError("duplicate priority " + std::to_string(p));
    }
    if (default_latency_ms <= 0) throw ConfigError("default latency must be > 0");

    std::vector<Branch> branches;
    for (int b = 1; b <= branch_count; ++b) {
        Branch br;
        br.sync = ServerId{static_cast<std::uint8_t>(b), 1};
        br.priority = SyncPriority{priorities[static_cast<std::size_t>(b - 1)]};
        for (int n = 2; n < 2 + semis_per_branch; ++n)
            br.children.push_back(
                ServerId{static_cast<std::uint8_t>(b), static_cast<std::uint8_t>(n)});
        branches.push_back(std::move(br));
    }

    std::map<std::pair<EndpointId, EndpointId>, TimeMs> links;
    auto both_ways = [&](const EndpointId& a, const EndpointId& b) {
        links[{a, b}] = default_latency_ms;
        links[{b, a}] = default_latency_ms;
    };
    const EndpointId prim = primary_id().code();
    for (const auto& br : branches) {
        both_ways(br.sync.code(), prim);
        for (const auto& c : br.children) both_ways(c.code(), br.sync.code());
    }
    return RegionTopology(std::move(branches), std::move(links));
}

std::vector<ServerId> failover_order(const RegionTopology& topo,
                                     const std::set<ServerId>& down) {
    std::vector<std::pair<int, ServerId>> ranked;
    for (const auto& b : topo.branches())
        if (!down.count(b.sync)) ranked.emplace_back(b.priority.rank, b.sync);
    std::sort(ranked.begin(), ranked.end());
    std::vector<ServerId> out;
    for (const auto& [rank, id] : ranked) out.push_back(id);
    return out;
}

}  // namespace repsim
