#pragma once

#include <map>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "repsim/server_id.hpp"

namespace repsim {

// Failover priority of a synchronous secondary; rank 1 promotes first.
struct SyncPriority {
    int rank = 0;
    auto operator<=>(const SyncPriority&) const = default;
};

struct Branch {
    ServerId sync;
    SyncPriority priority;
    std::vector<ServerId> children;  // semi-synchronous secondaries
};

// The region layout: primary at the center, sync branches around it, each
// with its semi-synchronous children. No semi<->primary edge exists in the
// fault-free graph; commits reach semis through their sync parent.
// Immutable after construction.
class RegionTopology {
  public:
    RegionTopology(std::vector<Branch> branches,
                   std::map<std::pair<EndpointId, EndpointId>, TimeMs> links);

    const std::vector<Branch>& branches() const { return branches_; }
    ServerId primary() const { return primary_id(); }

    bool contains(const ServerId& s) const { return servers_.count(s) != 0; }
    const std::vector<ServerId>& servers() const { return server_list_; }
    std::size_t server_count() const { return server_list_.size(); }

    // semi -> its branch sync, sync -> primary, primary -> none.
    std::optional<ServerId> parent_of(const ServerId& s) const;
    const std::vector<ServerId>& children_of(const ServerId& s) const;
    int priority_of(const ServerId& sync) const;

    // Directed latency; endpoints that are not server codes fall back to
    // the reserved "client" id.
    TimeMs latency(const EndpointId& from, const EndpointId& to) const;
    void set_latency(const EndpointId& from, const EndpointId& to, TimeMs ms);

    std::size_t protocol_edge_count() const;  // parent edges

  private:
    std::vector<Branch> branches_;
    std::set<ServerId> servers_;
    std::vector<ServerId> server_list_;
    std::map<ServerId, ServerId> parent_;
    std::map<ServerId, std::vector<ServerId>> children_;
    std::map<std::pair<EndpointId, EndpointId>, TimeMs> links_;
    TimeMs default_latency_ = 10;
    static const std::vector<ServerId> kNoChildren;
};

// Builds the id-scheme topology: primary 01, branch syncs B1, semis B2..:
// all protocol and client edges get default_latency_ms. priorities[i] is the
// rank of branch i+1's sync.
RegionTopology build_topology(int branch_count, int semis_per_branch,
                              const std::vector<int>& priorities,
                              TimeMs default_latency_ms);

// Sync secondaries ascending by priority rank, minus the caller's down set.
std::vector<ServerId> failover_order(const RegionTopology& topo,
                                     const std::set<ServerId>& down = {});

}  // namespace repsim
