#pragma once

#include <compare>
#include <cstdint>
#include <string>

#include "repsim/errors.hpp"

namespace repsim {

// Simulated time in integer milliseconds.
using TimeMs = std::int64_t;

// Endpoint ids name either a server ("01", "42") or a client ("c1").
using EndpointId = std::string;

// Reserved endpoint id standing for any client in the link-latency table.
inline const EndpointId kClientEndpoint = "client";

enum class Role { Primary, SyncSecondary, SemiSyncSecondary };

const char* role_name(Role r);

// Two-digit server code: primary "01"; sync secondaries "B1" with branch
// digit B in 1..4; semi-synchronous "BN" with node digit N >= 2.
struct ServerId {
    std::uint8_t branch = 0;  // 0 for the primary
    std::uint8_t node = 1;

    std::string code() const {
        std::string s(2, '0');
        s[0] = static_cast<char>('0' + branch);
        s[1] = static_cast<char>('0' + node);
        return s;
    }

    bool is_primary_id() const { return branch == 0; }
    bool is_sync_id() const { return branch >= 1 && node == 1; }
    bool is_semi_id() const { return branch >= 1 && node >= 2; }

    auto operator<=>(const ServerId&) const = default;
};

inline ServerId primary_id() { return ServerId{0, 1}; }

ServerId parse_server_id(const std::string& code);

}  // namespace repsim
