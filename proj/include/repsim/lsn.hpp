#pragma once

#include <cstdint>
#include <string>

#include "repsim/server_id.hpp"

namespace repsim {

// Formatted log sequence number, e.g. S42W0001 or P01W0001. The textual
// form carries role char + server code + 'W' + counter (zero-padded to 4
// digits, wider past 9999). The epoch travels alongside the text, never
// inside it; commits order by (epoch, counter).
struct Lsn {
    char role_char = 'P';  // 'P' or 'S'
    ServerId server;
    std::int64_t epoch = 0;
    std::int64_t counter = 1;

    auto operator<=>(const Lsn&) const = default;
};

std::string format_lsn(const Lsn& l);

// Inverse of format_lsn; epoch is out-of-band and defaults to 0.
Lsn parse_lsn(const std::string& text, std::int64_t epoch = 0);

// Log position key: commits apply in ascending (epoch, counter).
struct LsnKey {
    std::int64_t epoch = 0;
    std::int64_t counter = 0;
    auto operator<=>(const LsnKey&) const = default;
};

inline LsnKey key_of(const Lsn& l) { return LsnKey{l.epoch, l.counter}; }

}  // namespace repsim
