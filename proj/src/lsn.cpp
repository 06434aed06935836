#include "repsim/lsn.hpp"

#include <cctype>

#include "repsim/errors.hpp"

namespace repsim {

std::string format_lsn(const Lsn& l) {
    std::string digits = std::to_string(l.counter);
    if (digits.size() < 4) digits.insert(0, 4 - digits.size(), '0');
    std::string out;
    out += l.role_char;
    out += l.server.code();
    out += 'W';
    out += digits;
    return out;
}

Lsn parse_lsn(const std::string& text, std::int64_t epoch) {
    if (text.size() < 8 || (text[0] != 'P' && text[0] != 'S') || text[3] != 'W')
        throw ParseError("malformed LSN '" + text + "'");
    Lsn l;
    l.role_char = text[0];
    l.server = parse_server_id(text.substr(1, 2));
    l.epoch = epoch;
    const std::string digits = text.substr(4);
    if (digits.size() > 4 && digits[0] == '0')
        throw ParseError("malformed LSN '" + text + "'");  // over-padded
    std::int64_t counter = 0;
    for (char c : digits) {
        if (!std::isdigit(static_cast<unsigned char>(c)))
            throw ParseError("malformed LSN '" + text + "'");
        counter = counter * 10 + (c - '0');
    }
    if (counter < 1) throw ParseError("malformed LSN '" + text + "'");
    l.counter = counter;
    return l;
}

}  // namespace repsim
