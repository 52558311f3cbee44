#pragma once

#include <cstdint>
#include <string>

namespace unio {

// Readiness / interest operation set. Only the four channel operations
// may ever be set.
struct OpSet {
    static constexpr uint8_t ACCEPT = 1u << 0;
    static constexpr uint8_t CONNECT = 1u << 1;
    static constexpr uint8_t READ = 1u << 2;
    static constexpr uint8_t WRITE = 1u << 3;
    static constexpr uint8_t ALL = ACCEPT | CONNECT | READ | WRITE;

    uint8_t bits = 0;

    constexpr OpSet() = default;
    constexpr explicit OpSet(uint8_t b) : bits(static_cast<uint8_t>(b & ALL)) {}

    constexpr bool contains(uint8_t op) const { return (bits & op) != 0; }
    constexpr bool empty() const { return bits == 0; }

    constexpr OpSet operator&(OpSet other) const { return OpSet(static_cast<uint8_t>(bits & other.bits)); }
    constexpr OpSet operator|(OpSet other) const { return OpSet(static_cast<uint8_t>(bits | other.bits)); }
    constexpr bool operator==(const OpSet&) const = default;

    std::string to_string() const {
        std::string s;
        if (contains(ACCEPT)) s += "A";
        if (contains(CONNECT)) s += "C";
        if (contains(READ)) s += "R";
        if (contains(WRITE)) s += "W";
        return s.empty() ? "-" : s;
    }
};

} // namespace unio
