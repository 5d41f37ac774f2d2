#ifndef STAMP_IPV6_HPP_
#define STAMP_IPV6_HPP_

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>

namespace stamp {

// 128-bit IPv6 address in network byte order.
struct Ipv6Addr {
    std::array<uint8_t, 16> octets{};

    auto operator<=>(const Ipv6Addr&) const = default;

    bool is_unspecified() const {
        for (uint8_t o : octets)
            if (o != 0) return false;
        return true;
    }

    std::string str() const;

    static std::optional<Ipv6Addr> parse(const std::string& text);
    // Convenience for literals in tests and configs; aborts on bad input.
    static Ipv6Addr must_parse(const std::string& text);
};

}  // namespace stamp

#endif  // STAMP_IPV6_HPP_
