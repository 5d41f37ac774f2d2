#ifndef STAMP_BYTES_HPP_
#define STAMP_BYTES_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace stamp {

using Bytes = std::vector<uint8_t>;
using ByteView = std::span<const uint8_t>;

// All wire formats in this project are big-endian.

inline void put_u16(Bytes& b, uint16_t v) {
    b.push_back(static_cast<uint8_t>(v >> 8));
    b.push_back(static_cast<uint8_t>(v));
}

inline void put_u32(Bytes& b, uint32_t v) {
    b.push_back(static_cast<uint8_t>(v >> 24));
    b.push_back(static_cast<uint8_t>(v >> 16));
    b.push_back(static_cast<uint8_t>(v >> 8));
    b.push_back(static_cast<uint8_t>(v));
}

inline uint16_t get_u16(ByteView b, size_t off) {
    return static_cast<uint16_t>((b[off] << 8) | b[off + 1]);
}

inline uint32_t get_u32(ByteView b, size_t off) {
    return (static_cast<uint32_t>(b[off]) << 24) | (static_cast<uint32_t>(b[off + 1]) << 16) |
           (static_cast<uint32_t>(b[off + 2]) << 8) | static_cast<uint32_t>(b[off + 3]);
}

inline void store_u16(uint8_t* p, uint16_t v) {
    p[0] = static_cast<uint8_t>(v >> 8);
    p[1] = static_cast<uint8_t>(v);
}

inline void store_u32(uint8_t* p, uint32_t v) {
    p[0] = static_cast<uint8_t>(v >> 24);
    p[1] = static_cast<uint8_t>(v >> 16);
    p[2] = static_cast<uint8_t>(v >> 8);
    p[3] = static_cast<uint8_t>(v);
}

std::string to_hex(ByteView b);
Bytes from_hex(const std::string& s);  // throws std::invalid_argument on bad input

}  // namespace stamp

#endif  // STAMP_BYTES_HPP_
