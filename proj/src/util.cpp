#include <arpa/inet.h>

#include <cstdio>
#include <cstdlib>
#include <stdexcept>

#include "stamp/bytes.hpp"
#include "stamp/errors.hpp"
#include "stamp/ipv6.hpp"

namespace stamp {

const char* errc_name(Errc c) {
    switch (c) {
        case Errc::ok: return "ok";
        case Errc::too_short: return "too_short";
        case Errc::ssid_zero: return "ssid_zero";
        case Errc::bad_error_estimate: return "bad_error_estimate";
        case Errc::empty_segment_list: return "empty_segment_list";
        case Errc::too_many_segments: return "too_many_segments";
        case Errc::len_mismatch: return "len_mismatch";
        case Errc::bad_header: return "bad_header";
        case Errc::checksum_mismatch: return "checksum_mismatch";
        case Errc::era_overflow: return "era_overflow";
        case Errc::duplicate_ssid: return "duplicate_ssid";
        case Errc::invalid_config: return "invalid_config";
        case Errc::unknown_ssid: return "unknown_ssid";
        case Errc::not_running: return "not_running";
        case Errc::illegal_transition: return "illegal_transition";
        case Errc::not_initialized: return "not_initialized";
        case Errc::already_initialized: return "already_initialized";
        case Errc::unsupported: return "unsupported";
        case Errc::bad_request: return "bad_request";
        case Errc::unreachable: return "unreachable";
        case Errc::unroutable: return "unroutable";
        case Errc::privilege_required: return "privilege_required";
        case Errc::empty_series: return "empty_series";
        case Errc::non_monotone: return "non_monotone";
        case Errc::io_error: return "io_error";
        case Errc::parse_error: return "parse_error";
    }
    return "unknown";
}

std::string to_hex(ByteView b) {
    static const char* digits = "0123456789abcdef";
    std::string s;
    s.reserve(b.size() * 2);
    for (uint8_t v : b) {
        s.push_back(digits[v >> 4]);
        s.push_back(digits[v & 0x0F]);
    }
    return s;
}

Bytes from_hex(const std::string& s) {
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        return -1;
    };
    Bytes out;
    int hi = -1;
    for (char c : s) {
        if (c == ' ' || c == '\n' || c == '\t' || c == '\r') continue;
        int v = nibble(c);
        if (v < 0) throw std::invalid_argument("bad hex digit");
        if (hi < 0) {
            hi = v;
        } else {
            out.push_back(static_cast<uint8_t>((hi << 4) | v));
            hi = -1;
        }
    }
    if (hi >= 0) throw std::invalid_argument("odd hex length");
    return out;
}

std::string Ipv6Addr::str() const {
    char buf[INET6_ADDRSTRLEN] = {};
    if (!inet_ntop(AF_INET6, octets.data(), buf, sizeof(buf))) return "?";
    return buf;
}

std::optional<Ipv6Addr> Ipv6Addr::parse(const std::string& text) {
    Ipv6Addr a;
    if (inet_pton(AF_INET6, text.c_str(), a.octets.data()) != 1) return std::nullopt;
    return a;
}

Ipv6Addr Ipv6Addr::must_parse(const std::string& text) {
    auto a = parse(text);
    if (!a) {
        std::fprintf(stderr, "bad IPv6 address literal: %s\n", text.c_str());
        std::abort();
    }
    return *a;
}

}  // namespace stamp
