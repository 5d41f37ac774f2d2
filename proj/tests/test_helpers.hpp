#ifndef STAMP_TEST_HELPERS_HPP_
#define STAMP_TEST_HELPERS_HPP_

#include <random>

#include "stamp/ipv6.hpp"
#include "stamp/wire.hpp"

namespace stamp::testing {

using Rng = std::mt19937_64;

inline uint32_t rand_u32(Rng& rng) { return static_cast<uint32_t>(rng()); }
inline uint16_t rand_u16(Rng& rng) { return static_cast<uint16_t>(rng()); }

inline NtpTimestamp rand_ntp(Rng& rng) {
    return NtpTimestamp{rand_u32(rng), rand_u32(rng)};
}

inline ErrorEstimate rand_error_estimate(Rng& rng) {
    ErrorEstimate ee;
    ee.sync = rng() & 1;
    ee.ptp_format = rng() & 1;
    ee.scale = static_cast<uint8_t>(rng() & 0x3F);
    ee.multiplier = static_cast<uint8_t>(1 + rng() % 255);  // valid: nonzero
    return ee;
}

inline uint16_t rand_ssid(Rng& rng) { return static_cast<uint16_t>(1 + rng() % 65535); }

inline SenderTestPayload rand_sender_payload(Rng& rng) {
    SenderTestPayload p;
    p.sequence_number = rand_u32(rng);
    p.timestamp = rand_ntp(rng);
    p.error_estimate = rand_error_estimate(rng);
    p.ssid = rand_ssid(rng);
    return p;
}

inline ReflectorTestPayload rand_reflector_payload(Rng& rng) {
    ReflectorTestPayload p;
    p.sequence_number = rand_u32(rng);
    p.timestamp = rand_ntp(rng);
    p.error_estimate = rand_error_estimate(rng);
    p.receive_timestamp = rand_ntp(rng);
    p.ssid = rand_ssid(rng);
    p.sender_sequence_number = rand_u32(rng);
    p.sender_timestamp = rand_ntp(rng);
    p.sender_error_estimate = rand_error_estimate(rng);
    p.sender_ttl = static_cast<uint8_t>(rng());
    return p;
}

inline Ipv6Addr rand_addr(Rng& rng) {
    Ipv6Addr a;
    for (auto& o : a.octets) o = static_cast<uint8_t>(rng());
    return a;
}

inline SegmentRoutingHeader rand_srh(Rng& rng, size_t max_segments = kMaxSrhSegments) {
    SegmentRoutingHeader srh;
    size_t n = 1 + rng() % max_segments;
    for (size_t i = 0; i < n; ++i) srh.segments.push_back(rand_addr(rng));
    srh.segments_left = static_cast<uint8_t>(rng() % n);
    srh.flags = static_cast<uint8_t>(rng());
    srh.tag = rand_u16(rng);
    return srh;
}

// A sender test packet as it arrives at a reflector listening on `dst`.
inline Bytes make_sender_packet(const Ipv6Addr& src, const Ipv6Addr& dst, uint16_t ssid,
                                uint32_t seq, NtpTimestamp t1, uint8_t hop_limit = 64,
                                uint16_t dst_port = kDefaultStampPort) {
    TestDatagram d;
    d.src_addr = src;
    d.dst_addr = dst;
    d.hop_limit = hop_limit;
    d.src_port = kDefaultStampPort;
    d.dst_port = dst_port;
    d.payload = SenderTestPayload{seq, t1, ErrorEstimate{}, ssid};
    return build_test_datagram(d).value();
}

// A reflector test packet as it arrives back at a sender listening on `dst`.
inline Bytes make_reflector_packet(const Ipv6Addr& src, const Ipv6Addr& dst, uint16_t ssid,
                                   uint32_t seq, NtpTimestamp t1, NtpTimestamp t2,
                                   NtpTimestamp t3, uint16_t dst_port = kDefaultStampPort) {
    TestDatagram d;
    d.src_addr = src;
    d.dst_addr = dst;
    d.src_port = kDefaultStampPort;
    d.dst_port = dst_port;
    ReflectorTestPayload p;
    p.sequence_number = seq;
    p.timestamp = t3;
    p.receive_timestamp = t2;
    p.ssid = ssid;
    p.sender_sequence_number = seq;
    p.sender_timestamp = t1;
    p.sender_ttl = 64;
    d.payload = p;
    return build_test_datagram(d).value();
}

}  // namespace stamp::testing

#endif  // STAMP_TEST_HELPERS_HPP_
