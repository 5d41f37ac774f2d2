#ifndef STAMP_WIRE_HPP_
#define STAMP_WIRE_HPP_

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "stamp/bytes.hpp"
#include "stamp/errors.hpp"
#include "stamp/ipv6.hpp"
#include "stamp/ntp_time.hpp"

namespace stamp {

// STAMP test packets are UDP, port 862 by default (RFC 8762).
inline constexpr uint16_t kDefaultStampPort = 862;

// Both unauthenticated test-packet bodies are 44 bytes; the sender body is
// padded with MBZ so the two directions match in size.
inline constexpr size_t kTestPayloadSize = 44;

inline constexpr size_t kIpv6HeaderSize = 40;
inline constexpr size_t kUdpHeaderSize = 8;

// Safety bound on SID list length; RFC 8754 allows more but nothing in
// this system needs it.
inline constexpr size_t kMaxSrhSegments = 16;

// Error Estimate field (RFC 8762 section 4.2.1): S | Z | Scale(6) | Multiplier(8).
// Z selects the timestamp wire format: 0 = NTP, 1 = PTPv2.
struct ErrorEstimate {
    bool sync = false;
    bool ptp_format = false;
    uint8_t scale = 0;
    uint8_t multiplier = 1;

    bool operator==(const ErrorEstimate&) const = default;
};

Result<uint16_t> encode_error_estimate(const ErrorEstimate& ee);
ErrorEstimate decode_error_estimate(uint16_t wire);

// Session-Sender test packet body (unauthenticated, SSID extension):
//   0  sequence number      4
//   4  timestamp (T1)       8
//  12  error estimate       2
//  14  ssid                 2
//  16  MBZ                 28
struct SenderTestPayload {
    uint32_t sequence_number = 0;
    NtpTimestamp timestamp;  // T1
    ErrorEstimate error_estimate;
    uint16_t ssid = 0;

    bool operator==(const SenderTestPayload&) const = default;
};

// Session-Reflector test packet body (unauthenticated, SSID extension):
//   0  sequence number      4
//   4  timestamp (T3)       8
//  12  error estimate       2
//  14  ssid                 2
//  16  receive timestamp    8   (T2)
//  24  sender seq number    4
//  28  sender timestamp     8   (echo of T1)
//  36  sender err estimate  2
//  38  MBZ                  2
//  40  sender TTL           1
//  41  MBZ                  3
struct ReflectorTestPayload {
    uint32_t sequence_number = 0;
    NtpTimestamp timestamp;  // T3
    ErrorEstimate error_estimate;
    NtpTimestamp receive_timestamp;  // T2
    uint16_t ssid = 0;
    uint32_t sender_sequence_number = 0;
    NtpTimestamp sender_timestamp;  // echoed T1
    ErrorEstimate sender_error_estimate;
    uint8_t sender_ttl = 0;

    bool operator==(const ReflectorTestPayload&) const = default;
};

// Encoders are strict: ssid must be nonzero, the packet's own error
// estimate must have a nonzero multiplier. The echoed sender error
// estimate in a reflector packet is copied verbatim, not validated.
Result<Bytes> encode_sender_payload(const SenderTestPayload& p);
Result<Bytes> encode_reflector_payload(const ReflectorTestPayload& p);

// Decoders tolerate nonzero MBZ bytes and report them via the flag.
struct SenderDecode {
    SenderTestPayload payload;
    bool mbz_nonzero = false;
};
struct ReflectorDecode {
    ReflectorTestPayload payload;
    bool mbz_nonzero = false;
};
Result<SenderDecode> decode_sender_payload(ByteView b);
Result<ReflectorDecode> decode_reflector_payload(ByteView b);

// IPv6 Segment Routing Header, routing type 4 (RFC 8754). `segments` is in
// path order (first hop first); the wire stores it reversed, so
// Segment List[0] on the wire is the final destination.
struct SegmentRoutingHeader {
    uint8_t next_header = 17;
    uint8_t segments_left = 0;
    uint8_t flags = 0;
    uint16_t tag = 0;
    std::vector<Ipv6Addr> segments;

    uint8_t last_entry() const { return static_cast<uint8_t>(segments.size() - 1); }
    size_t wire_size() const { return 8 + 16 * segments.size(); }

    bool operator==(const SegmentRoutingHeader&) const = default;
};

Result<Bytes> encode_srh(const SegmentRoutingHeader& srh);
Result<SegmentRoutingHeader> decode_srh(ByteView b);

enum class PayloadKind { sender, reflector };

// One full test datagram: IPv6 header, optional SRH, UDP, 44-byte body.
struct TestDatagram {
    Ipv6Addr src_addr;
    Ipv6Addr dst_addr;
    uint8_t traffic_class = 0;
    uint32_t flow_label = 0;  // 20 bits
    uint8_t hop_limit = 64;
    std::optional<SegmentRoutingHeader> srh;
    uint16_t src_port = kDefaultStampPort;
    uint16_t dst_port = kDefaultStampPort;
    std::variant<SenderTestPayload, ReflectorTestPayload> payload;

    PayloadKind payload_kind() const {
        return std::holds_alternative<SenderTestPayload>(payload) ? PayloadKind::sender
                                                                  : PayloadKind::reflector;
    }

    bool operator==(const TestDatagram&) const = default;
};

// Final destination for routing and for the UDP pseudo-header: with an SRH
// present this is the last segment of the path (Segment List[0] on the
// wire), per the RFC 8200 section 8.1 checksum rule.
Ipv6Addr final_destination(const TestDatagram& d);

Result<Bytes> build_test_datagram(const TestDatagram& d);

struct ParsedDatagram {
    TestDatagram datagram;
    bool checksum_ok = true;
    bool mbz_nonzero = false;
};

// Inverse of build_test_datagram. A checksum mismatch is reported in the
// result, not an error, so bad packets can still be inspected. When `kind`
// is not given the body is classified by destination port: the default
// STAMP port receives sender packets.
Result<ParsedDatagram> parse_test_datagram(ByteView b,
                                           std::optional<PayloadKind> kind = std::nullopt);

// Cheap header-only peeks used by transports to route and filter without
// a full parse. Return nullopt on malformed input.
std::optional<Ipv6Addr> peek_final_destination(ByteView b);
std::optional<uint16_t> peek_udp_dst_port(ByteView b);
std::optional<uint16_t> peek_stamp_ssid(ByteView b);

// UDP checksum over the IPv6 pseudo-header (src, final dst, length, 17)
// plus header and payload, with the checksum field taken as zero.
uint16_t udp_checksum(const Ipv6Addr& src, const Ipv6Addr& final_dst, ByteView udp_segment);

// Plain IPv6/UDP packet with an arbitrary payload; used for the non-STAMP
// "user" traffic in benchmarks.
Bytes build_udp6(const Ipv6Addr& src, const Ipv6Addr& dst, uint16_t src_port, uint16_t dst_port,
                 ByteView payload, uint8_t hop_limit = 64);

}  // namespace stamp

#endif  // STAMP_WIRE_HPP_
