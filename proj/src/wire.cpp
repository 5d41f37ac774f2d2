#include "stamp/wire.hpp"

#include <algorithm>
#include <cstring>

namespace stamp {

namespace {

constexpr size_t kSrhFixedSize = 8;
constexpr uint8_t kNextHeaderRouting = 43;
constexpr uint8_t kNextHeaderUdp = 17;
constexpr uint8_t kRoutingTypeSegment = 4;

void put_ntp(Bytes& b, NtpTimestamp t) {
    put_u32(b, t.seconds);
    put_u32(b, t.fraction);
}

NtpTimestamp get_ntp(ByteView b, size_t off) {
    return NtpTimestamp{get_u32(b, off), get_u32(b, off + 4)};
}

void put_addr(Bytes& b, const Ipv6Addr& a) {
    b.insert(b.end(), a.octets.begin(), a.octets.end());
}

Ipv6Addr get_addr(ByteView b, size_t off) {
    Ipv6Addr a;
    std::copy_n(b.begin() + static_cast<ptrdiff_t>(off), 16, a.octets.begin());
    return a;
}

bool all_zero(ByteView b, size_t off, size_t len) {
    for (size_t i = off; i < off + len; ++i)
        if (b[i] != 0) return false;
    return true;
}

// Internal SRH decode from a larger buffer; returns consumed size.
Result<SegmentRoutingHeader> decode_srh_at(ByteView b, size_t off, size_t* consumed) {
    if (b.size() < off + kSrhFixedSize)
        return Error{Errc::too_short, "truncated SRH"};
    uint8_t hdr_ext_len = b[off + 1];
    size_t size = kSrhFixedSize + 8 * static_cast<size_t>(hdr_ext_len);
    if (b.size() < off + size) return Error{Errc::len_mismatch, "SRH overruns buffer"};
    if (b[off + 2] != kRoutingTypeSegment)
        return Error{Errc::bad_header, "routing type is not 4"};
    if (hdr_ext_len == 0 || hdr_ext_len % 2 != 0)
        return Error{Errc::len_mismatch, "hdr_ext_len not a multiple of segments"};
    size_t n = hdr_ext_len / 2;
    if (n > kMaxSrhSegments) return Error{Errc::too_many_segments, "segment list too long"};
    uint8_t segments_left = b[off + 3];
    uint8_t last_entry = b[off + 4];
    if (last_entry != n - 1) return Error{Errc::len_mismatch, "last_entry inconsistent with length"};
    if (segments_left > last_entry)
        return Error{Errc::bad_header, "segments_left exceeds last_entry"};

    SegmentRoutingHeader srh;
    srh.next_header = b[off];
    srh.segments_left = segments_left;
    srh.flags = b[off + 5];
    srh.tag = get_u16(b, off + 6);
    srh.segments.resize(n);
    // Wire order is reversed: Segment List[0] is the final segment.
    for (size_t i = 0; i < n; ++i)
        srh.segments[n - 1 - i] = get_addr(b, off + kSrhFixedSize + 16 * i);
    if (consumed) *consumed = size;
    return srh;
}

uint16_t encode_error_estimate_raw(const ErrorEstimate& ee) {
    uint16_t w = static_cast<uint16_t>(ee.multiplier);
    w |= static_cast<uint16_t>(ee.scale & 0x3F) << 8;
    if (ee.ptp_format) w |= 0x4000;
    if (ee.sync) w |= 0x8000;
    return w;
}

}  // namespace

Result<uint16_t> encode_error_estimate(const ErrorEstimate& ee) {
    if (ee.multiplier == 0)
        return Error{Errc::bad_error_estimate, "multiplier must be nonzero"};
    if (ee.scale > 0x3F) return Error{Errc::bad_error_estimate, "scale exceeds 6 bits"};
    return encode_error_estimate_raw(ee);
}

ErrorEstimate decode_error_estimate(uint16_t wire) {
    ErrorEstimate ee;
    ee.sync = (wire & 0x8000) != 0;
    ee.ptp_format = (wire & 0x4000) != 0;
    ee.scale = static_cast<uint8_t>((wire >> 8) & 0x3F);
    ee.multiplier = static_cast<uint8_t>(wire & 0xFF);
    return ee;
}

Result<Bytes> encode_sender_payload(const SenderTestPayload& p) {
    if (p.ssid == 0) return Error{Errc::ssid_zero, "ssid must be nonzero"};
    auto ee = encode_error_estimate(p.error_estimate);
    if (!ee) return ee.error();
    Bytes b;
    b.reserve(kTestPayloadSize);
    put_u32(b, p.sequence_number);
    put_ntp(b, p.timestamp);
    put_u16(b, ee.value());
    put_u16(b, p.ssid);
    b.resize(kTestPayloadSize, 0);  // 28 MBZ bytes
    return b;
}

Result<SenderDecode> decode_sender_payload(ByteView b) {
    if (b.size() < kTestPayloadSize) return Error{Errc::too_short, "sender payload under 44 bytes"};
    SenderDecode d;
    d.payload.sequence_number = get_u32(b, 0);
    d.payload.timestamp = get_ntp(b, 4);
    d.payload.error_estimate = decode_error_estimate(get_u16(b, 12));
    d.payload.ssid = get_u16(b, 14);
    if (d.payload.ssid == 0) return Error{Errc::ssid_zero, "ssid is zero"};
    d.mbz_nonzero = !all_zero(b, 16, 28);
    return d;
}

Result<Bytes> encode_reflector_payload(const ReflectorTestPayload& p) {
    if (p.ssid == 0) return Error{Errc::ssid_zero, "ssid must be nonzero"};
    auto ee = encode_error_estimate(p.error_estimate);
    if (!ee) return ee.error();
    // The echoed sender error estimate is whatever arrived, bit for bit.
    uint16_t sender_ee = encode_error_estimate_raw(p.sender_error_estimate);
    Bytes b;
    b.reserve(kTestPayloadSize);
    put_u32(b, p.sequence_number);
    put_ntp(b, p.timestamp);
    put_u16(b, ee.value());
    put_u16(b, p.ssid);
    put_ntp(b, p.receive_timestamp);
    put_u32(b, p.sender_sequence_number);
    put_ntp(b, p.sender_timestamp);
    put_u16(b, sender_ee);
    put_u16(b, 0);  // MBZ
    b.push_back(p.sender_ttl);
    b.resize(kTestPayloadSize, 0);  // 3 MBZ bytes
    return b;
}

Result<ReflectorDecode> decode_reflector_payload(ByteView b) {
    if (b.size() < kTestPayloadSize)
        return Error{Errc::too_short, "reflector payload under 44 bytes"};
    ReflectorDecode d;
    d.payload.sequence_number = get_u32(b, 0);
    d.payload.timestamp = get_ntp(b, 4);
    d.payload.error_estimate = decode_error_estimate(get_u16(b, 12));
    d.payload.ssid = get_u16(b, 14);
    if (d.payload.ssid == 0) return Error{Errc::ssid_zero, "ssid is zero"};
    d.payload.receive_timestamp = get_ntp(b, 16);
    d.payload.sender_sequence_number = get_u32(b, 24);
    d.payload.sender_timestamp = get_ntp(b, 28);
    d.payload.sender_error_estimate = decode_error_estimate(get_u16(b, 36));
    d.payload.sender_ttl = b[40];
    d.mbz_nonzero = !(all_zero(b, 38, 2) && all_zero(b, 41, 3));
    return d;
}

Result<Bytes> encode_srh(const SegmentRoutingHeader& srh) {
    if (srh.segments.empty()) return Error{Errc::empty_segment_list, "SRH needs >= 1 segment"};
    if (srh.segments.size() > kMaxSrhSegments)
        return Error{Errc::too_many_segments, "segment list too long"};
    if (srh.segments_left >= srh.segments.size())
        return Error{Errc::bad_header, "segments_left exceeds last_entry"};
    Bytes b;
    b.reserve(srh.wire_size());
    b.push_back(srh.next_header);
    b.push_back(static_cast<uint8_t>(2 * srh.segments.size()));  // hdr_ext_len
    b.push_back(kRoutingTypeSegment);
    b.push_back(srh.segments_left);
    b.push_back(srh.last_entry());
    b.push_back(srh.flags);
    put_u16(b, srh.tag);
    for (auto it = srh.segments.rbegin(); it != srh.segments.rend(); ++it) put_addr(b, *it);
    return b;
}

Result<SegmentRoutingHeader> decode_srh(ByteView b) {
    size_t consumed = 0;
    auto r = decode_srh_at(b, 0, &consumed);
    if (!r) return r;
    if (consumed != b.size()) return Error{Errc::len_mismatch, "trailing bytes after SRH"};
    return r;
}

Ipv6Addr final_destination(const TestDatagram& d) {
    if (d.srh && !d.srh->segments.empty()) return d.srh->segments.back();
    return d.dst_addr;
}

uint16_t udp_checksum(const Ipv6Addr& src, const Ipv6Addr& final_dst, ByteView udp_segment) {
    uint64_t sum = 0;
    auto add16 = [&sum](uint16_t v) { sum += v; };
    for (size_t i = 0; i < 16; i += 2) {
        add16(static_cast<uint16_t>((src.octets[i] << 8) | src.octets[i + 1]));
        add16(static_cast<uint16_t>((final_dst.octets[i] << 8) | final_dst.octets[i + 1]));
    }
    uint32_t len = static_cast<uint32_t>(udp_segment.size());
    add16(static_cast<uint16_t>(len >> 16));
    add16(static_cast<uint16_t>(len & 0xFFFF));
    add16(kNextHeaderUdp);
    for (size_t i = 0; i + 1 < udp_segment.size(); i += 2) {
        if (i == 6) continue;  // checksum field counts as zero
        add16(static_cast<uint16_t>((udp_segment[i] << 8) | udp_segment[i + 1]));
    }
    if (udp_segment.size() % 2 != 0)
        add16(static_cast<uint16_t>(udp_segment.back() << 8));
    while (sum >> 16) sum = (sum & 0xFFFF) + (sum >> 16);
    uint16_t cksum = static_cast<uint16_t>(~sum);
    return cksum == 0 ? 0xFFFF : cksum;  // zero is reserved in UDP
}

Result<Bytes> build_test_datagram(const TestDatagram& d) {
    Result<Bytes> payload = std::holds_alternative<SenderTestPayload>(d.payload)
                                ? encode_sender_payload(std::get<SenderTestPayload>(d.payload))
                                : encode_reflector_payload(std::get<ReflectorTestPayload>(d.payload));
    if (!payload) return payload.error();

    Bytes srh_bytes;
    if (d.srh) {
        if (d.srh->next_header != kNextHeaderUdp)
            return Error{Errc::bad_header, "SRH next_header must be UDP in a test datagram"};
        auto r = encode_srh(*d.srh);
        if (!r) return r.error();
        srh_bytes = std::move(r.value());
    }
    if (d.flow_label > 0xFFFFF) return Error{Errc::bad_header, "flow label exceeds 20 bits"};

    size_t udp_len = kUdpHeaderSize + payload.value().size();
    size_t ip_payload_len = srh_bytes.size() + udp_len;

    Bytes b;
    b.reserve(kIpv6HeaderSize + ip_payload_len);
    b.push_back(static_cast<uint8_t>(0x60 | (d.traffic_class >> 4)));
    b.push_back(static_cast<uint8_t>((d.traffic_class << 4) | ((d.flow_label >> 16) & 0x0F)));
    put_u16(b, static_cast<uint16_t>(d.flow_label & 0xFFFF));
    put_u16(b, static_cast<uint16_t>(ip_payload_len));
    b.push_back(d.srh ? kNextHeaderRouting : kNextHeaderUdp);
    b.push_back(d.hop_limit);
    put_addr(b, d.src_addr);
    put_addr(b, d.dst_addr);
    b.insert(b.end(), srh_bytes.begin(), srh_bytes.end());

    size_t udp_off = b.size();
    put_u16(b, d.src_port);
    put_u16(b, d.dst_port);
    put_u16(b, static_cast<uint16_t>(udp_len));
    put_u16(b, 0);  // checksum placeholder
    b.insert(b.end(), payload.value().begin(), payload.value().end());

    uint16_t cksum = udp_checksum(d.src_addr, final_destination(d),
                                  ByteView(b).subspan(udp_off));
    store_u16(b.data() + udp_off + 6, cksum);
    return b;
}

Result<ParsedDatagram> parse_test_datagram(ByteView b, std::optional<PayloadKind> kind) {
    if (b.size() < kIpv6HeaderSize) return Error{Errc::too_short, "short of an IPv6 header"};
    if ((b[0] >> 4) != 6) return Error{Errc::bad_header, "not IPv6"};

    ParsedDatagram out;
    TestDatagram& d = out.datagram;
    d.traffic_class = static_cast<uint8_t>(((b[0] & 0x0F) << 4) | (b[1] >> 4));
    d.flow_label = (static_cast<uint32_t>(b[1] & 0x0F) << 16) | (static_cast<uint32_t>(b[2]) << 8) |
                   b[3];
    uint16_t ip_payload_len = get_u16(b, 4);
    uint8_t next = b[6];
    d.hop_limit = b[7];
    d.src_addr = get_addr(b, 8);
    d.dst_addr = get_addr(b, 24);
    if (b.size() != kIpv6HeaderSize + ip_payload_len)
        return Error{Errc::len_mismatch, "IPv6 payload length disagrees with buffer"};

    size_t off = kIpv6HeaderSize;
    if (next == kNextHeaderRouting) {
        size_t consumed = 0;
        auto srh = decode_srh_at(b, off, &consumed);
        if (!srh) return srh.error();
        if (srh.value().next_header != kNextHeaderUdp)
            return Error{Errc::bad_header, "SRH next_header is not UDP"};
        d.srh = std::move(srh.value());
        off += consumed;
        next = kNextHeaderUdp;
    }
    if (next != kNextHeaderUdp) return Error{Errc::bad_header, "next header is not UDP"};

    if (b.size() < off + kUdpHeaderSize) return Error{Errc::too_short, "truncated UDP header"};
    d.src_port = get_u16(b, off);
    d.dst_port = get_u16(b, off + 2);
    uint16_t udp_len = get_u16(b, off + 4);
    uint16_t stored_cksum = get_u16(b, off + 6);
    if (udp_len != b.size() - off)
        return Error{Errc::len_mismatch, "UDP length disagrees with buffer"};
    size_t payload_len = udp_len - kUdpHeaderSize;
    if (payload_len < kTestPayloadSize) return Error{Errc::too_short, "UDP payload under 44 bytes"};
    if (payload_len > kTestPayloadSize)
        return Error{Errc::len_mismatch, "UDP payload exceeds a test packet body"};

    ByteView body = b.subspan(off + kUdpHeaderSize, kTestPayloadSize);
    PayloadKind k = kind.value_or(d.dst_port == kDefaultStampPort ? PayloadKind::sender
                                                                  : PayloadKind::reflector);
    if (k == PayloadKind::sender) {
        auto p = decode_sender_payload(body);
        if (!p) return p.error();
        d.payload = p.value().payload;
        out.mbz_nonzero = p.value().mbz_nonzero;
    } else {
        auto p = decode_reflector_payload(body);
        if (!p) return p.error();
        d.payload = p.value().payload;
        out.mbz_nonzero = p.value().mbz_nonzero;
    }

    uint16_t expect = udp_checksum(d.src_addr, final_destination(d), b.subspan(off));
    out.checksum_ok = stored_cksum == expect;
    return out;
}

Bytes build_udp6(const Ipv6Addr& src, const Ipv6Addr& dst, uint16_t src_port, uint16_t dst_port,
                 ByteView payload, uint8_t hop_limit) {
    size_t udp_len = kUdpHeaderSize + payload.size();
    Bytes b;
    b.reserve(kIpv6HeaderSize + udp_len);
    b.push_back(0x60);
    b.push_back(0);
    put_u16(b, 0);
    put_u16(b, static_cast<uint16_t>(udp_len));
    b.push_back(kNextHeaderUdp);
    b.push_back(hop_limit);
    put_addr(b, src);
    put_addr(b, dst);
    size_t udp_off = b.size();
    put_u16(b, src_port);
    put_u16(b, dst_port);
    put_u16(b, static_cast<uint16_t>(udp_len));
    put_u16(b, 0);
    b.insert(b.end(), payload.begin(), payload.end());
    store_u16(b.data() + udp_off + 6, udp_checksum(src, dst, ByteView(b).subspan(udp_off)));
    return b;
}

std::optional<Ipv6Addr> peek_final_destination(ByteView b) {
    if (b.size() < kIpv6HeaderSize || (b[0] >> 4) != 6) return std::nullopt;
    if (b[6] == kNextHeaderRouting) {
        // Segment List[0], right after the fixed SRH words, is the final hop.
        if (b.size() < kIpv6HeaderSize + kSrhFixedSize + 16 || b[42] != kRoutingTypeSegment)
            return std::nullopt;
        if (b[41] == 0) return std::nullopt;
        return get_addr(b, kIpv6HeaderSize + kSrhFixedSize);
    }
    return get_addr(b, 24);
}

namespace {

// Offset of the UDP header, or nullopt when the header chain is malformed.
std::optional<size_t> udp_offset(ByteView b) {
    if (b.size() < kIpv6HeaderSize || (b[0] >> 4) != 6) return std::nullopt;
    uint8_t next = b[6];
    size_t off = kIpv6HeaderSize;
    if (next == kNextHeaderRouting) {
        if (b.size() < off + kSrhFixedSize) return std::nullopt;
        off += kSrhFixedSize + 8 * static_cast<size_t>(b[off + 1]);
        next = b[kIpv6HeaderSize];
    }
    if (next != kNextHeaderUdp || b.size() < off + kUdpHeaderSize) return std::nullopt;
    return off;
}

}  // namespace

std::optional<uint16_t> peek_udp_dst_port(ByteView b) {
    auto off = udp_offset(b);
    if (!off) return std::nullopt;
    return get_u16(b, *off + 2);
}

std::optional<uint16_t> peek_stamp_ssid(ByteView b) {
    auto off = udp_offset(b);
    if (!off) return std::nullopt;
    size_t body = *off + kUdpHeaderSize;
    if (b.size() < body + 16) return std::nullopt;
    return get_u16(b, body + 14);
}

}  // namespace stamp
