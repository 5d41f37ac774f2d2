#ifndef STAMP_SESSION_TYPES_HPP_
#define STAMP_SESSION_TYPES_HPP_

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "stamp/errors.hpp"
#include "stamp/ipv6.hpp"
#include "stamp/ntp_time.hpp"
#include "stamp/wire.hpp"

namespace stamp {

enum class AuthMode { unauthenticated, authenticated };
enum class TimestampFormat { ntp, ptp };
enum class DelayMode { one_way, two_way };
enum class ReflectorMode { stateless, stateful };
enum class SessionStatus { created, running, stopped };

enum class DiscardReason : int { not_stamp = 0, wrong_ssid, session_not_running, decode_error };
inline constexpr size_t kDiscardReasonCount = 4;
const char* discard_name(DiscardReason r);

using DiscardCounters = std::array<uint64_t, kDiscardReasonCount>;

// The ten per-session parameters a controller provides at creation.
struct SessionConfig {
    uint16_t ssid = 0;                        // 1
    std::vector<Ipv6Addr> sid_list;           // 2: path under measurement
    int64_t interval_ns = 0;                  // 3
    Ipv6Addr src_addr;                        // 4
    AuthMode auth_mode =                      // 5
        AuthMode::unauthenticated;
    TimestampFormat timestamp_format =        // 6
        TimestampFormat::ntp;
    DelayMode delay_mode = DelayMode::two_way;  // 7
    Ipv6Addr reflector_addr;                  // 8
    uint16_t sender_port = kDefaultStampPort;    // 9
    uint16_t reflector_port = kDefaultStampPort;  // 9
    ReflectorMode reflector_mode =            // 10
        ReflectorMode::stateless;
};

Status validate_config(const SessionConfig& cfg);

// Reflector-side view of a session.
struct ReflectorSessionConfig {
    uint16_t ssid = 0;
    std::vector<Ipv6Addr> return_sid_list;
    Ipv6Addr sender_addr;
    Ipv6Addr src_addr;  // source address of reflected packets
    uint16_t sender_port = kDefaultStampPort;
    uint16_t reflector_port = kDefaultStampPort;
    ReflectorMode mode = ReflectorMode::stateless;
};

Status validate_reflector_config(const ReflectorSessionConfig& cfg);

// One (T1, T2, T3, T4) tuple per reflected packet; the unit the controller
// polls from the Session-Sender.
struct MeasurementRecord {
    uint16_t ssid = 0;
    uint32_t sender_seq = 0;
    uint32_t reflector_seq = 0;
    NtpTimestamp t1, t2, t3, t4;
    uint8_t sender_ttl = 0;
    int64_t received_at_ns = 0;

    bool operator==(const MeasurementRecord&) const = default;
};

// Node-wide parameters set once by Init.
struct NodeGlobalConfig {
    uint16_t stamp_udp_port = kDefaultStampPort;
    std::string bind_interface;
    Ipv6Addr src_ipv6;
};

}  // namespace stamp

#endif  // STAMP_SESSION_TYPES_HPP_
