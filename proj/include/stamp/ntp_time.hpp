#ifndef STAMP_NTP_TIME_HPP_
#define STAMP_NTP_TIME_HPP_

#include <atomic>
#include <cstdint>

#include "stamp/errors.hpp"

namespace stamp {

// Seconds between the NTP era 0 epoch (1900-01-01) and the Unix epoch.
inline constexpr int64_t kNtpUnixOffsetSec = 2'208'988'800LL;

// 64-bit NTP wire timestamp: 32-bit seconds since 1900-01-01 plus a
// 32-bit fraction in 2^-32 s units. Big-endian on the wire.
struct NtpTimestamp {
    uint32_t seconds = 0;
    uint32_t fraction = 0;

    bool operator==(const NtpTimestamp&) const = default;
};

// The timestamp as one unsigned 64-bit count of 2^-32 s units.
inline uint64_t ntp_units(NtpTimestamp t) {
    return (static_cast<uint64_t>(t.seconds) << 32) | t.fraction;
}

// Unix nanoseconds -> NTP. Fraction truncates (floor), so the mapping is
// monotone and ntp_to_unix_ns() rounds back to the exact instant.
// Fails with era_overflow for instants before 1900 or past the era-0 cap.
Result<NtpTimestamp> unix_ns_to_ntp(int64_t unix_ns);

// Inverse of unix_ns_to_ntp, rounded to the nearest nanosecond. Round-trip
// error is zero for timestamps produced by unix_ns_to_ntp.
int64_t ntp_to_unix_ns(NtpTimestamp t);

// (a - b) in signed nanoseconds, exact to the 2^-32 s fraction resolution.
// Seconds wraparound is handled as signed 64-bit distance in NTP units.
int64_t ntp_diff_ns(NtpTimestamp a, NtpTimestamp b);

// Clock abstraction behind every timestamp the engines take. Successive
// reads of one clock never go backwards.
class Clock {
public:
    virtual ~Clock() = default;
    virtual int64_t now_unix_ns() = 0;
};

Result<NtpTimestamp> now_ntp(Clock& clock);

// Wall clock of the host, plus a fixed offset modelling skew.
class HostClock : public Clock {
public:
    explicit HostClock(int64_t offset_ns = 0) : offset_ns_(offset_ns) {}
    int64_t now_unix_ns() override;

private:
    int64_t offset_ns_;
    std::atomic<int64_t> last_ns_{0};
};

// Test clock advanced explicitly by its owner.
class ManualClock : public Clock {
public:
    explicit ManualClock(int64_t start_unix_ns = 0, int64_t offset_ns = 0)
        : now_ns_(start_unix_ns), offset_ns_(offset_ns) {}

    int64_t now_unix_ns() override { return now_ns_ + offset_ns_; }
    void advance(int64_t delta_ns) { now_ns_ += delta_ns; }
    void set(int64_t unix_ns) { now_ns_ = unix_ns; }

private:
    int64_t now_ns_;
    int64_t offset_ns_;
};

}  // namespace stamp

#endif  // STAMP_NTP_TIME_HPP_
