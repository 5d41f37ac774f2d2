#include "stamp/ntp_time.hpp"

#include <algorithm>
#include <chrono>
#include <mutex>

namespace stamp {

namespace {

constexpr int64_t kNsPerSec = 1'000'000'000LL;

// round(x * 1e9 / 2^32) for signed x, exact in 128-bit intermediate.
int64_t units_to_ns_rounded(int64_t units) {
    __int128 num = static_cast<__int128>(units) * kNsPerSec;
    constexpr __int128 half = static_cast<__int128>(1) << 31;
    if (num >= 0) return static_cast<int64_t>((num + half) >> 32);
    return -static_cast<int64_t>(((-num) + half) >> 32);
}

}  // namespace

Result<NtpTimestamp> unix_ns_to_ntp(int64_t unix_ns) {
    constexpr int64_t era_offset_ns = kNtpUnixOffsetSec * kNsPerSec;
    if (unix_ns < -era_offset_ns)
        return Error{Errc::era_overflow, "instant precedes NTP era 0"};
    __int128 total_ns = static_cast<__int128>(unix_ns) + era_offset_ns;
    __int128 units = (total_ns << 32) / kNsPerSec;  // floor; total_ns >= 0
    if ((units >> 32) > 0xFFFFFFFF)
        return Error{Errc::era_overflow, "instant past NTP era 0"};
    NtpTimestamp t;
    t.seconds = static_cast<uint32_t>(units >> 32);
    t.fraction = static_cast<uint32_t>(units & 0xFFFFFFFFu);
    return t;
}

int64_t ntp_to_unix_ns(NtpTimestamp t) {
    __int128 num = static_cast<__int128>(ntp_units(t)) * kNsPerSec;
    constexpr __int128 half = static_cast<__int128>(1) << 31;
    int64_t total_ns = static_cast<int64_t>((num + half) >> 32);
    return total_ns - kNtpUnixOffsetSec * kNsPerSec;
}

int64_t ntp_diff_ns(NtpTimestamp a, NtpTimestamp b) {
    int64_t du = static_cast<int64_t>(ntp_units(a) - ntp_units(b));
    return units_to_ns_rounded(du);
}

Result<NtpTimestamp> now_ntp(Clock& clock) {
    return unix_ns_to_ntp(clock.now_unix_ns());
}

int64_t HostClock::now_unix_ns() {
    using namespace std::chrono;
    int64_t now = duration_cast<nanoseconds>(system_clock::now().time_since_epoch()).count() +
                  offset_ns_;
    // system_clock may step backwards; reads of one clock must not.
    int64_t prev = last_ns_.load(std::memory_order_relaxed);
    while (now > prev) {
        if (last_ns_.compare_exchange_weak(prev, now, std::memory_order_relaxed)) return now;
    }
    return prev;
}

}  // namespace stamp
