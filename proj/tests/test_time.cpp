#include <cstdlib>

#include "doctest.h"
#include "stamp/ntp_time.hpp"
#include "test_helpers.hpp"

using namespace stamp;

TEST_CASE("unix epoch maps to the RFC 5905 era offset") {
    auto t = unix_ns_to_ntp(0);
    REQUIRE(t.ok());
    CHECK(t.value().seconds == 2'208'988'800u);
    CHECK(t.value().fraction == 0u);
}

TEST_CASE("half a second maps to fraction 0x80000000") {
    auto t = unix_ns_to_ntp(500'000'000);
    REQUIRE(t.ok());
    CHECK(t.value().seconds == 2'208'988'800u);
    CHECK(t.value().fraction == 0x80000000u);
}

TEST_CASE("advancing a simulated clock by one second bumps seconds only") {
    ManualClock clock(1'000'000'000'000'000'000LL);  // some 2001 instant
    auto a = now_ntp(clock);
    clock.advance(1'000'000'000);
    auto b = now_ntp(clock);
    REQUIRE(a.ok());
    REQUIRE(b.ok());
    CHECK(b.value().seconds == a.value().seconds + 1);
    CHECK(b.value().fraction == a.value().fraction);
}

TEST_CASE("instants before the NTP era are rejected") {
    auto t = unix_ns_to_ntp(-kNtpUnixOffsetSec * 1'000'000'000LL - 1);
    REQUIRE(!t.ok());
    CHECK(t.error().code == Errc::era_overflow);
}

TEST_CASE("ntp_diff basics") {
    NtpTimestamp x{1000, 123456};
    CHECK(ntp_diff_ns(x, x) == 0);

    NtpTimestamp y{1001, 123456};
    CHECK(ntp_diff_ns(y, x) == 1'000'000'000);
    CHECK(ntp_diff_ns(x, y) == -1'000'000'000);

    // 2^31 fraction units are exactly half a second.
    NtpTimestamp z{1000, 123456 + 0x80000000u};
    CHECK(std::llabs(ntp_diff_ns(z, x) - 500'000'000) <= 1);
}

TEST_CASE("ntp_diff is antisymmetric on random inputs") {
    testing::Rng rng(7);
    for (int i = 0; i < 1000; ++i) {
        NtpTimestamp a = testing::rand_ntp(rng);
        NtpTimestamp b = testing::rand_ntp(rng);
        CHECK(ntp_diff_ns(a, b) == -ntp_diff_ns(b, a));
    }
}

TEST_CASE("instant -> NTP -> instant round trip is sub-nanosecond") {
    testing::Rng rng(11);
    for (int i = 0; i < 10'000; ++i) {
        // Anywhere from 1970 to ~2035.
        int64_t ns = static_cast<int64_t>(rng() % 2'000'000'000'000'000'000ULL);
        auto t = unix_ns_to_ntp(ns);
        REQUIRE(t.ok());
        int64_t back = ntp_to_unix_ns(t.value());
        CHECK(std::llabs(back - ns) < 1);
    }
}

// The property the delay math stands on: integer-nanosecond separations
// survive the NTP conversion exactly.
TEST_CASE("ntp_diff recovers exact nanosecond separations") {
    testing::Rng rng(13);
    for (int i = 0; i < 10'000; ++i) {
        int64_t base = static_cast<int64_t>(rng() % 2'000'000'000'000'000'000ULL);
        int64_t delta = static_cast<int64_t>(rng() % 2'000'000'000'000ULL) - 1'000'000'000'000LL;
        auto a = unix_ns_to_ntp(base + delta);
        auto b = unix_ns_to_ntp(base);
        REQUIRE(a.ok());
        REQUIRE(b.ok());
        CHECK(ntp_diff_ns(a.value(), b.value()) == delta);
    }
}
