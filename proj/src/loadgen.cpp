#include "stamp/loadgen.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "stamp/control_tcp.hpp"
#include "stamp/controller.hpp"
#include "stamp/sim_network.hpp"

namespace stamp {

Result<TrialCounts> SyntheticCapacitySut::run_trial(const TrafficMix& mix, double rate_pps,
                                                    double duration_s) {
    if (rate_pps <= 0) return Error{Errc::invalid_config, "rate must be positive"};
    TrialCounts counts;
    uint64_t n = static_cast<uint64_t>(std::llround(rate_pps * duration_s));
    double service_s = 1.0 / capacity_pps_;
    double free_at = 0.0;
    size_t backlog_limit = queue_depth_;
    for (uint64_t i = 0; i < n; ++i) {
        bool is_stamp = stamp_slot(i, mix.stamp_fraction);
        double at = static_cast<double>(i) / rate_pps;
        ++counts.sent;
        is_stamp ? ++counts.sent_stamp : ++counts.sent_data;
        // Single server; backlog_limit packets may wait behind it.
        double backlog = free_at - at;
        if (backlog > service_s * static_cast<double>(backlog_limit) + 1e-15) {
            is_stamp ? ++counts.dropped_stamp : ++counts.dropped_data;
            continue;
        }
        free_at = std::max(free_at, at) + service_s;
        if (is_stamp)
            ++counts.stamp_processed;
        else
            ++counts.data_echoed;
    }
    return counts;
}

Result<TrialCounts> NodeSut::run_trial(const TrafficMix& mix, double rate_pps,
                                       double duration_s) {
    if (rate_pps <= 0) return Error{Errc::invalid_config, "rate must be positive"};
    const Ipv6Addr tg_addr = Ipv6Addr::must_parse("fc00:b::1");
    const Ipv6Addr sut_addr = Ipv6Addr::must_parse("fc00:b::2");
    const Ipv6Addr blackhole_addr = Ipv6Addr::must_parse("fc00:b::ff");
    constexpr uint16_t kSsid = 1;
    constexpr uint16_t kDataPort = 9;
    constexpr uint16_t kTgSrcPort = 40000;

    SimNetwork net(seed_);
    auto& tg = net.add_node("tg", tg_addr);
    auto& sut = net.add_node("sut", sut_addr);
    net.add_node("blackhole", blackhole_addr);
    LinkModel wire{DelaySpec::constant(10'000)};
    if (auto st = net.add_link(tg_addr, sut_addr, wire, wire); !st) return st.error();
    if (auto st = net.add_link(sut_addr, blackhole_addr, wire, wire); !st) return st.error();
    sut.set_service_model({capacity_pps_, queue_depth_});

    TrialCounts counts;
    // Generator side: reflected STAMP comes back on the STAMP port, echoed
    // data on the generator's source port.
    tg.register_filter(FilterSpec{kDefaultStampPort, tg_addr},
                       [&](ByteView) { ++counts.stamp_returned; });
    tg.set_default_sink([&](ByteView) { ++counts.data_echoed; });

    SenderNode collector(sut);
    ReflectorNode reflector(sut);
    SenderControl collector_ctl(collector);
    ReflectorControl reflector_ctl(reflector);
    LocalControlChannel ctl(role_ == SutRole::collector
                                ? static_cast<ControlTarget&>(collector_ctl)
                                : static_cast<ControlTarget&>(reflector_ctl));

    NodeGlobalConfig global{kDefaultStampPort, "sim0", sut_addr};
    if (role_ == SutRole::reflector) {
        if (auto st = reflector.init(global); !st) return st.error();
        ReflectorSessionConfig cfg;
        cfg.ssid = kSsid;
        cfg.return_sid_list = {tg_addr};
        cfg.sender_addr = tg_addr;
        cfg.src_addr = sut_addr;
        if (auto st = reflector.create_session(cfg); !st) return st.error();
        if (auto st = reflector.start_session(kSsid); !st) return st.error();
    } else {
        if (auto st = collector.init(global); !st) return st.error();
        SessionConfig cfg;
        cfg.ssid = kSsid;
        cfg.interval_ns = 365LL * 24 * 3600 * 1'000'000'000;  // no periodic traffic
        cfg.src_addr = sut_addr;
        cfg.reflector_addr = blackhole_addr;  // the single startup probe is absorbed
        if (auto st = collector.create_session(cfg); !st) return st.error();
        if (auto st = collector.start_session(kSsid); !st) return st.error();
    }
    // Data packets stand in for the forwarding path: echo them to the TG.
    Bytes echo_payload(16, 0xE0);
    sut.set_default_sink([&](ByteView) {
        (void)sut.send(build_udp6(sut_addr, tg_addr, kDataPort, kTgSrcPort, echo_payload));
    });

    uint64_t n = static_cast<uint64_t>(std::llround(rate_pps * duration_s));
    NtpTimestamp now = unix_ns_to_ntp(tg.clock().now_unix_ns()).value();
    Bytes data_payload(mix.data_payload_size, 0x5A);

    for (uint64_t i = 0; i < n; ++i) {
        int64_t at_ns = static_cast<int64_t>(std::llround(1e9 * static_cast<double>(i) / rate_pps));
        bool is_stamp = stamp_slot(i, mix.stamp_fraction);
        ++counts.sent;
        is_stamp ? ++counts.sent_stamp : ++counts.sent_data;
        tg.schedule_after(at_ns, [&, i, is_stamp]() {
            Bytes pkt;
            if (!is_stamp) {
                pkt = build_udp6(tg_addr, sut_addr, kTgSrcPort, kDataPort, data_payload);
            } else if (role_ == SutRole::reflector) {
                TestDatagram d;
                d.src_addr = tg_addr;
                d.dst_addr = sut_addr;
                d.src_port = kDefaultStampPort;
                d.dst_port = kDefaultStampPort;
                d.payload = SenderTestPayload{static_cast<uint32_t>(i), now, ErrorEstimate{}, kSsid};
                pkt = build_test_datagram(d).value();
            } else {
                TestDatagram d;
                d.src_addr = tg_addr;
                d.dst_addr = sut_addr;
                d.src_port = kDefaultStampPort;
                d.dst_port = kDefaultStampPort;
                ReflectorTestPayload p;
                p.sequence_number = static_cast<uint32_t>(i);
                p.timestamp = now;
                p.receive_timestamp = now;
                p.ssid = kSsid;
                p.sender_sequence_number = static_cast<uint32_t>(i);
                p.sender_timestamp = now;
                p.sender_ttl = 64;
                d.payload = p;
                pkt = build_test_datagram(d).value();
            }
            (void)tg.send(pkt);
        });
    }
    net.run_until_idle();

    if (role_ == SutRole::collector) {
        ControlRequest req;
        req.op = ControlOp::get_processed_count;
        req.ssid = kSsid;
        auto reply = ctl.call(req);
        if (!reply) return reply.error();
        if (!reply.value().ok) return reply.value().error;
        counts.stamp_processed = reply.value().processed;
        counts.dropped_stamp = counts.sent_stamp - counts.stamp_processed;
    } else {
        counts.dropped_stamp = counts.sent_stamp - counts.stamp_returned;
    }
    counts.dropped_data = counts.sent_data - counts.data_echoed;
    return counts;
}

Result<double> run_trial(const TrafficMix& mix, TrialSut& sut, double rate_pps) {
    auto counts = sut.run_trial(mix, rate_pps, mix.duration_s);
    if (!counts) return counts.error();
    return counts.value().drop_ratio();
}

namespace {

Result<double> median_drop(const TrafficMix& mix, TrialSut& sut, double rate, int trials) {
    std::vector<double> drops;
    for (int t = 0; t < trials; ++t) {
        auto d = run_trial(mix, sut, rate);
        if (!d) return d.error();
        drops.push_back(d.value());
    }
    std::sort(drops.begin(), drops.end());
    return drops[drops.size() / 2];
}

}  // namespace

Result<PdrResult> pdr_search(const TrafficMix& mix, TrialSut& sut, const PdrConfig& cfg) {
    PdrResult result;
    auto probe = [&](double rate) -> Result<double> {
        auto d = median_drop(mix, sut, rate, cfg.trials_per_probe);
        if (d) result.trace.emplace_back(rate, d.value());
        return d;
    };

    auto low = probe(cfg.min_rate_pps);
    if (!low) return low.error();
    if (low.value() > cfg.target_drop_ratio)
        return Error{Errc::invalid_config, "drop ratio exceeds the target at min_rate"};
    double lo = cfg.min_rate_pps;
    double lo_drop = low.value();

    auto high = probe(cfg.max_rate_pps);
    if (!high) return high.error();
    double hi = cfg.max_rate_pps;
    if (high.value() <= cfg.target_drop_ratio) {
        lo = hi;
        lo_drop = high.value();
    } else {
        while (hi - lo > cfg.rel_tolerance * hi) {
            double mid = 0.5 * (lo + hi);
            auto d = probe(mid);
            if (!d) return d.error();
            if (d.value() <= cfg.target_drop_ratio) {
                lo = mid;
                lo_drop = d.value();
            } else {
                hi = mid;
            }
        }
    }

    // The assumed monotone drop curve, checked rather than trusted.
    auto sorted = result.trace;
    std::sort(sorted.begin(), sorted.end());
    for (size_t i = 1; i < sorted.size(); ++i) {
        if (sorted[i].second < sorted[i - 1].second - 1e-3)
            return Error{Errc::non_monotone, "drop ratio decreased with rate"};
    }

    result.pdr_rate_pps = lo;
    result.drop_ratio_at_rate = lo_drop;
    return result;
}

LocalBench run_local_bench(uint64_t packets) {
    using clock = std::chrono::steady_clock;
    const Ipv6Addr a = Ipv6Addr::must_parse("fc00::1");
    const Ipv6Addr b = Ipv6Addr::must_parse("fc00::2");
    LocalBench bench;

    {
        ReflectorSessionConfig cfg;
        cfg.ssid = 1;
        cfg.sender_addr = a;
        cfg.src_addr = b;
        auto session = ReflectorSession::create(cfg);
        if (!session) return bench;
        (void)session.value()->start();

        HostClock host;
        TestDatagram d;
        d.src_addr = a;
        d.dst_addr = b;
        d.src_port = kDefaultStampPort;
        d.dst_port = kDefaultStampPort;
        d.payload = SenderTestPayload{0, unix_ns_to_ntp(host.now_unix_ns()).value(),
                                      ErrorEstimate{}, 1};
        Bytes pkt = build_test_datagram(d).value();

        auto start = clock::now();
        for (uint64_t i = 0; i < packets; ++i)
            (void)session.value()->reflect(pkt, host);
        double secs = std::chrono::duration<double>(clock::now() - start).count();
        bench.reflector_pps = static_cast<double>(packets) / secs;
    }
    {
        SessionConfig cfg;
        cfg.ssid = 1;
        cfg.interval_ns = 1'000'000;
        cfg.src_addr = a;
        cfg.reflector_addr = b;
        auto session = SenderSession::create(cfg);
        if (!session) return bench;
        (void)session.value()->start();

        HostClock host;
        NtpTimestamp now = unix_ns_to_ntp(host.now_unix_ns()).value();
        TestDatagram d;
        d.src_addr = b;
        d.dst_addr = a;
        d.src_port = kDefaultStampPort;
        d.dst_port = kDefaultStampPort;
        ReflectorTestPayload p;
        p.sequence_number = 0;
        p.timestamp = now;
        p.receive_timestamp = now;
        p.ssid = 1;
        p.sender_sequence_number = 0;
        p.sender_timestamp = now;
        p.sender_ttl = 64;
        d.payload = p;
        Bytes pkt = build_test_datagram(d).value();

        auto start = clock::now();
        for (uint64_t i = 0; i < packets; ++i) {
            (void)session.value()->on_receive(pkt, host);
            if ((i & 0xFFF) == 0xFFF) (void)session.value()->fetch_results(0);
        }
        double secs = std::chrono::duration<double>(clock::now() - start).count();
        bench.collector_pps = static_cast<double>(packets) / secs;
    }
    return bench;
}

}  // namespace stamp
