#include "doctest.h"
#include "stamp/control_tcp.hpp"
#include "stamp/controller.hpp"
#include "stamp/sim_network.hpp"
#include "test_helpers.hpp"

using namespace stamp;

namespace {

const Ipv6Addr kSender = Ipv6Addr::must_parse("fc00::1");
const Ipv6Addr kReflector = Ipv6Addr::must_parse("fc00::2");

struct ControlRig {
    SimNetwork net{0};
    SenderNode sender_node;
    ReflectorNode reflector_node;
    SenderControl sender_ctl{sender_node};
    ReflectorControl reflector_ctl{reflector_node};
    LocalControlChannel sender_chan{sender_ctl};
    LocalControlChannel reflector_chan{reflector_ctl};
    Controller controller;

    ControlRig(LinkModel direct = LinkModel{DelaySpec::constant(5'000'000)},
               LinkModel ret = LinkModel{DelaySpec::constant(7'000'000)})
        : sender_node(net.add_node("sender", kSender)),
          reflector_node(net.add_node("reflector", kReflector)),
          controller(sender_chan, reflector_chan,
                     NodeGlobalConfig{kDefaultStampPort, "sim0", kSender},
                     NodeGlobalConfig{kDefaultStampPort, "sim0", kReflector}) {
        REQUIRE(net.add_link(kSender, kReflector, direct, ret).ok());
    }
};

SessionSpec valid_spec(uint16_t ssid = 7) {
    SessionSpec s;
    s.ssid = ssid;
    s.sid_list = {kReflector};
    s.return_sid_list = {kSender};
    s.interval_ns = 10'000'000;
    s.source_ipv6 = kSender;
    s.reflector_ipv6 = kReflector;
    return s;
}

}  // namespace

TEST_CASE("control request encode/decode is the identity") {
    testing::Rng rng(201);
    for (int i = 0; i < 200; ++i) {
        ControlRequest req;
        req.id = rng();
        req.op = static_cast<ControlOp>(rng() % 8);
        req.global.stamp_udp_port = testing::rand_u16(rng);
        req.global.bind_interface = "eth0";
        req.global.src_ipv6 = testing::rand_addr(rng);
        req.session = valid_spec(testing::rand_ssid(rng));
        req.session.sid_list = {testing::rand_addr(rng), testing::rand_addr(rng)};
        req.ssid = testing::rand_ssid(rng);
        if (rng() & 1) req.duration_ns = static_cast<int64_t>(rng() % 1'000'000'000);
        req.max_results = rng() % 2000;
        req.count_all_sessions = req.ssid == 0;

        auto decoded = decode_request(encode_request(req));
        REQUIRE(decoded.ok());
        const ControlRequest& d = decoded.value();
        CHECK(d.id == req.id);
        CHECK(d.op == req.op);
        switch (req.op) {
            case ControlOp::init:
                CHECK(d.global.stamp_udp_port == req.global.stamp_udp_port);
                CHECK(d.global.src_ipv6 == req.global.src_ipv6);
                break;
            case ControlOp::create_session:
                CHECK(d.session.ssid == req.session.ssid);
                CHECK(d.session.sid_list == req.session.sid_list);
                CHECK(d.session.reflector_mode == req.session.reflector_mode);
                break;
            case ControlOp::start_session:
                CHECK(d.ssid == req.ssid);
                CHECK(d.duration_ns == req.duration_ns);
                break;
            case ControlOp::get_results:
                CHECK(d.ssid == req.ssid);
                CHECK(d.max_results == req.max_results);
                break;
            default:
                break;
        }
    }
}

TEST_CASE("frame reader reassembles split frames") {
    Bytes payload(1000);
    for (size_t i = 0; i < payload.size(); ++i) payload[i] = static_cast<uint8_t>(i);
    Bytes wire;
    append_frame(wire, payload);
    append_frame(wire, payload);

    FrameReader reader;
    size_t got = 0;
    for (size_t off = 0; off < wire.size(); off += 7) {
        size_t n = std::min<size_t>(7, wire.size() - off);
        reader.feed(ByteView(wire).subspan(off, n));
        for (;;) {
            auto frame = reader.next();
            REQUIRE(frame.ok());
            if (!frame.value()) break;
            CHECK(*frame.value() == payload);
            ++got;
        }
    }
    CHECK(got == 2);
}

TEST_CASE("session ops before Init return not_initialized") {
    ControlRig rig;
    ControlRequest req;
    req.op = ControlOp::create_session;
    req.session = valid_spec();
    auto reply = rig.sender_chan.call(req);
    REQUIRE(reply.ok());
    CHECK(!reply.value().ok);
    CHECK(reply.value().error.code == Errc::not_initialized);
}

TEST_CASE("GetStampSessionResults on a reflector is unsupported") {
    ControlRig rig;
    ControlRequest req;
    req.op = ControlOp::get_results;
    req.ssid = 7;
    auto reply = rig.reflector_chan.call(req);
    REQUIRE(reply.ok());
    CHECK(!reply.value().ok);
    CHECK(reply.value().error.code == Errc::unsupported);
}

TEST_CASE("the full configuration sequence ends with both sessions running") {
    ControlRig rig;
    auto ssid = rig.controller.create_measured_path({kReflector}, {kSender}, PathParams{});
    REQUIRE(ssid.ok());
    CHECK(ssid.value() != 0);
    REQUIRE(rig.controller.start_session(ssid.value()).ok());
    CHECK(rig.sender_node.session(ssid.value())->status() == SessionStatus::running);
    CHECK(rig.reflector_node.session(ssid.value())->status() == SessionStatus::running);
}

TEST_CASE("illegal op orders yield typed errors for every operation") {
    ControlRig rig;
    // Start/Stop/Destroy/Results on a fresh, uninitialized node.
    for (ControlOp op : {ControlOp::start_session, ControlOp::stop_session,
                         ControlOp::destroy_session}) {
        ControlRequest req;
        req.op = op;
        req.ssid = 9;
        auto reply = rig.sender_chan.call(req);
        REQUIRE(reply.ok());
        CHECK(!reply.value().ok);
        CHECK(reply.value().error.code == Errc::unknown_ssid);
    }

    ControlRequest init;
    init.op = ControlOp::init;
    init.global = {kDefaultStampPort, "sim0", kSender};
    REQUIRE(rig.sender_chan.call(init).value().ok);
    // Init twice without Reset.
    auto again = rig.sender_chan.call(init);
    CHECK(!again.value().ok);
    CHECK(again.value().error.code == Errc::already_initialized);

    // Create, then start twice.
    ControlRequest create;
    create.op = ControlOp::create_session;
    create.session = valid_spec(9);
    REQUIRE(rig.sender_chan.call(create).value().ok);
    ControlRequest start;
    start.op = ControlOp::start_session;
    start.ssid = 9;
    REQUIRE(rig.sender_chan.call(start).value().ok);
    auto restart = rig.sender_chan.call(start);
    CHECK(!restart.value().ok);
    CHECK(restart.value().error.code == Errc::illegal_transition);

    // Stop twice.
    ControlRequest stop;
    stop.op = ControlOp::stop_session;
    stop.ssid = 9;
    REQUIRE(rig.sender_chan.call(stop).value().ok);
    auto restop = rig.sender_chan.call(stop);
    CHECK(!restop.value().ok);
    CHECK(restop.value().error.code == Errc::illegal_transition);

    // Destroy unknown ssid: a typed error, not a crash.
    ControlRequest destroy;
    destroy.op = ControlOp::destroy_session;
    destroy.ssid = 50;
    auto gone = rig.sender_chan.call(destroy);
    CHECK(!gone.value().ok);
    CHECK(gone.value().error.code == Errc::unknown_ssid);

    // Reset is idempotent.
    ControlRequest reset;
    reset.op = ControlOp::reset;
    CHECK(rig.sender_chan.call(reset).value().ok);
    CHECK(rig.sender_chan.call(reset).value().ok);
}

TEST_CASE("bad session parameters are rejected with typed errors") {
    ControlRig rig;
    ControlRequest init;
    init.op = ControlOp::init;
    init.global = {kDefaultStampPort, "sim0", kSender};
    REQUIRE(rig.sender_chan.call(init).value().ok);

    ControlRequest create;
    create.op = ControlOp::create_session;
    create.session = valid_spec(3);
    create.session.auth_mode = AuthMode::authenticated;
    auto reply = rig.sender_chan.call(create);
    CHECK(!reply.value().ok);
    CHECK(reply.value().error.code == Errc::invalid_config);

    create.session = valid_spec(3);
    create.session.timestamp_format = TimestampFormat::ptp;
    reply = rig.sender_chan.call(create);
    CHECK(!reply.value().ok);
    CHECK(reply.value().error.code == Errc::invalid_config);
}

TEST_CASE("failed sender creation rolls the reflector session back") {
    ControlRig rig;
    // Occupy ssid 7 on the sender only.
    ControlRequest init;
    init.op = ControlOp::init;
    init.global = {kDefaultStampPort, "sim0", kSender};
    REQUIRE(rig.sender_chan.call(init).value().ok);
    ControlRequest create;
    create.op = ControlOp::create_session;
    create.session = valid_spec(7);
    REQUIRE(rig.sender_chan.call(create).value().ok);

    PathParams params;
    params.ssid = 7;
    auto result = rig.controller.create_measured_path({kReflector}, {kSender}, params);
    REQUIRE(!result.ok());
    CHECK(result.error().code == Errc::duplicate_ssid);
    CHECK(rig.reflector_node.session(7) == nullptr);  // rolled back

    params.ssid = 0;
    CHECK(!rig.controller.create_measured_path({kReflector}, {kSender}, params).ok());
}

TEST_CASE("poll_once drains across capped replies with conservation") {
    ControlRig rig;
    auto ssid = rig.controller.create_measured_path({kReflector}, {kSender}, PathParams{});
    REQUIRE(ssid.ok());
    REQUIRE(rig.controller.start_session(ssid.value()).ok());

    auto session = rig.sender_node.session(ssid.value());
    ManualClock clock(kDefaultSimEpochNs);
    NtpTimestamp z = unix_ns_to_ntp(kDefaultSimEpochNs).value();
    const uint32_t n = 2500;  // spans three capped replies
    for (uint32_t i = 0; i < n; ++i)
        session->on_receive(
            testing::make_reflector_packet(kReflector, kSender, ssid.value(), i, z, z, z), clock);

    auto polled = rig.controller.poll_once(ssid.value());
    REQUIRE(polled.ok());
    CHECK(polled.value().size() == n);
    for (uint32_t i = 0; i < n; ++i) CHECK(polled.value()[i].sender_seq == i);
    CHECK(session->queued() == 0);
    CHECK(rig.controller.poll_once(ssid.value()).value().empty());
}

TEST_CASE("processed-count query reaches both roles") {
    ControlRig rig;
    auto ssid = rig.controller.create_measured_path({kReflector}, {kSender}, PathParams{});
    REQUIRE(ssid.ok());
    REQUIRE(rig.controller.start_session(ssid.value(), 5 * 10'000'000LL).ok());
    rig.net.run_until_idle();

    CHECK(rig.controller.processed_count(true, ssid.value()).value() == 5);
    CHECK(rig.controller.processed_count(false, ssid.value()).value() == 5);
    CHECK(rig.controller.processed_count(true, std::nullopt).value() == 5);
}

TEST_CASE("control plane over TCP loopback") {
    ControlRig rig;
    TcpControlServer sender_srv(rig.sender_ctl);
    TcpControlServer reflector_srv(rig.reflector_ctl);
    REQUIRE(sender_srv.listen("::1", 0).ok());
    REQUIRE(reflector_srv.listen("::1", 0).ok());

    auto sender_chan = TcpControlChannel::connect("::1", sender_srv.port());
    auto reflector_chan = TcpControlChannel::connect("::1", reflector_srv.port());
    REQUIRE(sender_chan.ok());
    REQUIRE(reflector_chan.ok());

    Controller controller(*sender_chan.value(), *reflector_chan.value(),
                          NodeGlobalConfig{kDefaultStampPort, "sim0", kSender},
                          NodeGlobalConfig{kDefaultStampPort, "sim0", kReflector});
    auto ssid = controller.create_measured_path({kReflector}, {kSender}, PathParams{});
    REQUIRE(ssid.ok());
    REQUIRE(controller.start_session(ssid.value(), 10 * 10'000'000LL).ok());
    rig.net.run_until_idle();

    auto polled = controller.poll_once(ssid.value());
    REQUIRE(polled.ok());
    CHECK(polled.value().size() == 10);
    CHECK(controller.processed_count(true, ssid.value()).value() == 10);

    // Unknown ssid over the wire: typed error.
    auto bad = controller.poll_once(4444);
    REQUIRE(!bad.ok());
    CHECK(bad.error().code == Errc::unknown_ssid);

    sender_srv.stop();
    reflector_srv.stop();
}

TEST_CASE("polling concurrently with reception never loses records") {
    ControlRig rig;
    auto ssid = rig.controller.create_measured_path({kReflector}, {kSender}, PathParams{});
    REQUIRE(ssid.ok());
    REQUIRE(rig.controller.start_session(ssid.value()).ok());
    auto session = rig.sender_node.session(ssid.value());

    const uint32_t n = 10'000;
    std::vector<MeasurementRecord> polled;
    std::thread poller([&] {
        while (polled.size() < n) {
            auto batch = rig.controller.poll_once(ssid.value());
            REQUIRE(batch.ok());
            polled.insert(polled.end(), batch.value().begin(), batch.value().end());
        }
    });
    ManualClock clock(kDefaultSimEpochNs);
    NtpTimestamp z = unix_ns_to_ntp(kDefaultSimEpochNs).value();
    for (uint32_t i = 0; i < n; ++i)
        session->on_receive(
            testing::make_reflector_packet(kReflector, kSender, ssid.value(), i, z, z, z), clock);
    poller.join();

    CHECK(polled.size() == n);
    for (uint32_t i = 0; i < n; ++i) CHECK(polled[i].sender_seq == i);
    auto c = session->counters();
    CHECK(c.enqueued == n);
    CHECK(c.fetched == n);
}
