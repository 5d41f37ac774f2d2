#include "stamp/reflector.hpp"

namespace stamp {

// ---------------------------------------------------------------------------
// ReflectorSession

ReflectorSession::ReflectorSession(const ReflectorSessionConfig& cfg) : cfg_(cfg) {}

Result<std::unique_ptr<ReflectorSession>> ReflectorSession::create(
    const ReflectorSessionConfig& cfg) {
    if (auto st = validate_reflector_config(cfg); !st) return st.error();
    std::unique_ptr<ReflectorSession> s(new ReflectorSession(cfg));
    if (auto st = s->build_template(); !st) return st.error();
    return s;
}

Status ReflectorSession::build_template() {
    TestDatagram d;
    d.src_addr = cfg_.src_addr;
    d.src_port = cfg_.reflector_port;
    d.dst_port = cfg_.sender_port;

    if (!cfg_.return_sid_list.empty()) {
        SegmentRoutingHeader srh;
        srh.segments = cfg_.return_sid_list;
        if (!(srh.segments.back() == cfg_.sender_addr))
            srh.segments.push_back(cfg_.sender_addr);
        srh.segments_left = static_cast<uint8_t>(srh.segments.size() - 1);
        d.dst_addr = srh.segments.front();
        d.srh = std::move(srh);
    } else {
        d.dst_addr = cfg_.sender_addr;
    }

    ReflectorTestPayload body;
    body.ssid = cfg_.ssid;
    body.error_estimate = ErrorEstimate{};
    body.sender_error_estimate = ErrorEstimate{};
    d.payload = body;

    auto bytes = build_test_datagram(d);
    if (!bytes) return bytes.error();
    template_ = std::move(bytes.value());
    udp_offset_ = template_.size() - kUdpHeaderSize - kTestPayloadSize;
    body_offset_ = udp_offset_ + kUdpHeaderSize;
    checksum_dst_ = final_destination(d);
    return Status{};
}

SessionStatus ReflectorSession::status() const {
    std::lock_guard lock(mu_);
    return status_;
}

uint32_t ReflectorSession::tx_counter() const {
    std::lock_guard lock(mu_);
    return tx_counter_;
}

Status ReflectorSession::start() {
    std::lock_guard lock(mu_);
    if (status_ != SessionStatus::created)
        return Error{Errc::illegal_transition, "start requires a freshly created session"};
    status_ = SessionStatus::running;
    return Status{};
}

Status ReflectorSession::stop() {
    std::lock_guard lock(mu_);
    if (status_ != SessionStatus::running)
        return Error{Errc::illegal_transition, "stop requires a running session"};
    status_ = SessionStatus::stopped;
    return Status{};
}

std::variant<Bytes, DiscardReason> ReflectorSession::reflect(ByteView datagram, Clock& clock) {
    auto t2 = now_ntp(clock);  // receive instant, before any validation

    auto discard = [this](DiscardReason r) {
        std::lock_guard lock(mu_);
        ++counters_.discards[static_cast<int>(r)];
        return r;
    };

    auto port = peek_udp_dst_port(datagram);
    if (!port || *port != cfg_.reflector_port) return discard(DiscardReason::not_stamp);

    auto parsed = parse_test_datagram(datagram, PayloadKind::sender);
    if (!parsed) return discard(DiscardReason::decode_error);
    if (!parsed.value().checksum_ok) {
        std::lock_guard lock(mu_);
        ++counters_.checksum_failures;
        ++counters_.discards[static_cast<int>(DiscardReason::decode_error)];
        return DiscardReason::decode_error;
    }
    const auto& sender = std::get<SenderTestPayload>(parsed.value().datagram.payload);
    if (sender.ssid != cfg_.ssid) return discard(DiscardReason::wrong_ssid);

    std::lock_guard lock(mu_);
    if (status_ != SessionStatus::running) {
        ++counters_.discards[static_cast<int>(DiscardReason::session_not_running)];
        return DiscardReason::session_not_running;
    }

    ReflectorTestPayload body;
    body.sequence_number =
        cfg_.mode == ReflectorMode::stateless ? sender.sequence_number : tx_counter_;
    body.error_estimate = ErrorEstimate{};
    body.receive_timestamp = t2 ? t2.value() : NtpTimestamp{};
    body.ssid = cfg_.ssid;
    body.sender_sequence_number = sender.sequence_number;
    body.sender_timestamp = sender.timestamp;
    body.sender_error_estimate = sender.error_estimate;
    body.sender_ttl = parsed.value().datagram.hop_limit;

    auto t3 = now_ntp(clock);  // transmit instant, last thing before hand-off
    body.timestamp = t3 ? t3.value() : NtpTimestamp{};
    if (!t2 || !t3) {
        ++counters_.discards[static_cast<int>(DiscardReason::decode_error)];
        return DiscardReason::decode_error;
    }

    auto encoded = encode_reflector_payload(body);
    if (!encoded) {
        ++counters_.discards[static_cast<int>(DiscardReason::decode_error)];
        return DiscardReason::decode_error;
    }
    std::copy(encoded.value().begin(), encoded.value().end(), template_.begin() + body_offset_);
    uint16_t cksum = udp_checksum(cfg_.src_addr, checksum_dst_,
                                  ByteView(template_).subspan(udp_offset_));
    store_u16(template_.data() + udp_offset_ + 6, cksum);

    if (cfg_.mode == ReflectorMode::stateful) ++tx_counter_;
    ++counters_.reflected;
    return template_;
}

ReflectorSession::Counters ReflectorSession::counters() const {
    std::lock_guard lock(mu_);
    return counters_;
}

// ---------------------------------------------------------------------------
// ReflectorNode

ReflectorNode::ReflectorNode(Transport& transport) : transport_(transport) {}

ReflectorNode::~ReflectorNode() { reset(); }

Status ReflectorNode::init(const NodeGlobalConfig& cfg) {
    std::lock_guard lock(mu_);
    if (initialized_)
        return Error{Errc::already_initialized, "Init already done; Reset first"};
    global_ = cfg;
    FilterSpec filter;
    filter.local_port = cfg.stamp_udp_port;
    if (!cfg.src_ipv6.is_unspecified()) filter.local_addr = cfg.src_ipv6;
    if (auto st = transport_.register_filter(filter, [this](ByteView b) { on_datagram(b); }); !st)
        return st;
    initialized_ = true;
    return Status{};
}

Status ReflectorNode::reset() {
    std::lock_guard lock(mu_);
    for (auto& [ssid, slot] : sessions_)
        if (slot.stop_timer) transport_.scheduler().cancel(*slot.stop_timer);
    sessions_.clear();
    transport_.unregister_filters();
    initialized_ = false;
    return Status{};
}

bool ReflectorNode::initialized() const {
    std::lock_guard lock(mu_);
    return initialized_;
}

Status ReflectorNode::create_session(const ReflectorSessionConfig& cfg) {
    std::lock_guard lock(mu_);
    if (!initialized_) return Error{Errc::not_initialized, "Init required first"};
    if (sessions_.count(cfg.ssid))
        return Error{Errc::duplicate_ssid, "ssid already in use"};
    if (cfg.reflector_port != global_.stamp_udp_port)
        return Error{Errc::invalid_config, "reflector_port: must match the node STAMP port"};
    auto s = ReflectorSession::create(cfg);
    if (!s) return s.error();
    sessions_[cfg.ssid] = Slot{std::shared_ptr<ReflectorSession>(std::move(s.value())), {}};
    return Status{};
}

Status ReflectorNode::start_session(uint16_t ssid, std::optional<int64_t> duration_ns) {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(ssid);
    if (it == sessions_.end()) return Error{Errc::unknown_ssid, "no such session"};
    if (auto st = it->second.session->start(); !st) return st;
    if (duration_ns && *duration_ns > 0) {
        it->second.stop_timer = transport_.scheduler().schedule_after(
            *duration_ns, [this, ssid] { (void)stop_session(ssid); });
    }
    return Status{};
}

Status ReflectorNode::stop_session(uint16_t ssid) {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(ssid);
    if (it == sessions_.end()) return Error{Errc::unknown_ssid, "no such session"};
    if (auto st = it->second.session->stop(); !st) return st;
    if (it->second.stop_timer) {
        transport_.scheduler().cancel(*it->second.stop_timer);
        it->second.stop_timer.reset();
    }
    return Status{};
}

Status ReflectorNode::destroy_session(uint16_t ssid) {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(ssid);
    if (it == sessions_.end()) return Error{Errc::unknown_ssid, "no such session"};
    if (it->second.session->status() == SessionStatus::running) (void)it->second.session->stop();
    if (it->second.stop_timer) transport_.scheduler().cancel(*it->second.stop_timer);
    sessions_.erase(it);
    return Status{};
}

Result<uint64_t> ReflectorNode::processed_count(std::optional<uint16_t> ssid) const {
    std::lock_guard lock(mu_);
    if (ssid) {
        auto it = sessions_.find(*ssid);
        if (it == sessions_.end()) return Error{Errc::unknown_ssid, "no such session"};
        return it->second.session->counters().reflected;
    }
    uint64_t total = 0;
    for (auto& [id, slot] : sessions_) total += slot.session->counters().reflected;
    return total;
}

std::shared_ptr<ReflectorSession> ReflectorNode::session(uint16_t ssid) const {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(ssid);
    return it == sessions_.end() ? nullptr : it->second.session;
}

std::vector<uint16_t> ReflectorNode::session_ids() const {
    std::lock_guard lock(mu_);
    std::vector<uint16_t> out;
    for (auto& [id, slot] : sessions_) out.push_back(id);
    return out;
}

DiscardCounters ReflectorNode::node_discards() const {
    std::lock_guard lock(mu_);
    return node_discards_;
}

void ReflectorNode::on_datagram(ByteView datagram) {
    auto ssid = peek_stamp_ssid(datagram);
    std::shared_ptr<ReflectorSession> s;
    if (ssid) s = session(*ssid);
    if (!s) {
        std::lock_guard lock(mu_);
        ++node_discards_[static_cast<int>(ssid ? DiscardReason::wrong_ssid
                                               : DiscardReason::decode_error)];
        return;
    }
    auto r = s->reflect(datagram, transport_.clock());
    if (std::holds_alternative<Bytes>(r)) {
        (void)transport_.send(std::get<Bytes>(r));
    } else {
        std::lock_guard lock(mu_);
        ++node_discards_[static_cast<int>(std::get<DiscardReason>(r))];
    }
}

}  // namespace stamp
