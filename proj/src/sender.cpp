#include "stamp/sender.hpp"

#include <algorithm>

namespace stamp {

const char* discard_name(DiscardReason r) {
    switch (r) {
        case DiscardReason::not_stamp: return "not_stamp";
        case DiscardReason::wrong_ssid: return "wrong_ssid";
        case DiscardReason::session_not_running: return "session_not_running";
        case DiscardReason::decode_error: return "decode_error";
    }
    return "unknown";
}

Status validate_config(const SessionConfig& cfg) {
    if (cfg.ssid == 0) return Error{Errc::invalid_config, "ssid: must be nonzero"};
    if (cfg.interval_ns <= 0) return Error{Errc::invalid_config, "interval: must be positive"};
    if (cfg.src_addr.is_unspecified())
        return Error{Errc::invalid_config, "src_addr: must be set"};
    if (cfg.reflector_addr.is_unspecified())
        return Error{Errc::invalid_config, "reflector_addr: must be set"};
    if (cfg.auth_mode != AuthMode::unauthenticated)
        return Error{Errc::invalid_config, "auth_mode: only unauthenticated is supported"};
    if (cfg.timestamp_format != TimestampFormat::ntp)
        return Error{Errc::invalid_config, "timestamp_format: only ntp is supported"};
    if (cfg.sender_port == 0 || cfg.reflector_port == 0)
        return Error{Errc::invalid_config, "ports: must be nonzero"};
    if (cfg.sid_list.size() > kMaxSrhSegments)
        return Error{Errc::invalid_config, "sid_list: too many segments"};
    return Status{};
}

Status validate_reflector_config(const ReflectorSessionConfig& cfg) {
    if (cfg.ssid == 0) return Error{Errc::invalid_config, "ssid: must be nonzero"};
    if (cfg.sender_addr.is_unspecified())
        return Error{Errc::invalid_config, "sender_addr: must be set"};
    if (cfg.src_addr.is_unspecified())
        return Error{Errc::invalid_config, "src_addr: must be set"};
    if (cfg.sender_port == 0 || cfg.reflector_port == 0)
        return Error{Errc::invalid_config, "ports: must be nonzero"};
    if (cfg.return_sid_list.size() > kMaxSrhSegments)
        return Error{Errc::invalid_config, "return_sid_list: too many segments"};
    return Status{};
}

// ---------------------------------------------------------------------------
// SenderSession

SenderSession::SenderSession(const SessionConfig& cfg, size_t queue_capacity)
    : cfg_(cfg), queue_capacity_(queue_capacity) {}

Result<std::unique_ptr<SenderSession>> SenderSession::create(const SessionConfig& cfg,
                                                             size_t queue_capacity) {
    if (auto st = validate_config(cfg); !st) return st.error();
    std::unique_ptr<SenderSession> s(new SenderSession(cfg, queue_capacity));
    if (auto st = s->build_template(); !st) return st.error();
    return s;
}

Status SenderSession::build_template() {
    TestDatagram d;
    d.src_addr = cfg_.src_addr;
    d.src_port = cfg_.sender_port;
    d.dst_port = cfg_.reflector_port;

    if (!cfg_.sid_list.empty()) {
        SegmentRoutingHeader srh;
        srh.segments = cfg_.sid_list;
        if (!(srh.segments.back() == cfg_.reflector_addr))
            srh.segments.push_back(cfg_.reflector_addr);
        srh.segments_left = static_cast<uint8_t>(srh.segments.size() - 1);
        // Emitted as an SR source node would: destination is the first hop.
        d.dst_addr = srh.segments.front();
        d.srh = std::move(srh);
    } else {
        d.dst_addr = cfg_.reflector_addr;
    }

    SenderTestPayload p;
    p.sequence_number = 0;
    p.timestamp = {0, 0};
    p.error_estimate = ErrorEstimate{};
    p.ssid = cfg_.ssid;
    d.payload = p;

    auto bytes = build_test_datagram(d);
    if (!bytes) return bytes.error();
    template_ = std::move(bytes.value());

    udp_offset_ = template_.size() - kUdpHeaderSize - kTestPayloadSize;
    seq_offset_ = udp_offset_ + kUdpHeaderSize;
    t1_offset_ = seq_offset_ + 4;
    checksum_dst_ = final_destination(d);
    return Status{};
}

SessionStatus SenderSession::status() const {
    std::lock_guard lock(mu_);
    return status_;
}

uint32_t SenderSession::next_seq() const {
    std::lock_guard lock(mu_);
    return next_seq_;
}

Bytes SenderSession::template_bytes() const {
    std::lock_guard lock(mu_);
    return template_;
}

Status SenderSession::start() {
    std::lock_guard lock(mu_);
    if (status_ != SessionStatus::created)
        return Error{Errc::illegal_transition, "start requires a freshly created session"};
    status_ = SessionStatus::running;
    return Status{};
}

Status SenderSession::stop() {
    std::lock_guard lock(mu_);
    if (status_ != SessionStatus::running)
        return Error{Errc::illegal_transition, "stop requires a running session"};
    status_ = SessionStatus::stopped;
    return Status{};
}

Result<Bytes> SenderSession::next_packet(Clock& clock) {
    auto t1 = now_ntp(clock);
    std::lock_guard lock(mu_);
    if (status_ != SessionStatus::running)
        return Error{Errc::not_running, "session is not running"};
    if (!t1) return t1.error();

    store_u32(template_.data() + seq_offset_, next_seq_);
    store_u32(template_.data() + t1_offset_, t1.value().seconds);
    store_u32(template_.data() + t1_offset_ + 4, t1.value().fraction);
    uint16_t cksum = udp_checksum(cfg_.src_addr, checksum_dst_,
                                  ByteView(template_).subspan(udp_offset_));
    store_u16(template_.data() + udp_offset_ + 6, cksum);
    ++next_seq_;
    return template_;
}

std::variant<MeasurementRecord, DiscardReason> SenderSession::on_receive(ByteView datagram,
                                                                         Clock& clock) {
    auto t4 = now_ntp(clock);
    int64_t received_at = clock.now_unix_ns();

    auto discard = [this](DiscardReason r) {
        std::lock_guard lock(mu_);
        ++counters_.discards[static_cast<int>(r)];
        return r;
    };

    auto port = peek_udp_dst_port(datagram);
    if (!port || *port != cfg_.sender_port) return discard(DiscardReason::not_stamp);

    auto parsed = parse_test_datagram(datagram, PayloadKind::reflector);
    if (!parsed) return discard(DiscardReason::decode_error);
    if (!parsed.value().checksum_ok) {
        std::lock_guard lock(mu_);
        ++counters_.checksum_failures;
        ++counters_.discards[static_cast<int>(DiscardReason::decode_error)];
        return DiscardReason::decode_error;
    }
    const auto& body = std::get<ReflectorTestPayload>(parsed.value().datagram.payload);
    if (body.ssid != cfg_.ssid) return discard(DiscardReason::wrong_ssid);

    std::lock_guard lock(mu_);
    if (status_ != SessionStatus::running) {
        ++counters_.discards[static_cast<int>(DiscardReason::session_not_running)];
        return DiscardReason::session_not_running;
    }
    if (!t4) {  // clock outside the NTP era
        ++counters_.discards[static_cast<int>(DiscardReason::decode_error)];
        return DiscardReason::decode_error;
    }

    MeasurementRecord rec;
    rec.ssid = body.ssid;
    rec.sender_seq = body.sender_sequence_number;
    rec.reflector_seq = body.sequence_number;
    rec.t1 = body.sender_timestamp;
    rec.t2 = body.receive_timestamp;
    rec.t3 = body.timestamp;
    rec.t4 = t4.value();
    rec.sender_ttl = body.sender_ttl;
    rec.received_at_ns = received_at;

    if (!seen_seqs_.insert(rec.sender_seq).second) ++counters_.seq_repeats;
    if (seen_seqs_.size() > 1'000'000) seen_seqs_.clear();  // cap the repeat tracker

    if (results_.size() >= queue_capacity_) {
        results_.pop_front();
        ++counters_.overflow_dropped;
    }
    results_.push_back(rec);
    ++counters_.enqueued;
    return rec;
}

std::vector<MeasurementRecord> SenderSession::fetch_results(size_t max) {
    std::lock_guard lock(mu_);
    size_t n = (max == 0) ? results_.size() : std::min(max, results_.size());
    std::vector<MeasurementRecord> out(results_.begin(), results_.begin() + n);
    results_.erase(results_.begin(), results_.begin() + n);
    counters_.fetched += n;
    return out;
}

SenderSession::Counters SenderSession::counters() const {
    std::lock_guard lock(mu_);
    return counters_;
}

size_t SenderSession::queued() const {
    std::lock_guard lock(mu_);
    return results_.size();
}

// ---------------------------------------------------------------------------
// SenderNode

SenderNode::SenderNode(Transport& transport) : transport_(transport) {}

SenderNode::~SenderNode() { reset(); }

Status SenderNode::init(const NodeGlobalConfig& cfg) {
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

Status SenderNode::reset() {
    std::lock_guard lock(mu_);
    for (auto& [ssid, slot] : sessions_) disarm(slot);
    sessions_.clear();
    transport_.unregister_filters();
    initialized_ = false;
    return Status{};
}

bool SenderNode::initialized() const {
    std::lock_guard lock(mu_);
    return initialized_;
}

Status SenderNode::create_session(const SessionConfig& cfg) {
    std::lock_guard lock(mu_);
    if (!initialized_) return Error{Errc::not_initialized, "Init required first"};
    if (sessions_.count(cfg.ssid))
        return Error{Errc::duplicate_ssid, "ssid already in use"};
    if (cfg.sender_port != global_.stamp_udp_port)
        return Error{Errc::invalid_config, "sender_port: must match the node STAMP port"};
    auto s = SenderSession::create(cfg);
    if (!s) return s.error();
    sessions_[cfg.ssid] = Slot{std::shared_ptr<SenderSession>(std::move(s.value())), {}, {}};
    return Status{};
}

Status SenderNode::start_session(uint16_t ssid, std::optional<int64_t> duration_ns) {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(ssid);
    if (it == sessions_.end()) return Error{Errc::unknown_ssid, "no such session"};
    if (auto st = it->second.session->start(); !st) return st;
    it->second.tx_timer =
        transport_.scheduler().schedule_after(0, [this, ssid] { tx_tick(ssid); });
    if (duration_ns && *duration_ns > 0) {
        // Ends the transmit loop only; the session keeps collecting the
        // replies still in flight until an explicit Stop.
        it->second.stop_timer = transport_.scheduler().schedule_after(
            *duration_ns, [this, ssid] { pause_transmit(ssid); });
    }
    return Status{};
}

void SenderNode::pause_transmit(uint16_t ssid) {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(ssid);
    if (it == sessions_.end() || !it->second.tx_timer) return;
    transport_.scheduler().cancel(*it->second.tx_timer);
    it->second.tx_timer.reset();
}

Status SenderNode::stop_session(uint16_t ssid) {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(ssid);
    if (it == sessions_.end()) return Error{Errc::unknown_ssid, "no such session"};
    if (auto st = it->second.session->stop(); !st) return st;
    disarm(it->second);
    return Status{};
}

Status SenderNode::destroy_session(uint16_t ssid) {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(ssid);
    if (it == sessions_.end()) return Error{Errc::unknown_ssid, "no such session"};
    if (it->second.session->status() == SessionStatus::running) (void)it->second.session->stop();
    disarm(it->second);
    sessions_.erase(it);
    return Status{};
}

void SenderNode::disarm(Slot& slot) {
    if (slot.tx_timer) transport_.scheduler().cancel(*slot.tx_timer);
    if (slot.stop_timer) transport_.scheduler().cancel(*slot.stop_timer);
    slot.tx_timer.reset();
    slot.stop_timer.reset();
}

void SenderNode::tx_tick(uint16_t ssid) {
    std::shared_ptr<SenderSession> s;
    {
        std::lock_guard lock(mu_);
        auto it = sessions_.find(ssid);
        if (it == sessions_.end()) return;
        s = it->second.session;
    }
    auto pkt = s->next_packet(transport_.clock());
    if (!pkt) return;  // stopped between tick and send; do not re-arm
    (void)transport_.send(pkt.value());
    {
        std::lock_guard lock(mu_);
        ++tx_count_;
        auto it = sessions_.find(ssid);
        if (it == sessions_.end() || it->second.session->status() != SessionStatus::running)
            return;
        it->second.tx_timer = transport_.scheduler().schedule_after(
            s->config().interval_ns, [this, ssid] { tx_tick(ssid); });
    }
}

Result<std::vector<MeasurementRecord>> SenderNode::fetch_results(uint16_t ssid, size_t max) {
    auto s = session(ssid);
    if (!s) return Error{Errc::unknown_ssid, "no such session"};
    return s->fetch_results(max);
}

Result<uint64_t> SenderNode::processed_count(std::optional<uint16_t> ssid) const {
    std::lock_guard lock(mu_);
    if (ssid) {
        auto it = sessions_.find(*ssid);
        if (it == sessions_.end()) return Error{Errc::unknown_ssid, "no such session"};
        return it->second.session->counters().enqueued;
    }
    uint64_t total = 0;
    for (auto& [id, slot] : sessions_) total += slot.session->counters().enqueued;
    return total;
}

std::shared_ptr<SenderSession> SenderNode::session(uint16_t ssid) const {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(ssid);
    return it == sessions_.end() ? nullptr : it->second.session;
}

std::vector<uint16_t> SenderNode::session_ids() const {
    std::lock_guard lock(mu_);
    std::vector<uint16_t> out;
    for (auto& [id, slot] : sessions_) out.push_back(id);
    return out;
}

DiscardCounters SenderNode::node_discards() const {
    std::lock_guard lock(mu_);
    return node_discards_;
}

uint64_t SenderNode::tx_count() const {
    std::lock_guard lock(mu_);
    return tx_count_;
}

void SenderNode::on_datagram(ByteView datagram) {
    auto ssid = peek_stamp_ssid(datagram);
    std::shared_ptr<SenderSession> s;
    if (ssid) s = session(*ssid);
    if (!s) {
        std::lock_guard lock(mu_);
        ++node_discards_[static_cast<int>(ssid ? DiscardReason::wrong_ssid
                                               : DiscardReason::decode_error)];
        return;
    }
    auto r = s->on_receive(datagram, transport_.clock());
    if (std::holds_alternative<DiscardReason>(r)) {
        std::lock_guard lock(mu_);
        ++node_discards_[static_cast<int>(std::get<DiscardReason>(r))];
    }
}

}  // namespace stamp
