#include "stamp/controller.hpp"

namespace stamp {

Controller::Controller(ControlChannel& sender, ControlChannel& reflector,
                       NodeGlobalConfig sender_global, NodeGlobalConfig reflector_global)
    : sender_(sender),
      reflector_(reflector),
      sender_global_(std::move(sender_global)),
      reflector_global_(std::move(reflector_global)) {}

namespace {

Status status_of(const Result<ControlReply>& reply) {
    if (!reply) return reply.error();
    if (!reply.value().ok) return reply.value().error;
    return Status{};
}

Status init_node(ControlChannel& chan, const NodeGlobalConfig& cfg) {
    ControlRequest req;
    req.op = ControlOp::init;
    req.global = cfg;
    auto reply = chan.call(req);
    if (!reply) return reply.error();
    if (!reply.value().ok && reply.value().error.code != Errc::already_initialized)
        return reply.value().error;
    return Status{};
}

Status session_op(ControlChannel& chan, ControlOp op, uint16_t ssid,
                  std::optional<int64_t> duration = std::nullopt) {
    ControlRequest req;
    req.op = op;
    req.ssid = ssid;
    req.duration_ns = duration;
    return status_of(chan.call(req));
}

}  // namespace

Status Controller::ensure_init() {
    if (!reflector_ready_) {
        if (auto st = init_node(reflector_, reflector_global_); !st) return st;
        reflector_ready_ = true;
    }
    if (!sender_ready_) {
        if (auto st = init_node(sender_, sender_global_); !st) return st;
        sender_ready_ = true;
    }
    return Status{};
}

Result<uint16_t> Controller::allocate_ssid() {
    for (int tries = 0; tries < 65535; ++tries) {
        uint16_t candidate = next_ssid_;
        next_ssid_ = next_ssid_ == 65535 ? 1 : next_ssid_ + 1;  // never 0
        if (!in_use_.count(candidate)) return candidate;
    }
    return Error{Errc::invalid_config, "all 65535 ssids in use"};
}

Result<uint16_t> Controller::create_measured_path(const std::vector<Ipv6Addr>& direct_sids,
                                                  const std::vector<Ipv6Addr>& return_sids,
                                                  const PathParams& params) {
    if (auto st = ensure_init(); !st) return st.error();

    uint16_t ssid;
    if (params.ssid) {
        if (*params.ssid == 0) return Error{Errc::invalid_config, "ssid: must be nonzero"};
        ssid = *params.ssid;
    } else {
        auto allocated = allocate_ssid();
        if (!allocated) return allocated.error();
        ssid = allocated.value();
    }

    ControlRequest req;
    req.op = ControlOp::create_session;
    req.session.ssid = ssid;
    req.session.sid_list = direct_sids;
    req.session.return_sid_list = return_sids;
    req.session.interval_ns = params.interval_ns;
    req.session.source_ipv6 = sender_global_.src_ipv6;
    req.session.auth_mode = params.auth_mode;
    req.session.timestamp_format = params.timestamp_format;
    req.session.delay_mode = params.delay_mode;
    req.session.reflector_ipv6 = reflector_global_.src_ipv6;
    req.session.sender_port = params.sender_port;
    req.session.reflector_port = params.reflector_port;
    req.session.reflector_mode = params.reflector_mode;

    // The reflector is configured before the sender.
    if (auto st = status_of(reflector_.call(req)); !st) return st.error();
    if (auto st = status_of(sender_.call(req)); !st) {
        (void)session_op(reflector_, ControlOp::destroy_session, ssid);  // roll back
        return st.error();
    }
    in_use_.insert(ssid);
    return ssid;
}

Status Controller::start_session(uint16_t ssid, std::optional<int64_t> duration_ns) {
    if (auto st = session_op(reflector_, ControlOp::start_session, ssid); !st) return st;
    return session_op(sender_, ControlOp::start_session, ssid, duration_ns);
}

Status Controller::stop_session(uint16_t ssid) {
    auto sender_st = session_op(sender_, ControlOp::stop_session, ssid);
    auto reflector_st = session_op(reflector_, ControlOp::stop_session, ssid);
    return sender_st.ok() ? reflector_st : sender_st;
}

Status Controller::destroy_session(uint16_t ssid) {
    auto sender_st = session_op(sender_, ControlOp::destroy_session, ssid);
    auto reflector_st = session_op(reflector_, ControlOp::destroy_session, ssid);
    in_use_.erase(ssid);
    return sender_st.ok() ? reflector_st : sender_st;
}

Status Controller::reset_nodes() {
    ControlRequest req;
    req.op = ControlOp::reset;
    auto s1 = status_of(sender_.call(req));
    auto s2 = status_of(reflector_.call(req));
    sender_ready_ = reflector_ready_ = false;
    in_use_.clear();
    return s1.ok() ? s2 : s1;
}

Result<std::vector<MeasurementRecord>> Controller::poll_once(uint16_t ssid) {
    std::vector<MeasurementRecord> out;
    for (;;) {
        ControlRequest req;
        req.op = ControlOp::get_results;
        req.ssid = ssid;
        req.max_results = kMaxRecordsPerReply;
        auto reply = sender_.call(req);
        if (!reply) {
            ++poll_gaps_;
            return reply.error();
        }
        if (!reply.value().ok) {
            if (reply.value().error.code == Errc::unreachable) ++poll_gaps_;
            return reply.value().error;
        }
        out.insert(out.end(), reply.value().records.begin(), reply.value().records.end());
        if (!reply.value().more) break;
    }
    return out;
}

Result<uint64_t> Controller::processed_count(bool reflector_side, std::optional<uint16_t> ssid) {
    ControlRequest req;
    req.op = ControlOp::get_processed_count;
    req.ssid = ssid.value_or(0);
    req.count_all_sessions = !ssid.has_value();
    auto reply = (reflector_side ? reflector_ : sender_).call(req);
    if (!reply) return reply.error();
    if (!reply.value().ok) return reply.value().error;
    return reply.value().processed;
}

}  // namespace stamp
