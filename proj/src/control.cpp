#include "stamp/control.hpp"

#include "json.hpp"

namespace stamp {

using json = nlohmann::ordered_json;

const char* control_op_name(ControlOp op) {
    switch (op) {
        case ControlOp::init: return "Init";
        case ControlOp::reset: return "Reset";
        case ControlOp::create_session: return "CreateStampSession";
        case ControlOp::start_session: return "StartStampSession";
        case ControlOp::stop_session: return "StopStampSession";
        case ControlOp::destroy_session: return "DestroyStampSession";
        case ControlOp::get_results: return "GetStampSessionResults";
        case ControlOp::get_processed_count: return "GetProcessedCount";
    }
    return "?";
}

std::optional<ControlOp> control_op_from_name(const std::string& name) {
    for (ControlOp op : {ControlOp::init, ControlOp::reset, ControlOp::create_session,
                         ControlOp::start_session, ControlOp::stop_session,
                         ControlOp::destroy_session, ControlOp::get_results,
                         ControlOp::get_processed_count}) {
        if (name == control_op_name(op)) return op;
    }
    return std::nullopt;
}

const char* to_string(AuthMode m) {
    return m == AuthMode::unauthenticated ? "unauthenticated" : "authenticated";
}
const char* to_string(TimestampFormat f) { return f == TimestampFormat::ntp ? "ntp" : "ptp"; }
const char* to_string(DelayMode m) { return m == DelayMode::one_way ? "one-way" : "two-way"; }
const char* to_string(ReflectorMode m) {
    return m == ReflectorMode::stateless ? "stateless" : "stateful";
}

std::optional<AuthMode> auth_mode_from_string(const std::string& s) {
    if (s == "unauthenticated") return AuthMode::unauthenticated;
    if (s == "authenticated") return AuthMode::authenticated;
    return std::nullopt;
}
std::optional<TimestampFormat> timestamp_format_from_string(const std::string& s) {
    if (s == "ntp") return TimestampFormat::ntp;
    if (s == "ptp") return TimestampFormat::ptp;
    return std::nullopt;
}
std::optional<DelayMode> delay_mode_from_string(const std::string& s) {
    if (s == "one-way") return DelayMode::one_way;
    if (s == "two-way") return DelayMode::two_way;
    return std::nullopt;
}
std::optional<ReflectorMode> reflector_mode_from_string(const std::string& s) {
    if (s == "stateless") return ReflectorMode::stateless;
    if (s == "stateful") return ReflectorMode::stateful;
    return std::nullopt;
}

namespace {

json addr_list_to_json(const std::vector<Ipv6Addr>& list) {
    json out = json::array();
    for (const auto& a : list) out.push_back(a.str());
    return out;
}

std::vector<Ipv6Addr> addr_list_from_json(const json& j) {
    std::vector<Ipv6Addr> out;
    for (const auto& item : j) {
        auto a = Ipv6Addr::parse(item.get<std::string>());
        if (!a) throw std::invalid_argument("bad IPv6 address: " + item.get<std::string>());
        out.push_back(*a);
    }
    return out;
}

Ipv6Addr addr_from_json(const json& j) {
    auto a = Ipv6Addr::parse(j.get<std::string>());
    if (!a) throw std::invalid_argument("bad IPv6 address: " + j.get<std::string>());
    return *a;
}

json session_to_json(const SessionSpec& s) {
    json j;
    j["ssid"] = s.ssid;
    j["sid_list"] = addr_list_to_json(s.sid_list);
    j["return_sid_list"] = addr_list_to_json(s.return_sid_list);
    j["interval_ns"] = s.interval_ns;
    j["source_ipv6"] = s.source_ipv6.str();
    j["auth_mode"] = to_string(s.auth_mode);
    j["timestamp_format"] = to_string(s.timestamp_format);
    j["delay_mode"] = to_string(s.delay_mode);
    j["reflector_ipv6"] = s.reflector_ipv6.str();
    j["sender_port"] = s.sender_port;
    j["reflector_port"] = s.reflector_port;
    j["reflector_mode"] = to_string(s.reflector_mode);
    return j;
}

SessionSpec session_from_json(const json& j) {
    SessionSpec s;
    s.ssid = j.at("ssid").get<uint16_t>();
    s.sid_list = addr_list_from_json(j.at("sid_list"));
    s.return_sid_list = addr_list_from_json(j.at("return_sid_list"));
    s.interval_ns = j.at("interval_ns").get<int64_t>();
    s.source_ipv6 = addr_from_json(j.at("source_ipv6"));
    auto auth = auth_mode_from_string(j.at("auth_mode").get<std::string>());
    auto fmt = timestamp_format_from_string(j.at("timestamp_format").get<std::string>());
    auto dm = delay_mode_from_string(j.at("delay_mode").get<std::string>());
    auto rm = reflector_mode_from_string(j.at("reflector_mode").get<std::string>());
    if (!auth || !fmt || !dm || !rm) throw std::invalid_argument("bad session enum value");
    s.auth_mode = *auth;
    s.timestamp_format = *fmt;
    s.delay_mode = *dm;
    s.reflector_mode = *rm;
    s.reflector_ipv6 = addr_from_json(j.at("reflector_ipv6"));
    s.sender_port = j.at("sender_port").get<uint16_t>();
    s.reflector_port = j.at("reflector_port").get<uint16_t>();
    return s;
}

json record_to_json(const MeasurementRecord& r) {
    json j;
    j["ssid"] = r.ssid;
    j["sender_seq"] = r.sender_seq;
    j["reflector_seq"] = r.reflector_seq;
    j["t1_s"] = r.t1.seconds;
    j["t1_f"] = r.t1.fraction;
    j["t2_s"] = r.t2.seconds;
    j["t2_f"] = r.t2.fraction;
    j["t3_s"] = r.t3.seconds;
    j["t3_f"] = r.t3.fraction;
    j["t4_s"] = r.t4.seconds;
    j["t4_f"] = r.t4.fraction;
    j["sender_ttl"] = r.sender_ttl;
    j["received_at_ns"] = r.received_at_ns;
    return j;
}

MeasurementRecord record_from_json(const json& j) {
    MeasurementRecord r;
    r.ssid = j.at("ssid").get<uint16_t>();
    r.sender_seq = j.at("sender_seq").get<uint32_t>();
    r.reflector_seq = j.at("reflector_seq").get<uint32_t>();
    r.t1 = {j.at("t1_s").get<uint32_t>(), j.at("t1_f").get<uint32_t>()};
    r.t2 = {j.at("t2_s").get<uint32_t>(), j.at("t2_f").get<uint32_t>()};
    r.t3 = {j.at("t3_s").get<uint32_t>(), j.at("t3_f").get<uint32_t>()};
    r.t4 = {j.at("t4_s").get<uint32_t>(), j.at("t4_f").get<uint32_t>()};
    r.sender_ttl = j.at("sender_ttl").get<uint8_t>();
    r.received_at_ns = j.at("received_at_ns").get<int64_t>();
    return r;
}

Bytes to_bytes(const json& j) {
    std::string s = j.dump();
    return Bytes(s.begin(), s.end());
}

}  // namespace

Bytes encode_request(const ControlRequest& req) {
    json j;
    j["id"] = req.id;
    j["op"] = control_op_name(req.op);
    json body;
    switch (req.op) {
        case ControlOp::init:
            body["stamp_udp_port"] = req.global.stamp_udp_port;
            body["interface"] = req.global.bind_interface;
            body["src_ipv6"] = req.global.src_ipv6.str();
            break;
        case ControlOp::reset:
            break;
        case ControlOp::create_session:
            body["session"] = session_to_json(req.session);
            break;
        case ControlOp::start_session:
            body["ssid"] = req.ssid;
            body["duration_ns"] = req.duration_ns.value_or(0);
            break;
        case ControlOp::stop_session:
        case ControlOp::destroy_session:
            body["ssid"] = req.ssid;
            break;
        case ControlOp::get_results:
            body["ssid"] = req.ssid;
            body["max"] = req.max_results;
            break;
        case ControlOp::get_processed_count:
            body["ssid"] = req.count_all_sessions ? 0 : req.ssid;
            break;
    }
    j["body"] = std::move(body);
    return to_bytes(j);
}

Result<ControlRequest> decode_request(ByteView payload) {
    try {
        json j = json::parse(payload.begin(), payload.end());
        ControlRequest req;
        req.id = j.at("id").get<uint64_t>();
        auto op = control_op_from_name(j.at("op").get<std::string>());
        if (!op) return Error{Errc::bad_request, "unknown op"};
        req.op = *op;
        const json& body = j.at("body");
        switch (req.op) {
            case ControlOp::init: {
                req.global.stamp_udp_port = body.at("stamp_udp_port").get<uint16_t>();
                req.global.bind_interface = body.at("interface").get<std::string>();
                req.global.src_ipv6 = addr_from_json(body.at("src_ipv6"));
                break;
            }
            case ControlOp::reset:
                break;
            case ControlOp::create_session:
                req.session = session_from_json(body.at("session"));
                break;
            case ControlOp::start_session: {
                req.ssid = body.at("ssid").get<uint16_t>();
                int64_t dur = body.at("duration_ns").get<int64_t>();
                if (dur > 0) req.duration_ns = dur;
                break;
            }
            case ControlOp::stop_session:
            case ControlOp::destroy_session:
                req.ssid = body.at("ssid").get<uint16_t>();
                break;
            case ControlOp::get_results:
                req.ssid = body.at("ssid").get<uint16_t>();
                req.max_results = body.at("max").get<size_t>();
                break;
            case ControlOp::get_processed_count:
                req.ssid = body.at("ssid").get<uint16_t>();
                req.count_all_sessions = req.ssid == 0;
                break;
        }
        return req;
    } catch (const std::exception& e) {
        return Error{Errc::parse_error, e.what()};
    }
}

Bytes encode_reply(const ControlReply& reply) {
    json j;
    j["id"] = reply.id;
    j["status"] = reply.ok ? "ok" : "error";
    if (reply.ok) {
        json body;
        if (!reply.role.empty()) body["role"] = reply.role;
        if (!reply.records.empty() || reply.more) {
            json records = json::array();
            for (const auto& r : reply.records) records.push_back(record_to_json(r));
            body["records"] = std::move(records);
            body["more"] = reply.more;
        }
        if (reply.processed != 0) body["processed"] = reply.processed;
        j["body"] = std::move(body);
    } else {
        j["error"] = {{"code", errc_name(reply.error.code)}, {"message", reply.error.message}};
    }
    return to_bytes(j);
}

Result<ControlReply> decode_reply(ByteView payload) {
    try {
        json j = json::parse(payload.begin(), payload.end());
        ControlReply reply;
        reply.id = j.at("id").get<uint64_t>();
        reply.ok = j.at("status").get<std::string>() == "ok";
        if (!reply.ok) {
            const json& err = j.at("error");
            std::string code = err.at("code").get<std::string>();
            reply.error.code = Errc::io_error;
            for (int c = 0; c <= static_cast<int>(Errc::parse_error); ++c) {
                if (code == errc_name(static_cast<Errc>(c))) {
                    reply.error.code = static_cast<Errc>(c);
                    break;
                }
            }
            reply.error.message = err.at("message").get<std::string>();
            return reply;
        }
        if (j.contains("body")) {
            const json& body = j.at("body");
            if (body.contains("role")) reply.role = body.at("role").get<std::string>();
            if (body.contains("records")) {
                for (const auto& r : body.at("records")) reply.records.push_back(record_from_json(r));
                reply.more = body.at("more").get<bool>();
            }
            if (body.contains("processed")) reply.processed = body.at("processed").get<uint64_t>();
        }
        return reply;
    } catch (const std::exception& e) {
        return Error{Errc::parse_error, e.what()};
    }
}

void append_frame(Bytes& out, ByteView payload) {
    put_u32(out, static_cast<uint32_t>(payload.size()));
    out.insert(out.end(), payload.begin(), payload.end());
}

void FrameReader::feed(ByteView data) { buf_.insert(buf_.end(), data.begin(), data.end()); }

Result<std::optional<Bytes>> FrameReader::next() {
    if (buf_.size() < 4) return std::optional<Bytes>{};
    uint32_t len = get_u32(buf_, 0);
    if (len > kMaxControlFrame) return Error{Errc::bad_request, "oversized control frame"};
    if (buf_.size() < 4 + static_cast<size_t>(len)) return std::optional<Bytes>{};
    Bytes payload(buf_.begin() + 4, buf_.begin() + 4 + len);
    buf_.erase(buf_.begin(), buf_.begin() + 4 + len);
    return std::optional<Bytes>{std::move(payload)};
}

SessionConfig sender_config_from_spec(const SessionSpec& spec) {
    SessionConfig cfg;
    cfg.ssid = spec.ssid;
    cfg.sid_list = spec.sid_list;
    cfg.interval_ns = spec.interval_ns;
    cfg.src_addr = spec.source_ipv6;
    cfg.auth_mode = spec.auth_mode;
    cfg.timestamp_format = spec.timestamp_format;
    cfg.delay_mode = spec.delay_mode;
    cfg.reflector_addr = spec.reflector_ipv6;
    cfg.sender_port = spec.sender_port;
    cfg.reflector_port = spec.reflector_port;
    cfg.reflector_mode = spec.reflector_mode;
    return cfg;
}

ReflectorSessionConfig reflector_config_from_spec(const SessionSpec& spec,
                                                  const Ipv6Addr& reflector_src) {
    ReflectorSessionConfig cfg;
    cfg.ssid = spec.ssid;
    cfg.return_sid_list = spec.return_sid_list;
    cfg.sender_addr = spec.source_ipv6;
    cfg.src_addr = reflector_src;
    cfg.sender_port = spec.sender_port;
    cfg.reflector_port = spec.reflector_port;
    cfg.mode = spec.reflector_mode;
    return cfg;
}

Status SenderControl::create_session(const SessionSpec& spec) {
    if (spec.auth_mode != AuthMode::unauthenticated)
        return Error{Errc::invalid_config, "auth_mode: only unauthenticated is supported"};
    return node_.create_session(sender_config_from_spec(spec));
}

Result<ControlTarget::FetchBatch> SenderControl::fetch_results(uint16_t ssid, size_t max) {
    auto session = node_.session(ssid);
    if (!session) return Error{Errc::unknown_ssid, "no such session"};
    FetchBatch batch;
    batch.records = session->fetch_results(max);
    batch.more = session->queued() > 0;
    return batch;
}

Status ReflectorControl::create_session(const SessionSpec& spec) {
    if (spec.auth_mode != AuthMode::unauthenticated)
        return Error{Errc::invalid_config, "auth_mode: only unauthenticated is supported"};
    if (!node_.initialized()) return Error{Errc::not_initialized, "Init required first"};
    return node_.create_session(
        reflector_config_from_spec(spec, node_.global_config().src_ipv6));
}

Result<ControlTarget::FetchBatch> ReflectorControl::fetch_results(uint16_t, size_t) {
    return Error{Errc::unsupported, "supported only by the Session-Sender"};
}

ControlReply dispatch_request(ControlTarget& target, const ControlRequest& req) {
    ControlReply reply;
    reply.id = req.id;
    Status st;
    switch (req.op) {
        case ControlOp::init:
            st = target.init(req.global);
            reply.role = target.role();
            break;
        case ControlOp::reset:
            st = target.reset();
            break;
        case ControlOp::create_session:
            st = target.create_session(req.session);
            break;
        case ControlOp::start_session:
            st = target.start_session(req.ssid, req.duration_ns);
            break;
        case ControlOp::stop_session:
            st = target.stop_session(req.ssid);
            break;
        case ControlOp::destroy_session:
            st = target.destroy_session(req.ssid);
            break;
        case ControlOp::get_results: {
            size_t max = req.max_results == 0 ? kMaxRecordsPerReply
                                              : std::min(req.max_results, kMaxRecordsPerReply);
            auto batch = target.fetch_results(req.ssid, max);
            if (!batch) {
                reply.ok = false;
                reply.error = batch.error();
                return reply;
            }
            reply.ok = true;
            reply.records = std::move(batch.value().records);
            reply.more = batch.value().more;
            return reply;
        }
        case ControlOp::get_processed_count: {
            auto count = target.processed_count(
                req.count_all_sessions ? std::nullopt : std::optional<uint16_t>(req.ssid));
            if (!count) {
                reply.ok = false;
                reply.error = count.error();
                return reply;
            }
            reply.ok = true;
            reply.processed = count.value();
            return reply;
        }
    }
    reply.ok = st.ok();
    if (!st.ok()) reply.error = st.error();
    return reply;
}

Bytes handle_control_frame(ControlTarget& target, ByteView payload) {
    auto req = decode_request(payload);
    if (!req) {
        ControlReply reply;
        reply.id = 0;
        reply.ok = false;
        reply.error = req.error();
        return encode_reply(reply);
    }
    return encode_reply(dispatch_request(target, req.value()));
}

}  // namespace stamp
