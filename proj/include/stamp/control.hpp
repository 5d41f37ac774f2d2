#ifndef STAMP_CONTROL_HPP_
#define STAMP_CONTROL_HPP_

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "stamp/reflector.hpp"
#include "stamp/sender.hpp"
#include "stamp/session_types.hpp"

namespace stamp {

// Southbound operations exposed by both node roles. GetProcessedCount backs
// the benchmark harness; everything else is the session-management set.
enum class ControlOp {
    init,
    reset,
    create_session,
    start_session,
    stop_session,
    destroy_session,
    get_results,
    get_processed_count,
};
const char* control_op_name(ControlOp op);
std::optional<ControlOp> control_op_from_name(const std::string& name);

// Replies carrying measurement batches are capped; `more` tells the
// controller to poll again.
inline constexpr size_t kMaxRecordsPerReply = 1000;
inline constexpr size_t kMaxControlFrame = 4 * 1024 * 1024;

// Everything a controller provides to create one session, in one shape for
// both roles: the sender consumes the direct-path fields, the reflector the
// return-path fields.
struct SessionSpec {
    uint16_t ssid = 0;
    std::vector<Ipv6Addr> sid_list;
    std::vector<Ipv6Addr> return_sid_list;
    int64_t interval_ns = 0;
    Ipv6Addr source_ipv6;  // the Session-Sender's test-packet source
    AuthMode auth_mode = AuthMode::unauthenticated;
    TimestampFormat timestamp_format = TimestampFormat::ntp;
    DelayMode delay_mode = DelayMode::two_way;
    Ipv6Addr reflector_ipv6;
    uint16_t sender_port = kDefaultStampPort;
    uint16_t reflector_port = kDefaultStampPort;
    ReflectorMode reflector_mode = ReflectorMode::stateless;
};

SessionConfig sender_config_from_spec(const SessionSpec& spec);
ReflectorSessionConfig reflector_config_from_spec(const SessionSpec& spec,
                                                  const Ipv6Addr& reflector_src);

struct ControlRequest {
    uint64_t id = 0;
    ControlOp op = ControlOp::init;
    NodeGlobalConfig global;               // init
    SessionSpec session;                   // create_session
    uint16_t ssid = 0;                     // session ops
    std::optional<int64_t> duration_ns;    // start_session
    size_t max_results = 0;                // get_results; 0 = reply cap
    bool count_all_sessions = false;       // get_processed_count
};

struct ControlReply {
    uint64_t id = 0;
    bool ok = false;
    Error error;                              // when !ok
    std::string role;                         // init reply
    std::vector<MeasurementRecord> records;   // get_results reply
    bool more = false;
    uint64_t processed = 0;                   // get_processed_count reply
};

// Canonically ordered JSON bodies inside length-prefixed frames; the exact
// schema lives in docs/control-schema.md.
Bytes encode_request(const ControlRequest& req);
Result<ControlRequest> decode_request(ByteView payload);
Bytes encode_reply(const ControlReply& reply);
Result<ControlReply> decode_reply(ByteView payload);

void append_frame(Bytes& out, ByteView payload);

// Incremental deframer for stream transports.
class FrameReader {
public:
    void feed(ByteView data);
    // Returns the next complete payload, or nullopt. Oversized frames fail.
    Result<std::optional<Bytes>> next();

private:
    Bytes buf_;
};

// The node-side face of the control plane.
class ControlTarget {
public:
    virtual ~ControlTarget() = default;
    virtual const char* role() const = 0;
    virtual Status init(const NodeGlobalConfig& cfg) = 0;
    virtual Status reset() = 0;
    virtual Status create_session(const SessionSpec& spec) = 0;
    virtual Status start_session(uint16_t ssid, std::optional<int64_t> duration_ns) = 0;
    virtual Status stop_session(uint16_t ssid) = 0;
    virtual Status destroy_session(uint16_t ssid) = 0;
    struct FetchBatch {
        std::vector<MeasurementRecord> records;
        bool more = false;
    };
    virtual Result<FetchBatch> fetch_results(uint16_t ssid, size_t max) = 0;
    virtual Result<uint64_t> processed_count(std::optional<uint16_t> ssid) = 0;
};

class SenderControl : public ControlTarget {
public:
    explicit SenderControl(SenderNode& node) : node_(node) {}
    const char* role() const override { return "sender"; }
    Status init(const NodeGlobalConfig& cfg) override { return node_.init(cfg); }
    Status reset() override { return node_.reset(); }
    Status create_session(const SessionSpec& spec) override;
    Status start_session(uint16_t ssid, std::optional<int64_t> duration_ns) override {
        return node_.start_session(ssid, duration_ns);
    }
    Status stop_session(uint16_t ssid) override { return node_.stop_session(ssid); }
    Status destroy_session(uint16_t ssid) override { return node_.destroy_session(ssid); }
    Result<FetchBatch> fetch_results(uint16_t ssid, size_t max) override;
    Result<uint64_t> processed_count(std::optional<uint16_t> ssid) override {
        return node_.processed_count(ssid);
    }

private:
    SenderNode& node_;
};

class ReflectorControl : public ControlTarget {
public:
    explicit ReflectorControl(ReflectorNode& node) : node_(node) {}
    const char* role() const override { return "reflector"; }
    Status init(const NodeGlobalConfig& cfg) override { return node_.init(cfg); }
    Status reset() override { return node_.reset(); }
    Status create_session(const SessionSpec& spec) override;
    Status start_session(uint16_t ssid, std::optional<int64_t> duration_ns) override {
        return node_.start_session(ssid, duration_ns);
    }
    Status stop_session(uint16_t ssid) override { return node_.stop_session(ssid); }
    Status destroy_session(uint16_t ssid) override { return node_.destroy_session(ssid); }
    Result<FetchBatch> fetch_results(uint16_t ssid, size_t max) override;
    Result<uint64_t> processed_count(std::optional<uint16_t> ssid) override {
        return node_.processed_count(ssid);
    }

private:
    ReflectorNode& node_;
};

// One request in, exactly one reply out.
ControlReply dispatch_request(ControlTarget& target, const ControlRequest& req);
Bytes handle_control_frame(ControlTarget& target, ByteView payload);

// String forms shared by the control schema, config files and the CLI.
const char* to_string(AuthMode m);
const char* to_string(TimestampFormat f);
const char* to_string(DelayMode m);
const char* to_string(ReflectorMode m);
std::optional<AuthMode> auth_mode_from_string(const std::string& s);
std::optional<TimestampFormat> timestamp_format_from_string(const std::string& s);
std::optional<DelayMode> delay_mode_from_string(const std::string& s);
std::optional<ReflectorMode> reflector_mode_from_string(const std::string& s);

}  // namespace stamp

#endif  // STAMP_CONTROL_HPP_
