#ifndef STAMP_REFLECTOR_HPP_
#define STAMP_REFLECTOR_HPP_

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <variant>
#include <vector>

#include "stamp/session_types.hpp"
#include "stamp/transport.hpp"

namespace stamp {

// One STAMP Session-Reflector session. T2 is captured at datagram hand-off
// (before any validation), T3 immediately before the reply bytes leave
// reflect(). Sender sequence number, timestamp and error estimate are echoed
// bit for bit; the Hop Limit of the incoming packet lands in sender_ttl.
//
// The reply header chain (IPv6 + return SRH + UDP) is pre-built at creation;
// reflect() rewrites the 44-byte body and the checksum in place.
class ReflectorSession {
public:
    static Result<std::unique_ptr<ReflectorSession>> create(const ReflectorSessionConfig& cfg);

    const ReflectorSessionConfig& config() const { return cfg_; }
    SessionStatus status() const;
    uint32_t tx_counter() const;

    Status start();
    Status stop();

    std::variant<Bytes, DiscardReason> reflect(ByteView datagram, Clock& clock);

    struct Counters {
        uint64_t reflected = 0;
        uint64_t checksum_failures = 0;
        DiscardCounters discards{};
    };
    Counters counters() const;

private:
    explicit ReflectorSession(const ReflectorSessionConfig& cfg);
    Status build_template();

    ReflectorSessionConfig cfg_;

    mutable std::mutex mu_;
    SessionStatus status_ = SessionStatus::created;
    uint32_t tx_counter_ = 0;  // stateful mode sequence source
    Bytes template_;
    size_t udp_offset_ = 0;
    size_t body_offset_ = 0;
    Ipv6Addr checksum_dst_;
    Counters counters_;
};

// Session table plus transport attachment for a Session-Reflector node.
class ReflectorNode {
public:
    explicit ReflectorNode(Transport& transport);
    ~ReflectorNode();

    Status init(const NodeGlobalConfig& cfg);
    Status reset();
    bool initialized() const;
    const NodeGlobalConfig& global_config() const { return global_; }

    Status create_session(const ReflectorSessionConfig& cfg);
    Status start_session(uint16_t ssid, std::optional<int64_t> duration_ns = std::nullopt);
    Status stop_session(uint16_t ssid);
    Status destroy_session(uint16_t ssid);

    Result<uint64_t> processed_count(std::optional<uint16_t> ssid) const;
    std::shared_ptr<ReflectorSession> session(uint16_t ssid) const;
    std::vector<uint16_t> session_ids() const;
    DiscardCounters node_discards() const;

    void on_datagram(ByteView datagram);

private:
    struct Slot {
        std::shared_ptr<ReflectorSession> session;
        std::optional<uint64_t> stop_timer;
    };

    Transport& transport_;
    mutable std::mutex mu_;
    bool initialized_ = false;
    NodeGlobalConfig global_;
    std::map<uint16_t, Slot> sessions_;
    DiscardCounters node_discards_{};
};

}  // namespace stamp

#endif  // STAMP_REFLECTOR_HPP_
