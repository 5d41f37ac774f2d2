#ifndef STAMP_SENDER_HPP_
#define STAMP_SENDER_HPP_

#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <unordered_set>
#include <variant>
#include <vector>

#include "stamp/session_types.hpp"
#include "stamp/transport.hpp"

namespace stamp {

// One STAMP Session-Sender session: emits test packets from a pre-built
// template and, acting as the Collector, turns reflected packets into
// MeasurementRecords queued for the controller.
//
// The full datagram is encoded once at creation; next_packet() patches only
// the sequence number and T1 and recomputes the UDP checksum. The patched
// bytes are always identical to a from-scratch encode of the same fields.
class SenderSession {
public:
    static constexpr size_t kDefaultQueueCapacity = 65'536;

    static Result<std::unique_ptr<SenderSession>> create(const SessionConfig& cfg,
                                                         size_t queue_capacity = kDefaultQueueCapacity);

    const SessionConfig& config() const { return cfg_; }
    SessionStatus status() const;
    uint32_t next_seq() const;
    Bytes template_bytes() const;

    Status start();
    Status stop();

    // Patches the template with the next sequence number and a fresh T1.
    Result<Bytes> next_packet(Clock& clock);

    // Validation order: port, length/decode, ssid, status. T4 is stamped
    // from `clock` at entry. Duplicates are recorded, not deduplicated.
    std::variant<MeasurementRecord, DiscardReason> on_receive(ByteView datagram, Clock& clock);

    // Oldest-first; fetched records are permanently removed. max = 0 drains.
    std::vector<MeasurementRecord> fetch_results(size_t max);

    struct Counters {
        uint64_t enqueued = 0;
        uint64_t fetched = 0;
        uint64_t overflow_dropped = 0;
        uint64_t seq_repeats = 0;
        uint64_t checksum_failures = 0;
        DiscardCounters discards{};
    };
    Counters counters() const;
    size_t queued() const;

private:
    explicit SenderSession(const SessionConfig& cfg, size_t queue_capacity);
    Status build_template();

    SessionConfig cfg_;
    size_t queue_capacity_;

    mutable std::mutex mu_;
    SessionStatus status_ = SessionStatus::created;
    uint32_t next_seq_ = 0;
    Bytes template_;
    size_t seq_offset_ = 0;
    size_t t1_offset_ = 0;
    size_t udp_offset_ = 0;
    Ipv6Addr checksum_dst_;

    std::deque<MeasurementRecord> results_;
    std::unordered_set<uint32_t> seen_seqs_;
    Counters counters_;
};

// Session table plus transport attachment for a Session-Sender node.
// Control-plane operations map 1:1 onto the public methods.
class SenderNode {
public:
    explicit SenderNode(Transport& transport);
    ~SenderNode();

    Status init(const NodeGlobalConfig& cfg);
    Status reset();
    bool initialized() const;
    const NodeGlobalConfig& global_config() const { return global_; }

    Status create_session(const SessionConfig& cfg);
    // duration_ns bounds the transmit loop; collection continues until Stop.
    Status start_session(uint16_t ssid, std::optional<int64_t> duration_ns = std::nullopt);
    Status stop_session(uint16_t ssid);
    Status destroy_session(uint16_t ssid);
    Result<std::vector<MeasurementRecord>> fetch_results(uint16_t ssid, size_t max);

    // Records enqueued so far (per session or node-wide): the "processed
    // STAMP packets" counter a load generator queries after a trial.
    Result<uint64_t> processed_count(std::optional<uint16_t> ssid) const;

    std::shared_ptr<SenderSession> session(uint16_t ssid) const;
    std::vector<uint16_t> session_ids() const;
    DiscardCounters node_discards() const;
    uint64_t tx_count() const;

    // Datagram entry point; also registered with the transport at init.
    void on_datagram(ByteView datagram);

private:
    struct Slot {
        std::shared_ptr<SenderSession> session;
        std::optional<uint64_t> tx_timer;
        std::optional<uint64_t> stop_timer;
    };

    void tx_tick(uint16_t ssid);
    void pause_transmit(uint16_t ssid);
    void disarm(Slot& slot);

    Transport& transport_;
    mutable std::mutex mu_;
    bool initialized_ = false;
    NodeGlobalConfig global_;
    std::map<uint16_t, Slot> sessions_;
    DiscardCounters node_discards_{};
    uint64_t tx_count_ = 0;
};

}  // namespace stamp

#endif  // STAMP_SENDER_HPP_
