#ifndef STAMP_SIM_NETWORK_HPP_
#define STAMP_SIM_NETWORK_HPP_

#include <cstdint>
#include <map>
#include <memory>
#include <queue>
#include <random>
#include <string>
#include <unordered_set>
#include <vector>

#include "stamp/transport.hpp"

namespace stamp {

// 2024-01-01T00:00:00Z; simulated runs start here unless configured.
inline constexpr int64_t kDefaultSimEpochNs = 1'704'067'200LL * 1'000'000'000LL;

struct DelaySpec {
    int64_t constant_ns = 0;
    int64_t min_ns = 0;
    int64_t max_ns = 0;
    bool is_uniform = false;

    static DelaySpec constant(int64_t ns) { return DelaySpec{ns, 0, 0, false}; }
    static DelaySpec uniform(int64_t min_ns, int64_t max_ns) {
        return DelaySpec{0, min_ns, max_ns, true};
    }

    int64_t sample(std::mt19937_64& rng) const {
        if (!is_uniform) return constant_ns;
        return std::uniform_int_distribution<int64_t>(min_ns, max_ns)(rng);
    }
};

// One direction of a simulated link.
struct LinkModel {
    DelaySpec delay;
    double loss_prob = 0.0;
    bool allow_reorder = false;  // when false, FIFO is enforced even under jitter
};

// Single-server processing stage in front of a node: one packet every
// 1/capacity seconds, a bounded backlog, tail drop. capacity_pps = 0
// disables the stage. Gives nodes a step-shaped drop curve for benchmarks.
struct ServiceModel {
    double capacity_pps = 0.0;
    size_t queue_depth = 64;
};

struct TraceEvent {
    int64_t at_ns;
    char kind;  // 's' send, 'x' loss, 'd' delivery, 't' timer
    uint32_t node;
    uint32_t size;

    bool operator==(const TraceEvent&) const = default;
};

class SimNetwork;

// A node in the simulated network. Implements the Transport contract and
// owns the node's (possibly skewed) clock.
class SimEndpoint : public Transport, public Scheduler {
public:
    Status send(ByteView datagram) override;
    Status register_filter(const FilterSpec& filter, DatagramHandler handler) override;
    void unregister_filters() override;
    Clock& clock() override { return clock_; }
    Scheduler& scheduler() override { return *this; }
    void set_default_sink(DatagramHandler sink) override { sink_ = std::move(sink); }
    uint64_t matched_count() const override { return matched_; }
    uint64_t unmatched_count() const override { return unmatched_; }

    uint64_t schedule_after(int64_t delay_ns, std::function<void()> fn) override;
    void cancel(uint64_t token) override;

    const std::string& name() const { return name_; }
    const Ipv6Addr& addr() const { return addr_; }
    uint64_t delivered_count() const { return matched_ + unmatched_; }
    uint64_t sent_count() const { return sent_; }

    void set_service_model(const ServiceModel& model) { service_ = model; }
    uint64_t service_dropped() const { return service_dropped_; }
    // Drops at the service stage split by STAMP port, for drop accounting.
    uint64_t service_dropped_port(uint16_t udp_dst_port) const;

private:
    friend class SimNetwork;

    class NodeClock : public Clock {
    public:
        int64_t now_unix_ns() override;
        SimNetwork* net = nullptr;
        int64_t offset_ns = 0;
    };

    void deliver(ByteView datagram);
    void handle(ByteView datagram);

    SimNetwork* net_ = nullptr;
    uint32_t index_ = 0;
    std::string name_;
    Ipv6Addr addr_;
    NodeClock clock_;
    std::vector<std::pair<FilterSpec, DatagramHandler>> filters_;
    DatagramHandler sink_;
    uint64_t matched_ = 0;
    uint64_t unmatched_ = 0;
    uint64_t sent_ = 0;

    ServiceModel service_;
    int64_t service_free_at_ns_ = 0;
    size_t service_backlog_ = 0;
    uint64_t service_dropped_ = 0;
    std::map<uint16_t, uint64_t> service_dropped_by_port_;
};

// Deterministic discrete-event network: nodes, per-direction links with
// delay/loss/clock-offset models, one event queue. (seed, scenario) fully
// determines the delivery trace. Single-threaded by contract.
class SimNetwork {
public:
    explicit SimNetwork(uint64_t seed = 0, int64_t epoch_unix_ns = kDefaultSimEpochNs);

    SimEndpoint& add_node(const std::string& name, const Ipv6Addr& addr,
                          int64_t clock_offset_ns = 0);
    Status add_link(const Ipv6Addr& a, const Ipv6Addr& b, LinkModel a_to_b, LinkModel b_to_a);

    SimEndpoint* find(const Ipv6Addr& addr);

    // Processes queued events in (time, insertion) order until none remain.
    // Returns the number of events executed.
    uint64_t run_until_idle();

    int64_t now_ns() const { return now_ns_; }                    // since epoch
    int64_t now_unix_ns() const { return epoch_ns_ + now_ns_; }  // absolute

    const std::vector<TraceEvent>& trace() const { return trace_; }
    uint64_t loss_count() const { return losses_; }
    uint64_t unroutable_count() const { return unroutable_; }

private:
    friend class SimEndpoint;

    struct Event {
        int64_t at_ns;
        uint64_t seq;
        std::function<void()> fn;
    };
    struct EventOrder {
        bool operator()(const Event& a, const Event& b) const {
            if (a.at_ns != b.at_ns) return a.at_ns > b.at_ns;
            return a.seq > b.seq;
        }
    };

    uint64_t schedule(int64_t at_ns, std::function<void()> fn);
    Status route(SimEndpoint& from, ByteView datagram);

    int64_t epoch_ns_;
    int64_t now_ns_ = 0;
    uint64_t next_seq_ = 0;
    std::mt19937_64 rng_;
    std::priority_queue<Event, std::vector<Event>, EventOrder> queue_;
    std::unordered_set<uint64_t> cancelled_;
    std::vector<std::unique_ptr<SimEndpoint>> nodes_;

    struct LinkState {
        LinkModel model;
        int64_t last_delivery_ns = -1;
        uint64_t sent = 0;
        uint64_t lost = 0;
    };
    std::map<std::pair<uint32_t, uint32_t>, LinkState> links_;

    std::vector<TraceEvent> trace_;
    uint64_t losses_ = 0;
    uint64_t unroutable_ = 0;
};

}  // namespace stamp

#endif  // STAMP_SIM_NETWORK_HPP_
