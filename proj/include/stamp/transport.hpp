#ifndef STAMP_TRANSPORT_HPP_
#define STAMP_TRANSPORT_HPP_

#include <cstdint>
#include <functional>
#include <optional>

#include "stamp/bytes.hpp"
#include "stamp/errors.hpp"
#include "stamp/ipv6.hpp"
#include "stamp/ntp_time.hpp"
#include "stamp/wire.hpp"

namespace stamp {

// The STAMP pre-filter: stands in for the kernel-level BPF/ip6tables rule
// that steers test packets to the measurement process. A consumer receives
// all and only datagrams whose UDP destination port matches, and, when
// local_addr is set, whose final destination matches it too.
struct FilterSpec {
    uint16_t local_port = kDefaultStampPort;
    std::optional<Ipv6Addr> local_addr;

    bool matches(ByteView datagram) const {
        auto port = peek_udp_dst_port(datagram);
        if (!port || *port != local_port) return false;
        if (local_addr) {
            auto dst = peek_final_destination(datagram);
            if (!dst || !(*dst == *local_addr)) return false;
        }
        return true;
    }
};

using DatagramHandler = std::function<void(ByteView)>;

// One-shot timers; periodic work re-arms itself.
class Scheduler {
public:
    virtual ~Scheduler() = default;
    virtual uint64_t schedule_after(int64_t delay_ns, std::function<void()> fn) = 0;
    virtual void cancel(uint64_t token) = 0;
};

// One node's attachment to the datagram plane: send, filtered receive,
// the node's clock and its timer source. Backends: SimNetwork endpoints
// and the host UDP socket transport.
class Transport {
public:
    virtual ~Transport() = default;

    virtual Status send(ByteView datagram) = 0;
    virtual Status register_filter(const FilterSpec& filter, DatagramHandler handler) = 0;
    virtual void unregister_filters() = 0;

    virtual Clock& clock() = 0;
    virtual Scheduler& scheduler() = 0;

    // Datagrams that matched no filter go to the kernel-path sink.
    virtual void set_default_sink(DatagramHandler sink) = 0;
    virtual uint64_t matched_count() const = 0;
    virtual uint64_t unmatched_count() const = 0;
};

}  // namespace stamp

#endif  // STAMP_TRANSPORT_HPP_
