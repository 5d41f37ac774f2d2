#ifndef STAMP_UDP_TRANSPORT_HPP_
#define STAMP_UDP_TRANSPORT_HPP_

#include <atomic>
#include <condition_variable>
#include <map>
#include <memory>
#include <mutex>
#include <queue>
#include <thread>
#include <unordered_set>
#include <vector>

#include "stamp/transport.hpp"

namespace stamp {

// Host-side timer source: one worker thread, steady-clock deadlines.
class ThreadScheduler : public Scheduler {
public:
    ThreadScheduler();
    ~ThreadScheduler();

    uint64_t schedule_after(int64_t delay_ns, std::function<void()> fn) override;
    void cancel(uint64_t token) override;

private:
    struct Entry {
        int64_t deadline_ns;
        uint64_t seq;
        std::function<void()> fn;
        bool operator>(const Entry& o) const {
            return deadline_ns != o.deadline_ns ? deadline_ns > o.deadline_ns : seq > o.seq;
        }
    };
    void run();

    std::mutex mu_;
    std::condition_variable cv_;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> queue_;
    std::unordered_set<uint64_t> cancelled_;
    uint64_t next_seq_ = 1;
    bool stopping_ = false;
    std::thread worker_;
};

// Real UDP/IPv6 backend.
//
// Plain mode (unprivileged): each registered filter owns a UDP socket bound
// to (bind address, filter port). Outgoing test datagrams are reduced to
// their UDP payload and sent from the socket whose port matches the
// packet's source port; the SRH is carried only logically and does not
// reach the wire, which is a documented fidelity reduction. Incoming
// payloads are rewrapped into a synthetic IPv6/UDP datagram (peer address,
// hop limit from ancillary data) before hitting the engines.
//
// Raw mode (privileged): outgoing datagrams go through an IPPROTO_RAW
// socket verbatim, SRH included; reception still uses the UDP sockets.
class UdpTransport : public Transport {
public:
    struct Options {
        std::string bind_addr = "::";
        bool raw_srh_mode = false;
        int64_t clock_offset_ns = 0;
    };

    static Result<std::unique_ptr<UdpTransport>> create(const Options& opts);
    ~UdpTransport();

    Status send(ByteView datagram) override;
    Status register_filter(const FilterSpec& filter, DatagramHandler handler) override;
    void unregister_filters() override;
    Clock& clock() override { return clock_; }
    Scheduler& scheduler() override { return scheduler_; }
    void set_default_sink(DatagramHandler sink) override;
    uint64_t matched_count() const override { return matched_; }
    uint64_t unmatched_count() const override { return unmatched_; }

private:
    explicit UdpTransport(const Options& opts);
    void rx_loop(int fd, FilterSpec filter, DatagramHandler handler);

    Options opts_;
    HostClock clock_;
    ThreadScheduler scheduler_;
    int raw_fd_ = -1;

    std::mutex mu_;
    struct Socket {
        int fd;
        uint16_t port;
        std::thread rx_thread;
    };
    std::vector<std::unique_ptr<Socket>> sockets_;
    DatagramHandler sink_;
    std::atomic<uint64_t> matched_{0};
    std::atomic<uint64_t> unmatched_{0};
    std::atomic<bool> stopping_{false};
};

}  // namespace stamp

#endif  // STAMP_UDP_TRANSPORT_HPP_
