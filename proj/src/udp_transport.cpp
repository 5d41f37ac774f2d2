#include "stamp/udp_transport.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cstring>

namespace stamp {

// ---------------------------------------------------------------------------
// ThreadScheduler

namespace {
int64_t steady_now_ns() {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}
}  // namespace

ThreadScheduler::ThreadScheduler() : worker_([this] { run(); }) {}

ThreadScheduler::~ThreadScheduler() {
    {
        std::lock_guard lock(mu_);
        stopping_ = true;
    }
    cv_.notify_all();
    worker_.join();
}

uint64_t ThreadScheduler::schedule_after(int64_t delay_ns, std::function<void()> fn) {
    std::lock_guard lock(mu_);
    uint64_t seq = next_seq_++;
    queue_.push(Entry{steady_now_ns() + std::max<int64_t>(delay_ns, 0), seq, std::move(fn)});
    cv_.notify_all();
    return seq;
}

void ThreadScheduler::cancel(uint64_t token) {
    std::lock_guard lock(mu_);
    cancelled_.insert(token);
}

void ThreadScheduler::run() {
    std::unique_lock lock(mu_);
    while (!stopping_) {
        if (queue_.empty()) {
            cv_.wait(lock);
            continue;
        }
        int64_t now = steady_now_ns();
        const Entry& top = queue_.top();
        if (top.deadline_ns > now) {
            cv_.wait_for(lock, std::chrono::nanoseconds(top.deadline_ns - now));
            continue;
        }
        Entry entry = queue_.top();
        queue_.pop();
        if (auto it = cancelled_.find(entry.seq); it != cancelled_.end()) {
            cancelled_.erase(it);
            continue;
        }
        lock.unlock();
        entry.fn();
        lock.lock();
    }
}

// ---------------------------------------------------------------------------
// UdpTransport

UdpTransport::UdpTransport(const Options& opts) : opts_(opts), clock_(opts.clock_offset_ns) {}

Result<std::unique_ptr<UdpTransport>> UdpTransport::create(const Options& opts) {
    std::unique_ptr<UdpTransport> t(new UdpTransport(opts));
    if (opts.raw_srh_mode) {
        int fd = ::socket(AF_INET6, SOCK_RAW, IPPROTO_RAW);
        if (fd < 0) {
            if (errno == EPERM || errno == EACCES)
                return Error{Errc::privilege_required,
                             "raw IPv6 transmission needs CAP_NET_RAW"};
            return Error{Errc::io_error, std::string("raw socket: ") + strerror(errno)};
        }
        t->raw_fd_ = fd;
    }
    return t;
}

UdpTransport::~UdpTransport() {
    stopping_ = true;
    unregister_filters();
    if (raw_fd_ >= 0) ::close(raw_fd_);
}

Status UdpTransport::register_filter(const FilterSpec& filter, DatagramHandler handler) {
    sockaddr_in6 addr{};
    addr.sin6_family = AF_INET6;
    addr.sin6_port = htons(filter.local_port);
    if (inet_pton(AF_INET6, opts_.bind_addr.c_str(), &addr.sin6_addr) != 1)
        return Error{Errc::invalid_config, "bad bind address: " + opts_.bind_addr};

    int fd = ::socket(AF_INET6, SOCK_DGRAM, 0);
    if (fd < 0) return Error{Errc::io_error, std::string("socket: ") + strerror(errno)};
    int one = 1;
    setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    setsockopt(fd, IPPROTO_IPV6, IPV6_RECVHOPLIMIT, &one, sizeof(one));
    setsockopt(fd, IPPROTO_IPV6, IPV6_RECVPKTINFO, &one, sizeof(one));
    if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
        ::close(fd);
        return Error{Errc::io_error, "bind port " + std::to_string(filter.local_port) + ": " +
                                         strerror(errno)};
    }

    std::lock_guard lock(mu_);
    auto sock = std::make_unique<Socket>();
    sock->fd = fd;
    sock->port = filter.local_port;
    sock->rx_thread = std::thread([this, fd, filter, handler] { rx_loop(fd, filter, handler); });
    sockets_.push_back(std::move(sock));
    return Status{};
}

void UdpTransport::unregister_filters() {
    std::vector<std::unique_ptr<Socket>> sockets;
    {
        std::lock_guard lock(mu_);
        sockets.swap(sockets_);
    }
    for (auto& sock : sockets) {
        ::shutdown(sock->fd, SHUT_RDWR);
        ::close(sock->fd);
        if (sock->rx_thread.joinable()) sock->rx_thread.join();
    }
}

void UdpTransport::set_default_sink(DatagramHandler sink) {
    std::lock_guard lock(mu_);
    sink_ = std::move(sink);
}

void UdpTransport::rx_loop(int fd, FilterSpec filter, DatagramHandler handler) {
    uint8_t buf[2048];
    uint8_t cmsg_buf[256];
    while (!stopping_) {
        sockaddr_in6 peer{};
        iovec iov{buf, sizeof(buf)};
        msghdr msg{};
        msg.msg_name = &peer;
        msg.msg_namelen = sizeof(peer);
        msg.msg_iov = &iov;
        msg.msg_iovlen = 1;
        msg.msg_control = cmsg_buf;
        msg.msg_controllen = sizeof(cmsg_buf);
        ssize_t n = ::recvmsg(fd, &msg, 0);
        if (n < 0) {
            if (errno == EINTR) continue;
            break;  // socket closed
        }
        if (n == 0) continue;

        int hop_limit = 64;
        Ipv6Addr local_dst{};
        for (cmsghdr* c = CMSG_FIRSTHDR(&msg); c; c = CMSG_NXTHDR(&msg, c)) {
            if (c->cmsg_level != IPPROTO_IPV6) continue;
            if (c->cmsg_type == IPV6_HOPLIMIT)
                memcpy(&hop_limit, CMSG_DATA(c), sizeof(int));
            if (c->cmsg_type == IPV6_PKTINFO) {
                in6_pktinfo info;
                memcpy(&info, CMSG_DATA(c), sizeof(info));
                memcpy(local_dst.octets.data(), &info.ipi6_addr, 16);
            }
        }
        Ipv6Addr src{};
        memcpy(src.octets.data(), &peer.sin6_addr, 16);

        Bytes wrapped = build_udp6(src, local_dst, ntohs(peer.sin6_port), filter.local_port,
                                   ByteView(buf, static_cast<size_t>(n)),
                                   static_cast<uint8_t>(hop_limit));
        if (filter.matches(wrapped)) {
            ++matched_;
            handler(wrapped);
        } else {
            ++unmatched_;
            DatagramHandler sink;
            {
                std::lock_guard lock(mu_);
                sink = sink_;
            }
            if (sink) sink(wrapped);
        }
    }
}

Status UdpTransport::send(ByteView datagram) {
    auto parsed_dst = peek_final_destination(datagram);
    auto dst_port = peek_udp_dst_port(datagram);
    if (!parsed_dst || !dst_port) return Error{Errc::unroutable, "unparseable datagram"};

    if (raw_fd_ >= 0) {
        // Verbatim IPv6+SRH; the kernel routes by the packet's own DA.
        sockaddr_in6 to{};
        to.sin6_family = AF_INET6;
        memcpy(&to.sin6_addr, datagram.data() + 24, 16);
        ssize_t n = ::sendto(raw_fd_, datagram.data(), datagram.size(), 0,
                             reinterpret_cast<sockaddr*>(&to), sizeof(to));
        if (n < 0) return Error{Errc::io_error, std::string("raw send: ") + strerror(errno)};
        return Status{};
    }

    // Plain mode: UDP payload only, from the socket bound to the source port.
    size_t udp_off = datagram.size();
    // The UDP header sits 8 + 44 bytes from the end of every test datagram.
    if (datagram.size() < kUdpHeaderSize + kTestPayloadSize)
        return Error{Errc::too_short, "not a test datagram"};
    udp_off = datagram.size() - kUdpHeaderSize - kTestPayloadSize;
    uint16_t src_port = get_u16(datagram, udp_off);
    uint8_t hop_limit = datagram[7];

    int fd = -1;
    {
        std::lock_guard lock(mu_);
        for (auto& sock : sockets_)
            if (sock->port == src_port) fd = sock->fd;
    }
    bool ephemeral = fd < 0;
    if (ephemeral) {
        fd = ::socket(AF_INET6, SOCK_DGRAM, 0);
        if (fd < 0) return Error{Errc::io_error, std::string("socket: ") + strerror(errno)};
    }
    int hops = hop_limit;
    setsockopt(fd, IPPROTO_IPV6, IPV6_UNICAST_HOPS, &hops, sizeof(hops));

    sockaddr_in6 to{};
    to.sin6_family = AF_INET6;
    to.sin6_port = htons(*dst_port);
    memcpy(&to.sin6_addr, parsed_dst->octets.data(), 16);
    ssize_t n = ::sendto(fd, datagram.data() + udp_off + kUdpHeaderSize, kTestPayloadSize, 0,
                         reinterpret_cast<sockaddr*>(&to), sizeof(to));
    int saved = errno;
    if (ephemeral) ::close(fd);
    if (n < 0) return Error{Errc::unroutable, std::string("sendto: ") + strerror(saved)};
    return Status{};
}

}  // namespace stamp
