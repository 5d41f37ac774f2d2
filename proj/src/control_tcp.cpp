#include "stamp/control_tcp.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>

namespace stamp {

Result<ControlReply> LocalControlChannel::call(const ControlRequest& req) {
    ControlRequest stamped = req;
    stamped.id = next_id_++;
    Bytes wire = encode_request(stamped);
    Bytes reply_bytes = handle_control_frame(target_, wire);
    auto reply = decode_reply(reply_bytes);
    if (!reply) return reply.error();
    if (reply.value().id != stamped.id)
        return Error{Errc::io_error, "reply id does not match request"};
    return reply;
}

// ---------------------------------------------------------------------------
// TcpControlServer

TcpControlServer::~TcpControlServer() { stop(); }

Status TcpControlServer::listen(const std::string& bind_addr, uint16_t port) {
    sockaddr_in6 addr{};
    addr.sin6_family = AF_INET6;
    addr.sin6_port = htons(port);
    if (inet_pton(AF_INET6, bind_addr.c_str(), &addr.sin6_addr) != 1)
        return Error{Errc::invalid_config, "bad bind address: " + bind_addr};

    int fd = ::socket(AF_INET6, SOCK_STREAM, 0);
    if (fd < 0) return Error{Errc::io_error, std::string("socket: ") + strerror(errno)};
    int one = 1;
    setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
        ::close(fd);
        return Error{Errc::io_error, std::string("bind: ") + strerror(errno)};
    }
    if (::listen(fd, 16) < 0) {
        ::close(fd);
        return Error{Errc::io_error, std::string("listen: ") + strerror(errno)};
    }
    socklen_t len = sizeof(addr);
    getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin6_port);

    listen_fd_ = fd;
    running_ = true;
    accept_thread_ = std::thread([this] { accept_loop(); });
    return Status{};
}

void TcpControlServer::stop() {
    if (!running_.exchange(false)) return;
    ::shutdown(listen_fd_, SHUT_RDWR);
    ::close(listen_fd_);
    if (accept_thread_.joinable()) accept_thread_.join();
    std::vector<std::thread> workers;
    {
        std::lock_guard lock(workers_mu_);
        workers.swap(workers_);
        for (int fd : conn_fds_) ::shutdown(fd, SHUT_RDWR);  // unblock recv
        conn_fds_.clear();
    }
    for (auto& w : workers)
        if (w.joinable()) w.join();
}

void TcpControlServer::accept_loop() {
    while (running_) {
        int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) {
            if (!running_) break;
            continue;
        }
        std::lock_guard lock(workers_mu_);
        if (!running_) {
            ::close(fd);
            break;
        }
        conn_fds_.push_back(fd);
        workers_.emplace_back([this, fd] { serve_connection(fd); });
    }
}

void TcpControlServer::serve_connection(int fd) {
    FrameReader reader;
    uint8_t buf[4096];
    while (running_) {
        ssize_t n = ::recv(fd, buf, sizeof(buf), 0);
        if (n <= 0) break;
        reader.feed(ByteView(buf, static_cast<size_t>(n)));
        for (;;) {
            auto frame = reader.next();
            if (!frame) {  // oversized or corrupt framing: drop the connection
                ::close(fd);
                return;
            }
            if (!frame.value()) break;
            Bytes reply = handle_control_frame(target_, *frame.value());
            Bytes out;
            append_frame(out, reply);
            size_t sent = 0;
            while (sent < out.size()) {
                ssize_t w = ::send(fd, out.data() + sent, out.size() - sent, MSG_NOSIGNAL);
                if (w <= 0) {
                    ::close(fd);
                    return;
                }
                sent += static_cast<size_t>(w);
            }
        }
    }
    ::close(fd);
}

// ---------------------------------------------------------------------------
// TcpControlChannel

Result<std::unique_ptr<TcpControlChannel>> TcpControlChannel::connect(const std::string& host,
                                                                      uint16_t port,
                                                                      int timeout_ms) {
    sockaddr_in6 addr{};
    addr.sin6_family = AF_INET6;
    addr.sin6_port = htons(port);
    if (inet_pton(AF_INET6, host.c_str(), &addr.sin6_addr) != 1)
        return Error{Errc::unreachable, "bad control host: " + host};

    int fd = ::socket(AF_INET6, SOCK_STREAM, 0);
    if (fd < 0) return Error{Errc::io_error, std::string("socket: ") + strerror(errno)};
    timeval tv{timeout_ms / 1000, (timeout_ms % 1000) * 1000};
    setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
    setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof(tv));
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
        ::close(fd);
        return Error{Errc::unreachable,
                     "connect " + host + ":" + std::to_string(port) + ": " + strerror(errno)};
    }
    return std::unique_ptr<TcpControlChannel>(new TcpControlChannel(fd));
}

TcpControlChannel::~TcpControlChannel() {
    if (fd_ >= 0) ::close(fd_);
}

Result<ControlReply> TcpControlChannel::call(const ControlRequest& req) {
    std::lock_guard lock(mu_);
    ControlRequest stamped = req;
    stamped.id = next_id_++;
    Bytes out;
    append_frame(out, encode_request(stamped));
    size_t sent = 0;
    while (sent < out.size()) {
        ssize_t w = ::send(fd_, out.data() + sent, out.size() - sent, MSG_NOSIGNAL);
        if (w <= 0) return Error{Errc::unreachable, "control connection lost on send"};
        sent += static_cast<size_t>(w);
    }
    uint8_t buf[4096];
    for (;;) {
        auto frame = reader_.next();
        if (!frame) return frame.error();
        if (frame.value()) {
            auto reply = decode_reply(*frame.value());
            if (!reply) return reply.error();
            if (reply.value().id != stamped.id)
                return Error{Errc::io_error, "reply id does not match request"};
            return reply;
        }
        ssize_t n = ::recv(fd_, buf, sizeof(buf), 0);
        if (n <= 0) return Error{Errc::unreachable, "control connection lost on recv"};
        reader_.feed(ByteView(buf, static_cast<size_t>(n)));
    }
}

}  // namespace stamp
