#ifndef STAMP_CONTROL_TCP_HPP_
#define STAMP_CONTROL_TCP_HPP_

#include <atomic>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "stamp/control.hpp"

namespace stamp {

inline constexpr uint16_t kDefaultControlPort = 50052;

// Client side of one control conversation. Implementations guarantee one
// reply per request, in order.
class ControlChannel {
public:
    virtual ~ControlChannel() = default;
    virtual Result<ControlReply> call(const ControlRequest& req) = 0;
};

// Drives a ControlTarget in-process, still going through the byte-level
// schema so the wire encoding is exercised everywhere.
class LocalControlChannel : public ControlChannel {
public:
    explicit LocalControlChannel(ControlTarget& target) : target_(target) {}
    Result<ControlReply> call(const ControlRequest& req) override;

private:
    ControlTarget& target_;
    uint64_t next_id_ = 1;
};

// Length-prefixed frames over TCP. One thread per accepted connection;
// requests on a connection are served strictly in order.
class TcpControlServer {
public:
    explicit TcpControlServer(ControlTarget& target) : target_(target) {}
    ~TcpControlServer();

    Status listen(const std::string& bind_addr, uint16_t port);
    uint16_t port() const { return port_; }
    void stop();

private:
    void accept_loop();
    void serve_connection(int fd);

    ControlTarget& target_;
    std::atomic<bool> running_{false};
    int listen_fd_ = -1;
    uint16_t port_ = 0;
    std::thread accept_thread_;
    std::mutex workers_mu_;
    std::vector<std::thread> workers_;
    std::vector<int> conn_fds_;
};

class TcpControlChannel : public ControlChannel {
public:
    static Result<std::unique_ptr<TcpControlChannel>> connect(const std::string& host,
                                                              uint16_t port,
                                                              int timeout_ms = 5000);
    ~TcpControlChannel();
    Result<ControlReply> call(const ControlRequest& req) override;

private:
    TcpControlChannel(int fd) : fd_(fd) {}
    int fd_;
    uint64_t next_id_ = 1;
    FrameReader reader_;
    std::mutex mu_;
};

}  // namespace stamp

#endif  // STAMP_CONTROL_TCP_HPP_
