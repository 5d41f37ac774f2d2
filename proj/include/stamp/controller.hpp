#ifndef STAMP_CONTROLLER_HPP_
#define STAMP_CONTROLLER_HPP_

#include <functional>
#include <optional>
#include <set>
#include <vector>

#include "stamp/control_tcp.hpp"

namespace stamp {

// Session knobs for create_measured_path; anything not set here comes from
// the path and node configuration.
struct PathParams {
    std::optional<uint16_t> ssid;  // allocated when absent, never 0
    int64_t interval_ns = 10'000'000;
    AuthMode auth_mode = AuthMode::unauthenticated;
    TimestampFormat timestamp_format = TimestampFormat::ntp;
    DelayMode delay_mode = DelayMode::two_way;
    ReflectorMode reflector_mode = ReflectorMode::stateless;
    uint16_t sender_port = kDefaultStampPort;
    uint16_t reflector_port = kDefaultStampPort;
};

// Controller-side driver of the configuration sequence: initializes both
// nodes on demand, configures the reflector before the sender, rolls the
// reflector back when sender creation fails, and polls results.
class Controller {
public:
    Controller(ControlChannel& sender, ControlChannel& reflector,
               NodeGlobalConfig sender_global, NodeGlobalConfig reflector_global);

    Result<uint16_t> create_measured_path(const std::vector<Ipv6Addr>& direct_sids,
                                          const std::vector<Ipv6Addr>& return_sids,
                                          const PathParams& params);

    Status start_session(uint16_t ssid, std::optional<int64_t> duration_ns = std::nullopt);
    Status stop_session(uint16_t ssid);
    Status destroy_session(uint16_t ssid);  // both nodes
    Status reset_nodes();

    // One drain of the sender queue; loops over capped replies until the
    // `more` flag clears. Channel failures bump the gap counter.
    Result<std::vector<MeasurementRecord>> poll_once(uint16_t ssid);

    Result<uint64_t> processed_count(bool reflector_side, std::optional<uint16_t> ssid);

    uint64_t poll_gaps() const { return poll_gaps_; }

private:
    Status ensure_init();
    Result<uint16_t> allocate_ssid();

    ControlChannel& sender_;
    ControlChannel& reflector_;
    NodeGlobalConfig sender_global_;
    NodeGlobalConfig reflector_global_;
    bool sender_ready_ = false;
    bool reflector_ready_ = false;
    uint16_t next_ssid_ = 1;
    std::set<uint16_t> in_use_;
    uint64_t poll_gaps_ = 0;
};

}  // namespace stamp

#endif  // STAMP_CONTROLLER_HPP_
