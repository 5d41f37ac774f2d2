#ifndef STAMP_SCENARIO_HPP_
#define STAMP_SCENARIO_HPP_

#include <string>

#include "stamp/analytics.hpp"
#include "stamp/controller.hpp"
#include "stamp/sim_network.hpp"

namespace stamp {

// A desk-scale measurement scenario: two nodes, one bidirectional link pair,
// one session. JSON schema in docs/scenario-format.md.
struct Scenario {
    uint64_t seed = 0;
    uint32_t probes = 100;
    int64_t interval_ns = 10'000'000;

    Ipv6Addr sender_addr;
    Ipv6Addr reflector_addr;
    int64_t sender_clock_offset_ns = 0;
    int64_t reflector_clock_offset_ns = 0;

    LinkModel direct_link{DelaySpec::constant(5'000'000)};
    LinkModel return_link{DelaySpec::constant(7'000'000)};

    std::vector<Ipv6Addr> direct_sids;  // defaults to [reflector_addr]
    std::vector<Ipv6Addr> return_sids;  // defaults to [sender_addr]

    PathParams params;
};

Result<Scenario> parse_scenario(const std::string& json_text);
Result<Scenario> load_scenario(const std::string& path);

struct SimReport {
    uint16_t ssid = 0;
    uint64_t probes_sent = 0;
    uint64_t records = 0;
    uint64_t losses = 0;
    uint64_t events = 0;
    uint64_t reflector_processed = 0;
    int64_t simulated_ns = 0;
    DelaySeries series;
};

// Runs sender, reflector and controller entirely in simulated time: the
// full control sequence, `probes` transmissions, one drain poll.
Result<SimReport> run_scenario(const Scenario& sc);

}  // namespace stamp

#endif  // STAMP_SCENARIO_HPP_
