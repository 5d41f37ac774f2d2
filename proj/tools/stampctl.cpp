// stampctl: controller-side command line for the STAMP session API.
//
//   stampctl create  --sids fc00::2 --return-sids fc00::1 [--ssid N] ...
//   stampctl start   --ssid N [--duration-ms D]
//   stampctl stop    --ssid N
//   stampctl destroy --ssid N
//   stampctl results --ssid N [--follow --period-ms P] [--csv out.csv]
//   stampctl counter --ssid N [--reflector]
//   stampctl reset
//
// stdout carries data only; diagnostics go to stderr.

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <thread>

#include "CLI11.hpp"
#include "cli_util.hpp"
#include "stamp/analytics.hpp"
#include "stamp/controller.hpp"

using namespace stamp;

namespace {

std::atomic<bool> g_stop{false};
void handle_signal(int) { g_stop = true; }

struct Endpoints {
    std::string sender_host = "::1";
    uint16_t sender_port = kDefaultControlPort;
    std::string reflector_host = "::1";
    uint16_t reflector_port = kDefaultControlPort + 1;
};

std::vector<Ipv6Addr> parse_sids(const std::vector<std::string>& raw, const char* flag,
                                 bool& ok) {
    std::vector<Ipv6Addr> out;
    for (const auto& s : raw) {
        auto a = Ipv6Addr::parse(s);
        if (!a) {
            std::fprintf(stderr, "error: %s: bad IPv6 address '%s'\n", flag, s.c_str());
            ok = false;
            return out;
        }
        out.push_back(*a);
    }
    ok = true;
    return out;
}

void print_records(const std::vector<MeasurementRecord>& records, WelfordState& welford,
                   uint64_t& index) {
    for (const auto& rec : records) {
        DelaySample s = compute_delays(rec);
        s.sample_index = index++;
        welford = welford_update(welford, s);
        std::printf("%8llu  ssid=%u seq=%u  d_d=%.3f ms  d_r=%.3f ms  avg_d=%.3f ms  avg_r=%.3f ms%s\n",
                    static_cast<unsigned long long>(s.sample_index), rec.ssid, rec.sender_seq,
                    s.d_d_ns / 1e6, s.d_r_ns / 1e6, welford.avg_d_ns / 1e6, welford.avg_r_ns / 1e6,
                    s.negative ? "  [negative: check clock sync]" : "");
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"STAMP measurement controller"};
    app.require_subcommand(1);
    Endpoints ep;
    app.add_option("--sender-host", ep.sender_host, "sender control host");
    app.add_option("--sender-ctl-port", ep.sender_port, "sender control port");
    app.add_option("--reflector-host", ep.reflector_host, "reflector control host");
    app.add_option("--reflector-ctl-port", ep.reflector_port, "reflector control port");

    // create
    auto* create = app.add_subcommand("create", "create a measured path on both nodes");
    std::vector<std::string> sids_raw, return_sids_raw;
    int64_t ssid_flag = -1;
    int64_t interval_ms = 10;
    std::string delay_mode_s = "two-way", reflector_mode_s = "stateless";
    int stamp_sender_port = kDefaultStampPort, stamp_reflector_port = kDefaultStampPort;
    std::string src_s, reflector_ip_s;
    create->add_option("--sids", sids_raw, "direct-path SID list")->required();
    create->add_option("--return-sids", return_sids_raw, "return-path SID list")->required();
    create->add_option("--ssid", ssid_flag, "session id (allocated when absent)");
    create->add_option("--interval-ms", interval_ms, "probe interval");
    create->add_option("--delay-mode", delay_mode_s, "one-way | two-way");
    create->add_option("--reflector-mode", reflector_mode_s, "stateless | stateful");
    create->add_option("--sender-stamp-port", stamp_sender_port, "sender STAMP UDP port");
    create->add_option("--reflector-stamp-port", stamp_reflector_port, "reflector STAMP UDP port");
    create->add_option("--src", src_s, "sender source IPv6 (defaults to sender host)")->required();
    create->add_option("--reflector-ip", reflector_ip_s, "reflector IPv6")->required();

    // start/stop/destroy/results/counter
    auto* start = app.add_subcommand("start", "start a session on both nodes");
    auto* stop = app.add_subcommand("stop", "stop a session on both nodes");
    auto* destroy = app.add_subcommand("destroy", "destroy a session on both nodes");
    auto* results = app.add_subcommand("results", "fetch measurement results");
    auto* counter = app.add_subcommand("counter", "query the processed-STAMP counter");
    auto* reset = app.add_subcommand("reset", "reset both nodes");
    (void)reset;
    int64_t ssid_arg = 0;
    int64_t duration_ms = 0;
    bool follow = false;
    int64_t period_ms = 1000;
    std::string csv_path, json_path;
    bool counter_reflector = false;
    for (CLI::App* sub : {start, stop, destroy, results, counter})
        sub->add_option("--ssid", ssid_arg, "session id")->required();
    start->add_option("--duration-ms", duration_ms, "stop transmitting after this long");
    results->add_flag("--follow", follow, "poll repeatedly");
    results->add_option("--period-ms", period_ms, "poll period with --follow");
    results->add_option("--csv", csv_path, "append rows to a CSV file");
    results->add_option("--json", json_path, "write the series as JSON on exit");
    counter->add_flag("--reflector", counter_reflector, "query the reflector instead");

    CLI11_PARSE(app, argc, argv);

    auto sender_chan = TcpControlChannel::connect(ep.sender_host, ep.sender_port);
    if (!sender_chan) return cli::fail(cli::kConnectError, sender_chan.error());
    auto reflector_chan = TcpControlChannel::connect(ep.reflector_host, ep.reflector_port);
    if (!reflector_chan) return cli::fail(cli::kConnectError, reflector_chan.error());

    if (create->parsed()) {
        if (ssid_flag == 0) return cli::fail(cli::kValidationError, "--ssid: must be nonzero");
        if (ssid_flag > 65535) return cli::fail(cli::kValidationError, "--ssid: exceeds 16 bits");
        bool ok = false;
        auto sids = parse_sids(sids_raw, "--sids", ok);
        if (!ok) return cli::kValidationError;
        auto return_sids = parse_sids(return_sids_raw, "--return-sids", ok);
        if (!ok) return cli::kValidationError;
        auto src = Ipv6Addr::parse(src_s);
        auto reflector_ip = Ipv6Addr::parse(reflector_ip_s);
        if (!src || !reflector_ip)
            return cli::fail(cli::kValidationError, "--src/--reflector-ip: bad IPv6 address");
        auto dm = delay_mode_from_string(delay_mode_s);
        auto rm = reflector_mode_from_string(reflector_mode_s);
        if (!dm || !rm)
            return cli::fail(cli::kValidationError, "--delay-mode/--reflector-mode: unknown value");

        Controller controller(
            *sender_chan.value(), *reflector_chan.value(),
            NodeGlobalConfig{static_cast<uint16_t>(stamp_sender_port), "", *src},
            NodeGlobalConfig{static_cast<uint16_t>(stamp_reflector_port), "", *reflector_ip});
        PathParams params;
        if (ssid_flag > 0) params.ssid = static_cast<uint16_t>(ssid_flag);
        params.interval_ns = interval_ms * 1'000'000;
        params.delay_mode = *dm;
        params.reflector_mode = *rm;
        params.sender_port = static_cast<uint16_t>(stamp_sender_port);
        params.reflector_port = static_cast<uint16_t>(stamp_reflector_port);
        auto ssid = controller.create_measured_path(sids, return_sids, params);
        if (!ssid) return cli::fail_remote(ssid.error());
        std::printf("%u\n", ssid.value());
        return cli::kOk;
    }

    // The remaining commands need no node-global knowledge.
    Controller controller(*sender_chan.value(), *reflector_chan.value(), NodeGlobalConfig{},
                          NodeGlobalConfig{});
    uint16_t ssid = static_cast<uint16_t>(ssid_arg);

    if (start->parsed()) {
        std::optional<int64_t> duration;
        if (duration_ms > 0) duration = duration_ms * 1'000'000;
        if (auto st = controller.start_session(ssid, duration); !st)
            return cli::fail_remote(st.error());
        return cli::kOk;
    }
    if (stop->parsed()) {
        if (auto st = controller.stop_session(ssid); !st) return cli::fail_remote(st.error());
        return cli::kOk;
    }
    if (destroy->parsed()) {
        if (auto st = controller.destroy_session(ssid); !st) return cli::fail_remote(st.error());
        return cli::kOk;
    }
    if (counter->parsed()) {
        auto count = controller.processed_count(counter_reflector, ssid);
        if (!count) return cli::fail_remote(count.error());
        std::printf("%llu\n", static_cast<unsigned long long>(count.value()));
        return cli::kOk;
    }
    if (app.get_subcommand("reset")->parsed()) {
        if (auto st = controller.reset_nodes(); !st) return cli::fail_remote(st.error());
        return cli::kOk;
    }

    // results
    std::signal(SIGINT, handle_signal);
    DelaySeries series;
    WelfordState welford;
    uint64_t index = 0;
    int64_t backoff_ms = period_ms;
    size_t rows_written = 0;
    for (;;) {
        auto batch = controller.poll_once(ssid);
        if (!batch) {
            if (!follow) return cli::fail_remote(batch.error());
            std::fprintf(stderr, "poll failed (%s), retrying; gaps=%llu\n",
                         errc_name(batch.error().code),
                         static_cast<unsigned long long>(controller.poll_gaps()));
            backoff_ms = std::min<int64_t>(backoff_ms * 2, 30'000);
        } else {
            backoff_ms = period_ms;
            print_records(batch.value(), welford, index);
            for (const auto& rec : batch.value()) series.add(rec);
            // Rewrite the CSV after each batch so a long --follow run
            // persists what it has seen so far.
            if (!csv_path.empty() && series.size() > rows_written) {
                if (auto st = export_series(series, ExportFormat::csv, csv_path); !st)
                    return cli::fail(cli::kIoError, st.error());
                rows_written = series.size();
            }
        }
        if (!follow || g_stop) break;
        std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
        if (g_stop) break;
    }
    if (!json_path.empty() && !series.empty()) {
        if (auto st = export_series(series, ExportFormat::json, json_path); !st)
            return cli::fail(cli::kIoError, st.error());
    }
    return cli::kOk;
}
