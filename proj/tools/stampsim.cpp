// stampsim: end-to-end STAMP measurement in simulated time.
//
//   stampsim run scenario.json [--csv out.csv] [--json out.json]
//
// Prints configured vs. measured per-direction delay; exact for constant
// links with synchronized clocks.

#include <cstdio>

#include "CLI11.hpp"
#include "cli_util.hpp"
#include "stamp/scenario.hpp"

using namespace stamp;

namespace {

void print_delay_spec(const char* label, const LinkModel& link) {
    if (link.delay.is_uniform)
        std::printf("%s: uniform %.3f..%.3f ms", label, link.delay.min_ns / 1e6,
                    link.delay.max_ns / 1e6);
    else
        std::printf("%s: %.3f ms", label, link.delay.constant_ns / 1e6);
    if (link.loss_prob > 0) std::printf(" loss=%.1f%%", 100 * link.loss_prob);
    std::printf("\n");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"STAMP simulation runner"};
    app.require_subcommand(1);
    auto* run = app.add_subcommand("run", "run a scenario");
    std::string scenario_path, csv_path, json_path;
    int64_t seed_flag = -1;
    int64_t probes_flag = -1;
    run->add_option("scenario", scenario_path, "scenario file (JSON)")->required();
    run->add_option("--csv", csv_path, "export the series as CSV");
    run->add_option("--json", json_path, "export the series as JSON");
    run->add_option("--seed", seed_flag, "override the scenario seed");
    run->add_option("--probes", probes_flag, "override the probe count");
    CLI11_PARSE(app, argc, argv);

    auto scenario = load_scenario(scenario_path);
    if (!scenario) return cli::fail(cli::kUsageError, scenario.error());
    if (seed_flag >= 0) scenario.value().seed = static_cast<uint64_t>(seed_flag);
    if (probes_flag > 0) scenario.value().probes = static_cast<uint32_t>(probes_flag);

    auto report = run_scenario(scenario.value());
    if (!report) return cli::fail(cli::kRemoteError, report.error());
    const SimReport& r = report.value();
    const Scenario& sc = scenario.value();

    std::printf("scenario: %s\n", scenario_path.c_str());
    std::printf("ssid %u, %u probes at %.3f ms interval, seed %llu\n", r.ssid, sc.probes,
                sc.interval_ns / 1e6, static_cast<unsigned long long>(sc.seed));
    print_delay_spec("configured direct", sc.direct_link);
    print_delay_spec("configured return", sc.return_link);
    if (sc.reflector_clock_offset_ns != 0)
        std::printf("reflector clock offset: %+.3f ms\n", sc.reflector_clock_offset_ns / 1e6);

    std::printf("sent %llu, records %llu, lost %llu, reflector processed %llu\n",
                static_cast<unsigned long long>(r.probes_sent),
                static_cast<unsigned long long>(r.records),
                static_cast<unsigned long long>(r.losses),
                static_cast<unsigned long long>(r.reflector_processed));
    if (r.records > 0) {
        std::printf("measured avg d_d: %.6f ms\n", r.series.welford().avg_d_ns / 1e6);
        std::printf("measured avg d_r: %.6f ms\n", r.series.welford().avg_r_ns / 1e6);
        if (sc.params.delay_mode == DelayMode::two_way)
            std::printf("measured avg two-way: %.6f ms\n",
                        (r.series.welford().avg_d_ns + r.series.welford().avg_r_ns) / 1e6);
    }
    std::printf("simulated time: %.3f s, %llu events\n", r.simulated_ns / 1e9,
                static_cast<unsigned long long>(r.events));

    if (!csv_path.empty() && !r.series.empty()) {
        if (auto st = export_series(r.series, ExportFormat::csv, csv_path); !st)
            return cli::fail(cli::kIoError, st.error());
        std::fprintf(stderr, "series written to %s\n", csv_path.c_str());
    }
    if (!json_path.empty() && !r.series.empty()) {
        if (auto st = export_series(r.series, ExportFormat::json, json_path); !st)
            return cli::fail(cli::kIoError, st.error());
    }
    return cli::kOk;
}
