// stampload: throughput benchmarking against reflector/collector engines.
//
//   stampload run experiment.json [--csv out.csv]
//   stampload bench [--packets N]
//
// Experiments run in simulated time; `bench` measures the same-process
// hot-path packet rate of both engine roles.

#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "cli_util.hpp"
#include "json.hpp"
#include "stamp/loadgen.hpp"

using namespace stamp;

namespace {

struct Experiment {
    std::string sut = "synthetic";  // synthetic | reflector | collector
    double capacity_pps = 10'000;
    size_t queue_depth = 64;
    uint64_t seed = 0;
    TrafficMix mix;
    std::string mode = "pdr";  // pdr | trial
    std::vector<double> rates;
    PdrConfig pdr;
};

Result<Experiment> load_experiment(const std::string& path) {
    std::ifstream in(path);
    if (!in) return Error{Errc::io_error, "cannot open " + path};
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        nlohmann::json j = nlohmann::json::parse(buf.str());
        Experiment e;
        e.sut = j.value("sut", e.sut);
        if (e.sut != "synthetic" && e.sut != "reflector" && e.sut != "collector")
            return Error{Errc::invalid_config, "sut: synthetic | reflector | collector"};
        e.capacity_pps = j.value("capacity_pps", e.capacity_pps);
        e.queue_depth = j.value("queue_depth", e.queue_depth);
        e.seed = j.value("seed", 0ULL);
        e.mix.stamp_fraction = j.value("stamp_fraction", 0.0);
        if (e.mix.stamp_fraction < 0 || e.mix.stamp_fraction > 1)
            return Error{Errc::invalid_config, "stamp_fraction: must be within [0, 1]"};
        e.mix.data_payload_size = j.value("data_payload_size", size_t{64});
        e.mix.duration_s = j.value("trial_duration_s", 0.5);
        e.mode = j.value("mode", e.mode);
        if (j.contains("rates")) e.rates = j.at("rates").get<std::vector<double>>();
        if (j.contains("pdr")) {
            const auto& p = j.at("pdr");
            e.pdr.target_drop_ratio = p.value("target_drop_ratio", 0.005);
            e.pdr.rel_tolerance = p.value("rel_tolerance", 0.01);
            e.pdr.min_rate_pps = p.value("min_rate_pps", 1.0);
            e.pdr.max_rate_pps = p.value("max_rate_pps", 100'000.0);
            e.pdr.trials_per_probe = p.value("trials_per_probe", 3);
        }
        return e;
    } catch (const std::exception& e) {
        return Error{Errc::parse_error, std::string("experiment: ") + e.what()};
    }
}

std::unique_ptr<TrialSut> make_sut(const Experiment& e) {
    if (e.sut == "synthetic")
        return std::make_unique<SyntheticCapacitySut>(e.capacity_pps);
    SutRole role = e.sut == "reflector" ? SutRole::reflector : SutRole::collector;
    return std::make_unique<NodeSut>(role, e.capacity_pps, e.queue_depth, e.seed);
}

void write_trace_csv(std::FILE* out, const std::vector<std::pair<double, double>>& trace) {
    std::fprintf(out, "rate_pps,drop_ratio\n");
    for (const auto& [rate, drop] : trace) std::fprintf(out, "%.3f,%.6f\n", rate, drop);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"STAMP load generator"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "run an experiment spec");
    std::string experiment_path, csv_path;
    run->add_option("experiment", experiment_path, "experiment file (JSON)")->required();
    run->add_option("--csv", csv_path, "write the (rate, drop) trace as CSV");

    auto* bench = app.add_subcommand("bench", "same-process engine throughput");
    uint64_t bench_packets = 200'000;
    bench->add_option("--packets", bench_packets, "packets per role");

    CLI11_PARSE(app, argc, argv);

    if (bench->parsed()) {
        LocalBench b = run_local_bench(bench_packets);
        std::printf("collector_pps,%.0f\n", b.collector_pps);
        std::printf("reflector_pps,%.0f\n", b.reflector_pps);
        std::fprintf(stderr, "collector/reflector ratio: %.2f\n",
                     b.collector_pps / b.reflector_pps);
        return cli::kOk;
    }

    auto experiment = load_experiment(experiment_path);
    if (!experiment) return cli::fail(cli::kUsageError, experiment.error());
    Experiment& e = experiment.value();
    auto sut = make_sut(e);

    if (e.mode == "trial") {
        if (e.rates.empty())
            return cli::fail(cli::kUsageError, "trial mode needs a 'rates' list");
        std::printf("rate_pps,drop_ratio,sent,stamp_processed,data_echoed\n");
        for (double rate : e.rates) {
            auto counts = sut->run_trial(e.mix, rate, e.mix.duration_s);
            if (!counts) return cli::fail(cli::kRemoteError, counts.error());
            const TrialCounts& c = counts.value();
            std::printf("%.3f,%.6f,%llu,%llu,%llu\n", rate, c.drop_ratio(),
                        static_cast<unsigned long long>(c.sent),
                        static_cast<unsigned long long>(c.stamp_processed + c.stamp_returned),
                        static_cast<unsigned long long>(c.data_echoed));
        }
        return cli::kOk;
    }

    auto result = pdr_search(e.mix, *sut, e.pdr);
    if (!result) return cli::fail(cli::kRemoteError, result.error());
    std::printf("pdr_rate_pps,%.3f\n", result.value().pdr_rate_pps);
    std::printf("drop_ratio_at_rate,%.6f\n", result.value().drop_ratio_at_rate);
    std::fprintf(stderr, "%zu probes\n", result.value().trace.size());
    if (!csv_path.empty()) {
        std::FILE* out = std::fopen(csv_path.c_str(), "w");
        if (!out) return cli::fail(cli::kIoError, "cannot open CSV output");
        write_trace_csv(out, result.value().trace);
        std::fclose(out);
    }
    return cli::kOk;
}
