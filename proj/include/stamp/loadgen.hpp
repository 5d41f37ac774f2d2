#ifndef STAMP_LOADGEN_HPP_
#define STAMP_LOADGEN_HPP_

#include <utility>
#include <vector>

#include "stamp/errors.hpp"
#include "stamp/session_types.hpp"

namespace stamp {

// Offered traffic: user data packets with STAMP test packets interleaved
// deterministically at the configured fraction.
struct TrafficMix {
    double stamp_fraction = 0.0;  // [0, 1]
    size_t data_payload_size = 64;
    double duration_s = 0.5;
};

// Error-diffusion interleave: packet i is STAMP iff the running fraction
// would otherwise fall behind. Exact to one packet per interleave period.
inline bool stamp_slot(uint64_t index, double fraction) {
    return static_cast<uint64_t>(static_cast<double>(index + 1) * fraction) >
           static_cast<uint64_t>(static_cast<double>(index) * fraction);
}

struct TrialCounts {
    uint64_t sent = 0;
    uint64_t sent_stamp = 0;
    uint64_t sent_data = 0;
    uint64_t data_echoed = 0;
    uint64_t stamp_returned = 0;   // reflector SUT
    uint64_t stamp_processed = 0;  // collector SUT (counter query) / synthetic
    uint64_t dropped_stamp = 0;
    uint64_t dropped_data = 0;

    uint64_t dropped() const { return dropped_stamp + dropped_data; }
    double drop_ratio() const {
        return sent == 0 ? 0.0 : static_cast<double>(dropped()) / static_cast<double>(sent);
    }
};

// System under test for one offered-load trial.
class TrialSut {
public:
    virtual ~TrialSut() = default;
    virtual Result<TrialCounts> run_trial(const TrafficMix& mix, double rate_pps,
                                          double duration_s) = 0;
};

// Analytic single-server SUT: processes up to `capacity_pps`, drops the
// rest. The oracle for the search tests: its drop curve is an exact step.
class SyntheticCapacitySut : public TrialSut {
public:
    explicit SyntheticCapacitySut(double capacity_pps, size_t queue_depth = 0)
        : capacity_pps_(capacity_pps), queue_depth_(queue_depth) {}
    Result<TrialCounts> run_trial(const TrafficMix& mix, double rate_pps,
                                  double duration_s) override;

private:
    double capacity_pps_;
    size_t queue_depth_;
};

enum class SutRole { reflector, collector };

// Real session engines behind a capacity-limited service stage on the
// deterministic simulator. Reflector trials count returned packets at the
// generator; collector trials query the processed-STAMP counter over the
// control channel after the transport goes idle.
class NodeSut : public TrialSut {
public:
    NodeSut(SutRole role, double capacity_pps, size_t queue_depth = 64, uint64_t seed = 0)
        : role_(role), capacity_pps_(capacity_pps), queue_depth_(queue_depth), seed_(seed) {}
    Result<TrialCounts> run_trial(const TrafficMix& mix, double rate_pps,
                                  double duration_s) override;

private:
    SutRole role_;
    double capacity_pps_;
    size_t queue_depth_;
    uint64_t seed_;
};

Result<double> run_trial(const TrafficMix& mix, TrialSut& sut, double rate_pps);

struct PdrConfig {
    double target_drop_ratio = 0.005;  // PDR@0.5%
    double rel_tolerance = 0.01;
    double min_rate_pps = 1.0;
    double max_rate_pps = 100'000.0;
    int trials_per_probe = 3;  // median of three
};

struct PdrResult {
    double pdr_rate_pps = 0.0;
    double drop_ratio_at_rate = 0.0;
    std::vector<std::pair<double, double>> trace;  // (rate, median drop ratio)
};

// Bisects [min_rate, max_rate] until the bracket width is within
// rel_tolerance of the upper end; returns the highest probed rate whose
// median drop ratio meets the target. A non-monotone trace is an error.
Result<PdrResult> pdr_search(const TrafficMix& mix, TrialSut& sut, const PdrConfig& cfg);

// Same-process throughput of the two engine hot paths, packets per second.
// Reflection does strictly more work per packet, so collector >= reflector
// is the expected ordering.
struct LocalBench {
    double collector_pps = 0.0;
    double reflector_pps = 0.0;
};
LocalBench run_local_bench(uint64_t packets = 200'000);

}  // namespace stamp

#endif  // STAMP_LOADGEN_HPP_
