#ifndef STAMP_ANALYTICS_HPP_
#define STAMP_ANALYTICS_HPP_

#include <iosfwd>
#include <string>
#include <vector>

#include "stamp/session_types.hpp"

namespace stamp {

// Direct and return path delays of one measurement record, in integer
// nanoseconds. Negative values are kept and flagged: they are what a
// violated clock-sync assumption looks like.
struct DelaySample {
    uint64_t sample_index = 0;
    int64_t wall_time_ns = 0;
    int64_t d_d_ns = 0;  // T2 - T1
    int64_t d_r_ns = 0;  // T4 - T3
    bool negative = false;

    bool operator==(const DelaySample&) const = default;
};

DelaySample compute_delays(const MeasurementRecord& r);

// Running averages of both directions, updated one sample at a time:
// avg += (new - avg) / N with N counting this sample.
struct WelfordState {
    uint64_t n = 0;
    double avg_d_ns = 0.0;
    double avg_r_ns = 0.0;
};

WelfordState welford_update(WelfordState w, const DelaySample& s);

enum class ExportFormat { csv, json };

// Sample log plus per-row running averages, as exported to operators.
class DelaySeries {
public:
    struct Row {
        DelaySample sample;
        double avg_d_ns = 0.0;
        double avg_r_ns = 0.0;

        bool operator==(const Row&) const = default;
    };

    explicit DelaySeries(DelayMode mode = DelayMode::two_way) : mode_(mode) {}

    void add(const MeasurementRecord& rec);
    void add_row(Row row) { rows_.push_back(std::move(row)); }  // import path

    DelayMode mode() const { return mode_; }
    bool empty() const { return rows_.empty(); }
    size_t size() const { return rows_.size(); }
    const std::vector<Row>& rows() const { return rows_; }
    const WelfordState& welford() const { return welford_; }

private:
    DelayMode mode_;
    std::vector<Row> rows_;
    WelfordState welford_;
};

// Columns: sample_index, wall_time_ns, d_d_ns, d_r_ns, avg_d_ns, avg_r_ns,
// plus d_two_way_ns when the series is two-way. JSON mirrors the CSV fields.
// Formats are pinned in docs/results-format.md.
Status export_series(const DelaySeries& series, ExportFormat format, std::ostream& out);
Status export_series(const DelaySeries& series, ExportFormat format, const std::string& path);
Result<DelaySeries> import_series(ExportFormat format, const std::string& path);

}  // namespace stamp

#endif  // STAMP_ANALYTICS_HPP_
