#include "stamp/analytics.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace stamp {

DelaySample compute_delays(const MeasurementRecord& r) {
    DelaySample s;
    s.wall_time_ns = r.received_at_ns;
    s.d_d_ns = ntp_diff_ns(r.t2, r.t1);
    s.d_r_ns = ntp_diff_ns(r.t4, r.t3);
    s.negative = s.d_d_ns < 0 || s.d_r_ns < 0;
    return s;
}

WelfordState welford_update(WelfordState w, const DelaySample& s) {
    w.n += 1;
    w.avg_d_ns += (static_cast<double>(s.d_d_ns) - w.avg_d_ns) / static_cast<double>(w.n);
    w.avg_r_ns += (static_cast<double>(s.d_r_ns) - w.avg_r_ns) / static_cast<double>(w.n);
    return w;
}

void DelaySeries::add(const MeasurementRecord& rec) {
    DelaySample s = compute_delays(rec);
    s.sample_index = rows_.size();
    welford_ = welford_update(welford_, s);
    rows_.push_back(Row{s, welford_.avg_d_ns, welford_.avg_r_ns});
}

namespace {

// %.17g keeps doubles bit-exact across export/import.
std::string fmt_double(double v) {
    char buf[40];
    snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

Status export_csv(const DelaySeries& series, std::ostream& out) {
    bool two_way = series.mode() == DelayMode::two_way;
    out << "sample_index,wall_time_ns,d_d_ns,d_r_ns,avg_d_ns,avg_r_ns";
    if (two_way) out << ",d_two_way_ns";
    out << "\n";
    for (const auto& row : series.rows()) {
        out << row.sample.sample_index << ',' << row.sample.wall_time_ns << ','
            << row.sample.d_d_ns << ',' << row.sample.d_r_ns << ',' << fmt_double(row.avg_d_ns)
            << ',' << fmt_double(row.avg_r_ns);
        if (two_way) out << ',' << (row.sample.d_d_ns + row.sample.d_r_ns);
        out << "\n";
    }
    if (!out) return Error{Errc::io_error, "write failed"};
    return Status{};
}

Status export_json(const DelaySeries& series, std::ostream& out) {
    nlohmann::ordered_json j;
    j["delay_mode"] = series.mode() == DelayMode::two_way ? "two-way" : "one-way";
    auto rows = nlohmann::ordered_json::array();
    for (const auto& row : series.rows()) {
        nlohmann::ordered_json r;
        r["sample_index"] = row.sample.sample_index;
        r["wall_time_ns"] = row.sample.wall_time_ns;
        r["d_d_ns"] = row.sample.d_d_ns;
        r["d_r_ns"] = row.sample.d_r_ns;
        r["avg_d_ns"] = row.avg_d_ns;
        r["avg_r_ns"] = row.avg_r_ns;
        if (series.mode() == DelayMode::two_way)
            r["d_two_way_ns"] = row.sample.d_d_ns + row.sample.d_r_ns;
        rows.push_back(std::move(r));
    }
    j["rows"] = std::move(rows);
    out << j.dump(2) << "\n";
    if (!out) return Error{Errc::io_error, "write failed"};
    return Status{};
}

Result<DelaySeries> import_csv(std::istream& in) {
    std::string header;
    if (!std::getline(in, header)) return Error{Errc::parse_error, "missing CSV header"};
    bool two_way = header.find("d_two_way_ns") != std::string::npos;
    DelaySeries series(two_way ? DelayMode::two_way : DelayMode::one_way);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        DelaySeries::Row row;
        double avg_d = 0, avg_r = 0;
        long long two = 0;
        int matched =
            sscanf(line.c_str(), "%" SCNu64 ",%" SCNd64 ",%" SCNd64 ",%" SCNd64 ",%lf,%lf,%lld",
                   &row.sample.sample_index, &row.sample.wall_time_ns, &row.sample.d_d_ns,
                   &row.sample.d_r_ns, &avg_d, &avg_r, &two);
        if (matched < (two_way ? 7 : 6)) return Error{Errc::parse_error, "bad CSV row: " + line};
        row.avg_d_ns = avg_d;
        row.avg_r_ns = avg_r;
        row.sample.negative = row.sample.d_d_ns < 0 || row.sample.d_r_ns < 0;
        series.add_row(row);
    }
    return series;
}

Result<DelaySeries> import_json(std::istream& in) {
    try {
        nlohmann::json j = nlohmann::json::parse(in);
        bool two_way = j.at("delay_mode").get<std::string>() == "two-way";
        DelaySeries series(two_way ? DelayMode::two_way : DelayMode::one_way);
        for (const auto& r : j.at("rows")) {
            DelaySeries::Row row;
            row.sample.sample_index = r.at("sample_index").get<uint64_t>();
            row.sample.wall_time_ns = r.at("wall_time_ns").get<int64_t>();
            row.sample.d_d_ns = r.at("d_d_ns").get<int64_t>();
            row.sample.d_r_ns = r.at("d_r_ns").get<int64_t>();
            row.avg_d_ns = r.at("avg_d_ns").get<double>();
            row.avg_r_ns = r.at("avg_r_ns").get<double>();
            row.sample.negative = row.sample.d_d_ns < 0 || row.sample.d_r_ns < 0;
            series.add_row(row);
        }
        return series;
    } catch (const std::exception& e) {
        return Error{Errc::parse_error, e.what()};
    }
}

}  // namespace

Status export_series(const DelaySeries& series, ExportFormat format, std::ostream& out) {
    if (series.empty()) return Error{Errc::empty_series, "no samples to export"};
    return format == ExportFormat::csv ? export_csv(series, out) : export_json(series, out);
}

Status export_series(const DelaySeries& series, ExportFormat format, const std::string& path) {
    if (series.empty()) return Error{Errc::empty_series, "no samples to export"};
    std::ofstream out(path);
    if (!out) return Error{Errc::io_error, "cannot open " + path};
    return export_series(series, format, out);
}

Result<DelaySeries> import_series(ExportFormat format, const std::string& path) {
    std::ifstream in(path);
    if (!in) return Error{Errc::io_error, "cannot open " + path};
    return format == ExportFormat::csv ? import_csv(in) : import_json(in);
}

}  // namespace stamp
