#include "airnet/csv.hpp"

#include "airnet/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>

namespace airnet::csv {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == ',') {
            fields.emplace_back(line.substr(start, i - start));
            start = i + 1;
        }
    }
    if (!fields.empty() && !fields.back().empty() && fields.back().back() == '\r') {
        fields.back().pop_back();
    }
    return fields;
}

namespace {

double parse_double(const std::string& field, const std::string& context) {
    double v;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc{} || ptr != field.data() + field.size()) {
        throw InputFormatError(context + ": bad number '" + field + "'");
    }
    return v;
}

std::string row_context(const std::filesystem::path& path, std::size_t row) {
    return path.string() + ":" + std::to_string(row);
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary); // '\n' endings on every platform
    if (!out) throw InputFormatError("cannot open for writing: " + path.string());
    return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputFormatError("cannot open: " + path.string());
    return in;
}

} // namespace

void write_samples(const std::filesystem::path& path, std::span<const Sample> samples) {
    std::ofstream out = open_out(path);
    out << "timestamp_utc,node_id,location_class,pm25_atm,pm25_std,lat,lon,gps_valid,temp_c,rh_pct\n";
    for (const Sample& s : samples) {
        out << format_iso8601(s.timestamp) << ',' << s.node_id << ','
            << to_string(s.location_class) << ',' << fmt_double(s.pm25) << ',';
        if (s.pm25_std) out << fmt_double(*s.pm25_std);
        out << ',';
        if (s.gps) {
            out << fmt_double(s.gps->latitude) << ',' << fmt_double(s.gps->longitude) << ','
                << (s.gps->valid ? '1' : '0');
        } else {
            out << ",,";
        }
        out << ',';
        if (s.env.temperature_c) out << fmt_double(*s.env.temperature_c);
        out << ',';
        if (s.env.rh_pct) out << fmt_double(*s.env.rh_pct);
        out << '\n';
    }
}

std::vector<Sample> read_samples(const std::filesystem::path& path) {
    std::ifstream in = open_in(path);
    std::vector<Sample> samples;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        if (row == 1 && line.rfind("timestamp_utc", 0) == 0) continue;
        const auto f = split_line(line);
        if (f.size() != 10) {
            throw InputFormatError(row_context(path, row) + ": expected 10 columns, got " +
                                   std::to_string(f.size()));
        }
        Sample s;
        try {
            s.timestamp = parse_iso8601(f[0]);
        } catch (const InputFormatError& e) {
            throw InputFormatError(row_context(path, row) + ": " + e.what());
        }
        s.node_id = f[1];
        if (s.node_id.empty()) throw InputFormatError(row_context(path, row) + ": empty node_id");
        const auto cls = location_class_from_string(f[2]);
        if (!cls) throw InputFormatError(row_context(path, row) + ": bad location_class '" + f[2] + "'");
        s.location_class = *cls;
        s.pm25 = parse_double(f[3], row_context(path, row));
        if (s.pm25 < 0.0) throw InputFormatError(row_context(path, row) + ": negative pm25");
        if (!f[4].empty()) s.pm25_std = parse_double(f[4], row_context(path, row));
        if (!f[5].empty() || !f[6].empty() || !f[7].empty()) {
            nmea::GpsFix fix;
            fix.timestamp = s.timestamp;
            fix.latitude = parse_double(f[5], row_context(path, row));
            fix.longitude = parse_double(f[6], row_context(path, row));
            fix.valid = f[7] == "1";
            if (fix.latitude < -90.0 || fix.latitude > 90.0 || fix.longitude < -180.0 ||
                fix.longitude > 180.0) {
                throw InputFormatError(row_context(path, row) + ": coordinate out of range");
            }
            s.gps = fix;
        }
        if (!f[8].empty()) s.env.temperature_c = parse_double(f[8], row_context(path, row));
        if (!f[9].empty()) s.env.rh_pct = parse_double(f[9], row_context(path, row));
        samples.push_back(std::move(s));
    }
    return samples;
}

void write_reference(const std::filesystem::path& path, std::span<const ReferenceRow> rows) {
    std::ofstream out = open_out(path);
    out << "timestamp_utc,monitor_id,pm25\n";
    for (const ReferenceRow& r : rows) {
        out << format_iso8601(r.timestamp) << ',' << r.monitor_id << ',' << fmt_double(r.pm25)
            << '\n';
    }
}

std::vector<ReferenceRow> read_reference(const std::filesystem::path& path) {
    std::ifstream in = open_in(path);
    std::vector<ReferenceRow> rows;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        if (row == 1 && line.rfind("timestamp_utc", 0) == 0) continue;
        const auto f = split_line(line);
        if (f.size() != 3) {
            throw InputFormatError(row_context(path, row) + ": expected 3 columns, got " +
                                   std::to_string(f.size()));
        }
        ReferenceRow r;
        try {
            r.timestamp = parse_iso8601(f[0]);
        } catch (const InputFormatError& e) {
            throw InputFormatError(row_context(path, row) + ": " + e.what());
        }
        r.monitor_id = f[1];
        if (r.monitor_id.empty()) throw InputFormatError(row_context(path, row) + ": empty monitor_id");
        r.pm25 = parse_double(f[2], row_context(path, row));
        rows.push_back(std::move(r));
    }
    return rows;
}

std::vector<TimeSeries> reference_series(std::span<const ReferenceRow> rows) {
    std::map<std::string, std::vector<Window>> by_monitor;
    for (const ReferenceRow& r : rows) {
        by_monitor[r.monitor_id].push_back(Window{r.timestamp / 3600 * 3600, r.pm25, 1.0, 1, true});
    }
    std::vector<TimeSeries> out;
    for (auto& [id, windows] : by_monitor) {
        TimeSeries s;
        s.node_id = id;
        s.window_len = WindowLen::one_hour;
        s.sample_period_s = 3600;
        std::sort(windows.begin(), windows.end(),
                  [](const Window& a, const Window& b) { return a.start < b.start; });
        s.windows = std::move(windows);
        out.push_back(std::move(s));
    }
    return out;
}

} // namespace airnet::csv
