#pragma once

#include "airnet/timeseries.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace airnet::csv {

// Compact, round-trip-stable double formatting shared by every writer.
std::string fmt_double(double v);

std::vector<std::string> split_line(const std::string& line);

// Sample schema:
//   timestamp_utc,node_id,location_class,pm25_atm,pm25_std,lat,lon,gps_valid,temp_c,rh_pct
// ISO-8601 timestamps, empty cells for absent optionals.
void write_samples(const std::filesystem::path& path, std::span<const Sample> samples);
std::vector<Sample> read_samples(const std::filesystem::path& path);

// Reference-monitor schema: timestamp_utc,monitor_id,pm25 (hourly stamps).
struct ReferenceRow {
    EpochSeconds timestamp = 0;
    std::string monitor_id;
    double pm25 = 0.0;
};
void write_reference(const std::filesystem::path& path, std::span<const ReferenceRow> rows);
std::vector<ReferenceRow> read_reference(const std::filesystem::path& path);

// Hourly series per monitor, ordered by monitor id.
std::vector<TimeSeries> reference_series(std::span<const ReferenceRow> rows);

} // namespace airnet::csv
