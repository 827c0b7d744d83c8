#pragma once

#include "airnet/nmea.hpp"
#include "airnet/time.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace airnet {

enum class LocationClass { indoor, outdoor, personal, reference };

std::string_view to_string(LocationClass c);
std::optional<LocationClass> location_class_from_string(std::string_view s);

struct EnvReadings {
    std::optional<double> temperature_c;
    std::optional<double> rh_pct;
    std::optional<double> pressure_hpa;
};

// One timestamped PM2.5 observation. The pm25 field carries the sensor's
// "atmospheric" scaling, which everything downstream consumes.
struct Sample {
    EpochSeconds timestamp = 0;
    std::string node_id;
    LocationClass location_class = LocationClass::indoor;
    double pm25 = 0.0;
    std::optional<double> pm25_std;
    std::optional<nmea::GpsFix> gps;
    EnvReadings env;
};

enum class WindowLen { raw, ten_min, one_hour, one_day };

std::int64_t window_seconds(WindowLen len); // raw -> 0
std::string_view to_string(WindowLen len);

struct Window {
    EpochSeconds start = 0;
    double mean_pm25 = 0.0;
    double coverage = 1.0;
    std::int64_t n_samples = 1;
    bool valid = true;
};

// Aggregated (or raw) per-node series. Windows are sorted, non-overlapping
// and aligned to window_len boundaries; sample_period_s is the cadence of
// the underlying raw stream and drives coverage accounting.
struct TimeSeries {
    std::string node_id;
    WindowLen window_len = WindowLen::raw;
    std::int64_t sample_period_s = 10;
    std::vector<Window> windows;

    std::size_t valid_count() const;
    std::optional<double> mean_of_valid(EpochSeconds from, EpochSeconds to) const;
    std::optional<double> max_of_valid(EpochSeconds from, EpochSeconds to) const;
};

struct AggregateOptions {
    double min_coverage = 0.75;
    // clock jitter can push one extra sample into a window
    double coverage_tolerance = 0.05;
};

// Raw series from samples; sorts by (timestamp, pm25) so equal inputs in any
// order produce identical series.
TimeSeries make_raw_series(std::string node_id, std::span<const Sample> samples,
                           std::int64_t sample_period_s = 10);

// Block-average into target windows. Windows below min_coverage are emitted
// flagged invalid and excluded from downstream statistics. Re-aggregating an
// aggregated series weights each input window by its sample count, so raw ->
// 1h -> 24h conserves the underlying sum. Empty input gives empty output.
TimeSeries aggregate(const TimeSeries& input, WindowLen target, const AggregateOptions& opts = {});

struct AlignedPair {
    EpochSeconds start = 0;
    double a = 0.0;
    double b = 0.0;
};

struct AlignResult {
    std::vector<AlignedPair> pairs;
    std::size_t dropped_a = 0; // valid windows of a with no partner in b
    std::size_t dropped_b = 0;
};

// Inner join of the valid windows on window_start. Throws PreconditionError
// if the window lengths differ.
AlignResult align_pairs(const TimeSeries& a, const TimeSeries& b);

// Per-hour mean across reference monitors; hours with fewer than
// min_monitors reporters are flagged invalid. Throws on an empty list.
TimeSeries reference_mean(std::span<const TimeSeries> monitors, int min_monitors = 1);

} // namespace airnet
