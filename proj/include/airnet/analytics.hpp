#pragma once

#include "airnet/timeseries.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace airnet::stats {

struct SummaryStats {
    double min = 0.0;
    double median = 0.0;
    double mean = 0.0;
    double max = 0.0;
    std::size_t n = 0;
};

// min/median/mean/max of a value set; median of an even count is the mean of
// the two central values.
std::optional<SummaryStats> summarize(std::vector<double> values);

struct IoRatioPoint {
    EpochSeconds start = 0;
    double ratio = 0.0;
};

struct IoRatioSeries {
    std::string location_id;
    std::vector<IoRatioPoint> points; // hourly, aligned intersection only
    std::optional<SummaryStats> summary;
    std::size_t skipped_nonpositive_outdoor = 0;
};

// Hourly indoor/outdoor ratio over the aligned valid intersection. Hours
// whose outdoor mean is <= 0 are skipped and counted.
IoRatioSeries io_ratio(const TimeSeries& indoor, const TimeSeries& outdoor,
                       std::string location_id = {});

// (O - I) / O * 100 with O and I averaged over each series' own valid
// windows inside [from, to). Absent when O <= 0 or either side is empty.
std::optional<double> pm_reduction(const TimeSeries& indoor, const TimeSeries& outdoor,
                                   EpochSeconds from, EpochSeconds to);

struct NetworkPoint {
    EpochSeconds start = 0;
    double mean = 0.0;
    std::optional<double> sigma; // sample SD; absent with a single reporter
    int n_sensors = 0;
};

// Per-hour cross-sensor mean and n-1 standard deviation over the sensors
// reporting that hour.
std::vector<NetworkPoint> network_average(std::span<const TimeSeries> series);

// Pearson r over the aligned valid intersection; absent for n < 3 or a
// constant input.
std::optional<double> correlation(const TimeSeries& a, const TimeSeries& b);
std::optional<double> correlation(std::span<const double> x, std::span<const double> y);

enum class WilcoxonMethod { exact, normal_approx };

struct WilcoxonResult {
    std::size_t n_nonzero = 0; // pairs with a nonzero difference
    double w_plus = 0.0;
    double w_minus = 0.0;
    double statistic = 0.0; // min(w_plus, w_minus)
    double p_value = 1.0;   // two-sided
    WilcoxonMethod method = WilcoxonMethod::exact;
    bool degenerate = false; // all differences zero
};

// Paired signed-rank test. Zero differences are dropped, |d| ties take
// midranks, and the two-sided p is exact (full sign enumeration over the
// rank-sum distribution) for n_nonzero <= exact_cutoff, else a normal
// approximation with tie-corrected variance and continuity correction.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y,
                                    std::size_t exact_cutoff = 20);
WilcoxonResult wilcoxon_signed_rank_diffs(std::span<const double> d,
                                          std::size_t exact_cutoff = 20);

struct SiteRow {
    std::string location_id;
    std::optional<double> indoor_mean, indoor_max;
    std::optional<double> outdoor_mean, outdoor_max;
    std::optional<SummaryStats> io; // paired-intersection summary
    std::optional<double> reduction_pct;
};

// One summary row per site: per-stream means and maxima over each stream's
// own valid hourly windows, the I/O summary over the paired intersection,
// and the reduction derived from the row's own means.
SiteRow site_summary_row(const std::string& location_id, const TimeSeries& indoor_hourly,
                         const TimeSeries& outdoor_hourly, EpochSeconds from, EpochSeconds to);

} // namespace airnet::stats
