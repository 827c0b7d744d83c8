#pragma once

#include "airnet/nmea.hpp"
#include "airnet/time.hpp"
#include "airnet/timeseries.hpp"

#include <array>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace airnet::exposure {

enum class Microenv { home, office, other };

inline constexpr std::array<Microenv, 3> kMicroenvs = {Microenv::home, Microenv::office,
                                                       Microenv::other};

std::string_view to_string(Microenv m);
std::optional<Microenv> microenv_from_string(std::string_view s);

// Circular buffer zone around a known location, sized to absorb GPS drift.
struct Geofence {
    Microenv label = Microenv::home; // home or office; "other" is the complement
    double latitude = 0.0;
    double longitude = 0.0;
    double radius_m = 10.0;
};

// Great-circle distance on a sphere of mean radius 6371.0088 km.
double haversine_m(double lat1, double lon1, double lat2, double lon2);

// Label for one fix: inside a fence iff distance <= radius (closed boundary),
// overlaps resolved home > office, outside every fence -> other. Invalid
// fixes are unclassifiable (nullopt) and excluded by callers with a counter.
std::optional<Microenv> classify_fix(const nmea::GpsFix& fix, std::span<const Geofence> fences);

// One 10-minute personal window: PM mean plus the fixes that fell inside it.
struct PersonalWindow {
    EpochSeconds start = 0;
    double pm25 = 0.0;
    double coverage = 0.0;
    bool valid = false;
    std::vector<nmea::GpsFix> fixes;
};

std::vector<PersonalWindow> build_personal_windows(std::span<const Sample> raw,
                                                   std::int64_t sample_period_s,
                                                   double min_coverage);

struct LabeledWindow {
    EpochSeconds start = 0;
    double pm25 = 0.0;
    bool valid = false;
    std::optional<Microenv> label; // nullopt = unclassified
};

struct LabelOptions {
    // Indoor GPS dropout is expected; carry the previous label across short
    // gaps only.
    std::int64_t carry_forward_limit_s = 1800;
};

struct LabeledSeries {
    std::vector<LabeledWindow> windows;
    std::size_t unclassified = 0;
    std::size_t invalid_fixes = 0;
    std::size_t carried_forward = 0;
};

// Majority label of each window's valid fixes (ties break home > office >
// other); fix-less windows inherit the previous fix-derived label within the
// carry-forward limit, else stay unclassified.
LabeledSeries label_series(std::span<const PersonalWindow> windows,
                           std::span<const Geofence> fences, const LabelOptions& opts = {});

struct EnvAttribution {
    double c_mean = 0.0;    // mean PM2.5 over windows labeled with this env
    double f_fraction = 0.0; // share of the day's classified windows
    double ac = 0.0;         // attributable exposure
    std::size_t windows = 0;
};

// Per-day attributable exposure: AC_k = C_k * F_k / sum_k F_k, summed into
// the day total. Days with zero classified windows yield no attribution.
struct DailyAttribution {
    CivilDate day;
    std::array<EnvAttribution, 3> env; // indexed by Microenv order
    double total = 0.0;
    std::size_t classified_windows = 0;
    std::size_t unclassified_windows = 0;
};

std::optional<DailyAttribution> attribute_daily(std::span<const LabeledWindow> windows,
                                                CivilDate day, int utc_offset_minutes);

// All local days touched by the series, in order; days without attribution
// are omitted.
std::vector<DailyAttribution> attribute_all_days(std::span<const LabeledWindow> windows,
                                                 int utc_offset_minutes);

struct ShareResult {
    double exposure_pct = 0.0; // share of total attributable exposure
    double time_pct = 0.0;     // share of classified time
};

std::optional<ShareResult> exposure_share(std::span<const DailyAttribution> days,
                                          std::span<const Microenv> labels);

} // namespace airnet::exposure
