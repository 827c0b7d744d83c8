#include "airnet/exposure.hpp"

#include "airnet/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

namespace airnet::exposure {

std::string_view to_string(Microenv m) {
    switch (m) {
        case Microenv::home: return "home";
        case Microenv::office: return "office";
        case Microenv::other: return "other";
    }
    return "unknown";
}

std::optional<Microenv> microenv_from_string(std::string_view s) {
    if (s == "home") return Microenv::home;
    if (s == "office") return Microenv::office;
    if (s == "other") return Microenv::other;
    return std::nullopt;
}

namespace {

constexpr double kEarthRadiusM = 6371008.8;

double to_rad(double deg) { return deg * std::numbers::pi / 180.0; }

} // namespace

double haversine_m(double lat1, double lon1, double lat2, double lon2) {
    const double phi1 = to_rad(lat1);
    const double phi2 = to_rad(lat2);
    const double dphi = to_rad(lat2 - lat1);
    const double dlam = to_rad(lon2 - lon1);
    const double sp = std::sin(dphi / 2.0);
    const double sl = std::sin(dlam / 2.0);
    double a = sp * sp + std::cos(phi1) * std::cos(phi2) * sl * sl;
    a = std::clamp(a, 0.0, 1.0);
    return kEarthRadiusM * 2.0 * std::atan2(std::sqrt(a), std::sqrt(1.0 - a));
}

std::optional<Microenv> classify_fix(const nmea::GpsFix& fix, std::span<const Geofence> fences) {
    if (!fix.valid) return std::nullopt;
    bool in_home = false, in_office = false;
    for (const Geofence& f : fences) {
        const double d = haversine_m(fix.latitude, fix.longitude, f.latitude, f.longitude);
        if (d <= f.radius_m) {
            if (f.label == Microenv::home) in_home = true;
            if (f.label == Microenv::office) in_office = true;
        }
    }
    // Priority by label, never by fence list position.
    if (in_home) return Microenv::home;
    if (in_office) return Microenv::office;
    return Microenv::other;
}

std::vector<PersonalWindow> build_personal_windows(std::span<const Sample> raw,
                                                   std::int64_t sample_period_s,
                                                   double min_coverage) {
    struct Acc {
        PersonalWindow w;
        double sum = 0.0;
        std::int64_t n = 0;
    };
    std::map<EpochSeconds, Acc> by_window;
    for (const Sample& s : raw) {
        EpochSeconds start = s.timestamp / 600 * 600;
        if (s.timestamp < 0 && s.timestamp % 600 != 0) start -= 600;
        Acc& acc = by_window[start];
        acc.w.start = start;
        acc.sum += s.pm25;
        acc.n += 1;
        if (s.gps) acc.w.fixes.push_back(*s.gps);
    }
    std::vector<PersonalWindow> out;
    out.reserve(by_window.size());
    const double expected = 600.0 / static_cast<double>(sample_period_s);
    for (auto& [start, acc] : by_window) {
        acc.w.pm25 = acc.sum / static_cast<double>(acc.n);
        acc.w.coverage = static_cast<double>(acc.n) / expected;
        acc.w.valid = acc.w.coverage >= min_coverage;
        out.push_back(std::move(acc.w));
    }
    return out;
}

LabeledSeries label_series(std::span<const PersonalWindow> windows,
                           std::span<const Geofence> fences, const LabelOptions& opts) {
    LabeledSeries out;
    out.windows.resize(windows.size());
    std::vector<std::size_t> invalid_counts(windows.size(), 0);

    // Fix classification is independent per window; carry-forward is the
    // only sequential part and runs after.
    parallel_for(static_cast<std::int64_t>(windows.size()), [&](std::int64_t i) {
        const PersonalWindow& w = windows[static_cast<std::size_t>(i)];
        LabeledWindow lw;
        lw.start = w.start;
        lw.pm25 = w.pm25;
        lw.valid = w.valid;
        std::array<std::size_t, 3> votes{};
        for (const nmea::GpsFix& fix : w.fixes) {
            const std::optional<Microenv> label = classify_fix(fix, fences);
            if (!label) {
                ++invalid_counts[static_cast<std::size_t>(i)];
                continue;
            }
            ++votes[static_cast<std::size_t>(*label)];
        }
        const std::size_t most = std::max({votes[0], votes[1], votes[2]});
        if (most > 0) {
            // ties break home > office > other, matching fence priority
            for (std::size_t k = 0; k < votes.size(); ++k) {
                if (votes[k] == most) {
                    lw.label = static_cast<Microenv>(k);
                    break;
                }
            }
        }
        out.windows[static_cast<std::size_t>(i)] = std::move(lw);
    });

    std::optional<Microenv> last_label;
    EpochSeconds last_label_start = 0;
    for (LabeledWindow& lw : out.windows) {
        if (lw.label) {
            last_label = lw.label;
            last_label_start = lw.start;
            continue;
        }
        if (last_label && lw.start - last_label_start <= opts.carry_forward_limit_s) {
            lw.label = last_label;
            ++out.carried_forward;
        } else {
            ++out.unclassified;
        }
    }
    for (std::size_t c : invalid_counts) out.invalid_fixes += c;
    return out;
}

std::optional<DailyAttribution> attribute_daily(std::span<const LabeledWindow> windows,
                                                CivilDate day, int utc_offset_minutes) {
    DailyAttribution att;
    att.day = day;
    std::array<double, 3> sums{};
    std::array<std::size_t, 3> counts{};
    for (const LabeledWindow& w : windows) {
        if (local_date(w.start, utc_offset_minutes) != day) continue;
        if (!w.valid) continue;
        if (!w.label) {
            ++att.unclassified_windows;
            continue;
        }
        const std::size_t k = static_cast<std::size_t>(*w.label);
        sums[k] += w.pm25;
        ++counts[k];
        ++att.classified_windows;
    }
    if (att.classified_windows == 0) return std::nullopt;

    double f_total = 0.0;
    for (std::size_t k = 0; k < 3; ++k) {
        EnvAttribution& e = att.env[k];
        e.windows = counts[k];
        e.f_fraction = static_cast<double>(counts[k]) / static_cast<double>(att.classified_windows);
        e.c_mean = counts[k] > 0 ? sums[k] / static_cast<double>(counts[k]) : 0.0;
        f_total += e.f_fraction;
    }
    for (std::size_t k = 0; k < 3; ++k) {
        EnvAttribution& e = att.env[k];
        e.ac = f_total > 0.0 ? e.c_mean * e.f_fraction / f_total : 0.0;
        att.total += e.ac;
    }
    return att;
}

std::vector<DailyAttribution> attribute_all_days(std::span<const LabeledWindow> windows,
                                                 int utc_offset_minutes) {
    std::vector<CivilDate> days;
    for (const LabeledWindow& w : windows) {
        const CivilDate d = local_date(w.start, utc_offset_minutes);
        if (days.empty() || !(days.back() == d)) days.push_back(d);
    }
    std::sort(days.begin(), days.end());
    days.erase(std::unique(days.begin(), days.end()), days.end());

    std::vector<DailyAttribution> out;
    for (CivilDate d : days) {
        if (auto att = attribute_daily(windows, d, utc_offset_minutes)) out.push_back(*att);
    }
    return out;
}

std::optional<ShareResult> exposure_share(std::span<const DailyAttribution> days,
                                          std::span<const Microenv> labels) {
    if (days.empty()) return std::nullopt;
    double exposure_sel = 0.0, exposure_total = 0.0;
    double windows_sel = 0.0, windows_total = 0.0;
    for (const DailyAttribution& d : days) {
        exposure_total += d.total;
        windows_total += static_cast<double>(d.classified_windows);
        for (Microenv m : labels) {
            const EnvAttribution& e = d.env[static_cast<std::size_t>(m)];
            exposure_sel += e.ac;
            windows_sel += static_cast<double>(e.windows);
        }
    }
    if (exposure_total <= 0.0 || windows_total <= 0.0) return std::nullopt;
    return ShareResult{exposure_sel / exposure_total * 100.0, windows_sel / windows_total * 100.0};
}

} // namespace airnet::exposure
