#include "airnet/analytics.hpp"

#include "airnet/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>

namespace airnet::stats {

std::optional<SummaryStats> summarize(std::vector<double> values) {
    if (values.empty()) return std::nullopt;
    std::sort(values.begin(), values.end());
    SummaryStats s;
    s.n = values.size();
    s.min = values.front();
    s.max = values.back();
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / static_cast<double>(values.size());
    const std::size_t mid = values.size() / 2;
    s.median = values.size() % 2 == 1 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
    return s;
}

IoRatioSeries io_ratio(const TimeSeries& indoor, const TimeSeries& outdoor,
                       std::string location_id) {
    if (indoor.window_len != WindowLen::one_hour || outdoor.window_len != WindowLen::one_hour) {
        throw PreconditionError("io_ratio: both series must be hourly");
    }
    IoRatioSeries out;
    out.location_id = std::move(location_id);
    const AlignResult joined = align_pairs(indoor, outdoor);
    std::vector<double> ratios;
    for (const AlignedPair& p : joined.pairs) {
        if (p.b <= 0.0) {
            ++out.skipped_nonpositive_outdoor;
            continue;
        }
        out.points.push_back(IoRatioPoint{p.start, p.a / p.b});
        ratios.push_back(p.a / p.b);
    }
    out.summary = summarize(std::move(ratios));
    return out;
}

std::optional<double> pm_reduction(const TimeSeries& indoor, const TimeSeries& outdoor,
                                   EpochSeconds from, EpochSeconds to) {
    const std::optional<double> i = indoor.mean_of_valid(from, to);
    const std::optional<double> o = outdoor.mean_of_valid(from, to);
    if (!i || !o || *o <= 0.0) return std::nullopt;
    return (*o - *i) / *o * 100.0;
}

std::vector<NetworkPoint> network_average(std::span<const TimeSeries> series) {
    std::map<EpochSeconds, std::vector<double>> by_hour;
    for (const TimeSeries& s : series) {
        for (const Window& w : s.windows) {
            if (w.valid) by_hour[w.start].push_back(w.mean_pm25);
        }
    }
    std::vector<NetworkPoint> out;
    out.reserve(by_hour.size());
    for (const auto& [start, values] : by_hour) {
        NetworkPoint p;
        p.start = start;
        p.n_sensors = static_cast<int>(values.size());
        double sum = 0.0;
        for (double v : values) sum += v;
        p.mean = sum / static_cast<double>(values.size());
        if (values.size() >= 2) {
            double ss = 0.0;
            for (double v : values) ss += (v - p.mean) * (v - p.mean);
            p.sigma = std::sqrt(ss / static_cast<double>(values.size() - 1));
        }
        out.push_back(p);
    }
    return out;
}

std::optional<double> correlation(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    if (n != y.size() || n < 3) return std::nullopt;
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
    return sxy / std::sqrt(sxx * syy);
}

std::optional<double> correlation(const TimeSeries& a, const TimeSeries& b) {
    const AlignResult joined = align_pairs(a, b);
    std::vector<double> x, y;
    x.reserve(joined.pairs.size());
    y.reserve(joined.pairs.size());
    for (const AlignedPair& p : joined.pairs) {
        x.push_back(p.a);
        y.push_back(p.b);
    }
    return correlation(x, y);
}

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Midranks of |d|, doubled so ties land on integers.
std::vector<std::int64_t> doubled_midranks(const std::vector<double>& abs_d) {
    const std::size_t n = abs_d.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return abs_d[a] < abs_d[b]; });
    std::vector<std::int64_t> rank2(n, 0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && abs_d[order[j + 1]] == abs_d[order[i]]) ++j;
        // midrank of positions i..j (1-based) doubled: (i+1 + j+1)
        const std::int64_t r2 = static_cast<std::int64_t>(i + j + 2);
        for (std::size_t k = i; k <= j; ++k) rank2[order[k]] = r2;
        i = j + 1;
    }
    return rank2;
}

} // namespace

WilcoxonResult wilcoxon_signed_rank_diffs(std::span<const double> d, std::size_t exact_cutoff) {
    WilcoxonResult res;
    std::vector<double> abs_d;
    std::vector<bool> positive;
    for (double v : d) {
        if (v == 0.0) continue; // zero differences carry no sign information
        abs_d.push_back(std::abs(v));
        positive.push_back(v > 0.0);
    }
    res.n_nonzero = abs_d.size();
    if (res.n_nonzero == 0) {
        res.degenerate = true;
        res.p_value = 1.0;
        return res;
    }

    const std::vector<std::int64_t> rank2 = doubled_midranks(abs_d);
    std::int64_t w2_plus = 0, total2 = 0;
    for (std::size_t i = 0; i < rank2.size(); ++i) {
        total2 += rank2[i];
        if (positive[i]) w2_plus += rank2[i];
    }
    const std::int64_t w2_minus = total2 - w2_plus;
    res.w_plus = static_cast<double>(w2_plus) / 2.0;
    res.w_minus = static_cast<double>(w2_minus) / 2.0;
    res.statistic = std::min(res.w_plus, res.w_minus);

    const std::size_t n = res.n_nonzero;
    if (n <= exact_cutoff) {
        res.method = WilcoxonMethod::exact;
        // Distribution of the doubled rank sum under random signs, by
        // subset-sum counting. Counts fit in 64 bits for n <= 63.
        std::vector<std::uint64_t> ways(static_cast<std::size_t>(total2) + 1, 0);
        ways[0] = 1;
        for (std::int64_t r2 : rank2) {
            for (std::int64_t s = total2; s >= r2; --s) {
                ways[static_cast<std::size_t>(s)] += ways[static_cast<std::size_t>(s - r2)];
            }
        }
        const std::int64_t w2_min = std::min(w2_plus, w2_minus);
        const std::int64_t w2_max = total2 - w2_min;
        std::uint64_t count_low = 0, count_high = 0;
        for (std::int64_t s = 0; s <= total2; ++s) {
            if (s <= w2_min) count_low += ways[static_cast<std::size_t>(s)];
            if (s >= w2_max) count_high += ways[static_cast<std::size_t>(s)];
        }
        const double denom = std::ldexp(1.0, static_cast<int>(n)); // 2^n
        res.p_value = std::min(1.0, (static_cast<double>(count_low) + static_cast<double>(count_high)) / denom);
    } else {
        res.method = WilcoxonMethod::normal_approx;
        // E[W+] = sum(r)/2; Var(W+) = sum(r^2)/4 (midranks make this the
        // tie-corrected variance).
        const double mu = static_cast<double>(total2) / 4.0; // total2/2 halved ranks
        double var = 0.0;
        for (std::int64_t r2 : rank2) {
            const double r = static_cast<double>(r2) / 2.0;
            var += r * r;
        }
        var /= 4.0;
        const double w = res.statistic;
        const double z = (w - mu + 0.5) / std::sqrt(var); // continuity-corrected, w <= mu
        res.p_value = std::min(1.0, 2.0 * normal_cdf(z));
    }
    return res;
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y,
                                    std::size_t exact_cutoff) {
    if (x.size() != y.size()) {
        throw PreconditionError("wilcoxon_signed_rank: paired inputs differ in length");
    }
    std::vector<double> d(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) d[i] = x[i] - y[i];
    return wilcoxon_signed_rank_diffs(d, exact_cutoff);
}

SiteRow site_summary_row(const std::string& location_id, const TimeSeries& indoor_hourly,
                         const TimeSeries& outdoor_hourly, EpochSeconds from, EpochSeconds to) {
    SiteRow row;
    row.location_id = location_id;
    row.indoor_mean = indoor_hourly.mean_of_valid(from, to);
    row.indoor_max = indoor_hourly.max_of_valid(from, to);
    row.outdoor_mean = outdoor_hourly.mean_of_valid(from, to);
    row.outdoor_max = outdoor_hourly.max_of_valid(from, to);

    // I/O over the paired intersection restricted to the study window.
    IoRatioSeries io = io_ratio(indoor_hourly, outdoor_hourly, location_id);
    std::vector<double> ratios;
    for (const IoRatioPoint& p : io.points) {
        if (p.start >= from && p.start < to) ratios.push_back(p.ratio);
    }
    row.io = summarize(std::move(ratios));

    if (row.indoor_mean && row.outdoor_mean && *row.outdoor_mean > 0.0) {
        row.reduction_pct = (*row.outdoor_mean - *row.indoor_mean) / *row.outdoor_mean * 100.0;
    }
    return row;
}

} // namespace airnet::stats
