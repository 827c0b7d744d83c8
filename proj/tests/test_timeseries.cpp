#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "airnet/errors.hpp"
#include "airnet/rng.hpp"
#include "airnet/timeseries.hpp"

#include <algorithm>
#include <numeric>

using namespace airnet;

namespace {

Sample sample_at(EpochSeconds t, double pm25) {
    Sample s;
    s.timestamp = t;
    s.node_id = "N";
    s.pm25 = pm25;
    return s;
}

TimeSeries hourly_of(std::vector<Window> windows) {
    TimeSeries s;
    s.node_id = "N";
    s.window_len = WindowLen::one_hour;
    s.sample_period_s = 3600;
    s.windows = std::move(windows);
    return s;
}

constexpr EpochSeconds kT0 = 1599696000; // 2020-09-10T00:00:00Z

} // namespace

TEST_CASE("iso8601 round trip and known epoch") {
    CHECK(parse_iso8601("2020-09-10T00:00:00Z") == kT0);
    CHECK(format_iso8601(kT0) == "2020-09-10T00:00:00Z");
    CHECK(parse_iso8601(format_iso8601(kT0 + 86399)) == kT0 + 86399);
    CHECK_THROWS_AS(parse_iso8601("2020-99-10T00:00:00Z"), InputFormatError);
    CHECK_THROWS_AS(parse_iso8601("yesterday"), InputFormatError);

    CHECK(local_date(kT0, -420) == CivilDate{2020, 9, 9}); // 17:00 local the day before
    CHECK(local_seconds_of_day(kT0, -420) == 17 * 3600);
}

TEST_CASE("aggregate: three samples in one 10-minute window") {
    std::vector<Sample> samples = {sample_at(kT0 + 5, 10), sample_at(kT0 + 100, 20),
                                   sample_at(kT0 + 590, 30)};
    const TimeSeries raw = make_raw_series("N", samples, 10);
    const TimeSeries agg = aggregate(raw, WindowLen::ten_min, {0.0, 0.05});
    REQUIRE(agg.windows.size() == 1);
    CHECK(agg.windows[0].start == kT0);
    CHECK(agg.windows[0].mean_pm25 == doctest::Approx(20.0));
    CHECK(agg.windows[0].n_samples == 3);
}

TEST_CASE("aggregate: coverage gate flags sparse windows invalid") {
    std::vector<Sample> samples = {sample_at(kT0 + 42, 42.0)};
    const TimeSeries raw = make_raw_series("N", samples, 10);
    const TimeSeries agg = aggregate(raw, WindowLen::ten_min, {0.75, 0.05});
    REQUIRE(agg.windows.size() == 1);
    CHECK_FALSE(agg.windows[0].valid);
    CHECK(agg.windows[0].coverage == doctest::Approx(1.0 / 60.0));
    CHECK(agg.windows[0].mean_pm25 == doctest::Approx(42.0));
}

TEST_CASE("aggregate: hour with 25% random deletions matches the streaming oracle") {
    Rng rng(31337);
    std::vector<Sample> samples;
    for (int i = 0; i < 360; ++i) {
        samples.push_back(sample_at(kT0 + i * 10, 40.0 + 120.0 * rng.next_double()));
    }
    // delete exactly 90 distinct positions
    std::vector<std::size_t> idx(samples.size());
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
    idx.resize(90);
    std::sort(idx.rbegin(), idx.rend());
    for (std::size_t i : idx) samples.erase(samples.begin() + static_cast<std::ptrdiff_t>(i));
    REQUIRE(samples.size() == 270);

    double oracle_sum = 0.0;
    for (const Sample& s : samples) oracle_sum += s.pm25;
    const double oracle_mean = oracle_sum / 270.0;

    const TimeSeries agg = aggregate(make_raw_series("N", samples, 10), WindowLen::one_hour);
    REQUIRE(agg.windows.size() == 1);
    CHECK(agg.windows[0].coverage == doctest::Approx(0.75));
    CHECK(agg.windows[0].valid);
    CHECK(agg.windows[0].mean_pm25 == doctest::Approx(oracle_mean).epsilon(1e-12));
}

TEST_CASE("aggregate: insensitive to input sample order") {
    Rng rng(808);
    std::vector<Sample> samples;
    for (int i = 0; i < 720; ++i) {
        samples.push_back(sample_at(kT0 + i * 10, rng.uniform(0.0, 200.0)));
    }
    std::vector<Sample> shuffled = samples;
    for (std::size_t i = shuffled.size(); i > 1; --i) std::swap(shuffled[i - 1], shuffled[rng.below(i)]);

    const TimeSeries a = aggregate(make_raw_series("N", samples, 10), WindowLen::one_hour);
    const TimeSeries b = aggregate(make_raw_series("N", shuffled, 10), WindowLen::one_hour);
    REQUIRE(a.windows.size() == b.windows.size());
    for (std::size_t i = 0; i < a.windows.size(); ++i) {
        CHECK(a.windows[i].start == b.windows[i].start);
        CHECK(a.windows[i].mean_pm25 == b.windows[i].mean_pm25); // bit-identical
        CHECK(a.windows[i].n_samples == b.windows[i].n_samples);
    }
}

TEST_CASE("aggregate: window means bounded by window extremes") {
    Rng rng(4242);
    std::vector<Sample> samples;
    for (int i = 0; i < 2000; ++i) {
        samples.push_back(sample_at(kT0 + static_cast<EpochSeconds>(rng.below(86400)), rng.uniform(0, 300)));
    }
    const TimeSeries raw = make_raw_series("N", samples, 10);
    const TimeSeries agg = aggregate(raw, WindowLen::one_hour, {0.0, 1e9});
    for (const Window& w : agg.windows) {
        double lo = 1e300, hi = -1e300;
        for (const Window& r : raw.windows) {
            if (r.start >= w.start && r.start < w.start + 3600) {
                lo = std::min(lo, r.mean_pm25);
                hi = std::max(hi, r.mean_pm25);
            }
        }
        CHECK(w.mean_pm25 >= lo - 1e-12);
        CHECK(w.mean_pm25 <= hi + 1e-12);
    }
}

TEST_CASE("aggregate: hourly->daily re-aggregation conserves the raw sum") {
    Rng rng(7);
    std::vector<Sample> samples;
    for (int i = 0; i < 8640; ++i) {
        if (rng.next_double() < 0.2) continue; // gaps
        samples.push_back(sample_at(kT0 + i * 10, rng.uniform(0, 250)));
    }
    const TimeSeries raw = make_raw_series("N", samples, 10);
    const TimeSeries daily_direct = aggregate(raw, WindowLen::one_day, {0.0, 1e9});
    const TimeSeries hourly = aggregate(raw, WindowLen::one_hour, {0.0, 1e9});
    const TimeSeries daily_re = aggregate(hourly, WindowLen::one_day, {0.0, 1e9});

    REQUIRE(daily_direct.windows.size() == daily_re.windows.size());
    for (std::size_t i = 0; i < daily_re.windows.size(); ++i) {
        CHECK(daily_re.windows[i].n_samples == daily_direct.windows[i].n_samples);
        CHECK(daily_re.windows[i].mean_pm25 ==
              doctest::Approx(daily_direct.windows[i].mean_pm25).epsilon(1e-12));
    }
}

TEST_CASE("aggregate: empty input gives empty output") {
    TimeSeries raw;
    raw.node_id = "N";
    CHECK(aggregate(raw, WindowLen::one_hour).windows.empty());
}

TEST_CASE("align_pairs: identity, disjoint and staggered joins") {
    std::vector<Window> wa, wb;
    for (int h = 0; h < 10; ++h) wa.push_back({kT0 + h * 3600, double(h), 1.0, 1, true});
    for (int h = 5; h < 15; ++h) wb.push_back({kT0 + h * 3600, double(100 + h), 1.0, 1, true});

    const auto self = align_pairs(hourly_of(wa), hourly_of(wa));
    CHECK(self.pairs.size() == 10);
    CHECK(self.dropped_a == 0);

    std::vector<Window> far;
    for (int h = 50; h < 60; ++h) far.push_back({kT0 + h * 3600, 1.0, 1.0, 1, true});
    const auto disjoint = align_pairs(hourly_of(wa), hourly_of(far));
    CHECK(disjoint.pairs.empty());
    CHECK(disjoint.dropped_a == 10);
    CHECK(disjoint.dropped_b == 10);

    const auto staggered = align_pairs(hourly_of(wa), hourly_of(wb));
    REQUIRE(staggered.pairs.size() == 5); // hours 5..9
    for (std::size_t i = 0; i < staggered.pairs.size(); ++i) {
        CHECK(staggered.pairs[i].start == kT0 + (5 + static_cast<int>(i)) * 3600);
        CHECK(staggered.pairs[i].a == doctest::Approx(5.0 + i));
        CHECK(staggered.pairs[i].b == doctest::Approx(105.0 + i));
    }
    CHECK(staggered.dropped_a == 5);
    CHECK(staggered.dropped_b == 5);
}

TEST_CASE("align_pairs: invalid windows never appear in the join") {
    std::vector<Window> wa = {{kT0, 1.0, 1.0, 1, true}, {kT0 + 3600, 2.0, 0.1, 1, false}};
    std::vector<Window> wb = {{kT0, 3.0, 1.0, 1, true}, {kT0 + 3600, 4.0, 1.0, 1, true}};
    const auto r = align_pairs(hourly_of(wa), hourly_of(wb));
    REQUIRE(r.pairs.size() == 1);
    CHECK(r.pairs[0].start == kT0);
}

TEST_CASE("align_pairs: mismatched window lengths violate the contract") {
    TimeSeries ten;
    ten.window_len = WindowLen::ten_min;
    CHECK_THROWS_AS(align_pairs(hourly_of({}), ten), PreconditionError);
}

TEST_CASE("reference_mean: two monitors average; single reporters pass with min_monitors=1") {
    std::vector<Window> m1 = {{kT0, 100.0, 1.0, 1, true}, {kT0 + 3600, 50.0, 1.0, 1, true}};
    std::vector<Window> m2 = {{kT0, 120.0, 1.0, 1, true}}; // second hour missing
    const std::vector<TimeSeries> monitors = {hourly_of(m1), hourly_of(m2)};

    const TimeSeries mean1 = reference_mean(monitors, 1);
    REQUIRE(mean1.windows.size() == 2);
    CHECK(mean1.windows[0].mean_pm25 == doctest::Approx(110.0));
    CHECK(mean1.windows[0].valid);
    CHECK(mean1.windows[1].mean_pm25 == doctest::Approx(50.0));
    CHECK(mean1.windows[1].valid);

    const TimeSeries mean2 = reference_mean(monitors, 2);
    CHECK(mean2.windows[0].valid);
    CHECK_FALSE(mean2.windows[1].valid);

    CHECK_THROWS_AS(reference_mean({}, 1), PreconditionError);
}

TEST_CASE("reference_mean: 12 hours x 2 monitors matches the row-mean oracle") {
    Rng rng(2024);
    std::vector<Window> m1, m2;
    std::vector<double> oracle;
    for (int h = 0; h < 12; ++h) {
        const double a = rng.uniform(20, 200), b = rng.uniform(20, 200);
        m1.push_back({kT0 + h * 3600, a, 1.0, 1, true});
        m2.push_back({kT0 + h * 3600, b, 1.0, 1, true});
        oracle.push_back((a + b) / 2.0);
    }
    const std::vector<TimeSeries> monitors = {hourly_of(m1), hourly_of(m2)};
    const TimeSeries mean = reference_mean(monitors, 2);
    REQUIRE(mean.windows.size() == 12);
    for (int h = 0; h < 12; ++h) {
        CHECK(mean.windows[h].mean_pm25 == doctest::Approx(oracle[h]).epsilon(1e-14));
    }
}
