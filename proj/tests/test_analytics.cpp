#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "airnet/analytics.hpp"
#include "airnet/errors.hpp"
#include "airnet/rng.hpp"

#include <algorithm>
#include <cmath>

using namespace airnet;
using stats::WilcoxonResult;

namespace {

TimeSeries hourly(std::vector<double> means, EpochSeconds t0 = 0) {
    TimeSeries s;
    s.node_id = "N";
    s.window_len = WindowLen::one_hour;
    s.sample_period_s = 3600;
    for (std::size_t i = 0; i < means.size(); ++i) {
        s.windows.push_back({t0 + static_cast<EpochSeconds>(i) * 3600, means[i], 1.0, 1, true});
    }
    return s;
}

// Brute-force oracle: full 2^n enumeration over the signed rank sums.
struct EnumOracle {
    double w_plus = 0, w_minus = 0, statistic = 0, p = 1;
    std::size_t n = 0;
};

EnumOracle enum_oracle(std::vector<double> d) {
    EnumOracle o;
    std::vector<double> mags;
    std::vector<int> signs;
    for (double v : d) {
        if (v == 0.0) continue;
        mags.push_back(std::abs(v));
        signs.push_back(v > 0 ? 1 : -1);
    }
    o.n = mags.size();
    if (o.n == 0) return o;

    // midranks doubled to integers, assigned by explicit group scan
    const std::size_t n = mags.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return mags[a] < mags[b]; });
    std::vector<long long> rank2(n);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && mags[order[j + 1]] == mags[order[i]]) ++j;
        for (std::size_t k = i; k <= j; ++k) rank2[order[k]] = static_cast<long long>(i + j + 2);
        i = j + 1;
    }

    long long total2 = 0, w2_obs = 0;
    for (std::size_t i = 0; i < n; ++i) {
        total2 += rank2[i];
        if (signs[i] > 0) w2_obs += rank2[i];
    }
    o.w_plus = static_cast<double>(w2_obs) / 2.0;
    o.w_minus = static_cast<double>(total2 - w2_obs) / 2.0;
    o.statistic = std::min(o.w_plus, o.w_minus);

    const long long w2_min = std::min(w2_obs, total2 - w2_obs);
    const long long w2_max = total2 - w2_min;
    unsigned long long low = 0, high = 0;
    for (unsigned long long mask = 0; mask < (1ull << n); ++mask) {
        long long w2 = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (mask & (1ull << i)) w2 += rank2[i];
        }
        if (w2 <= w2_min) ++low;
        if (w2 >= w2_max) ++high;
    }
    const double denom = std::ldexp(1.0, static_cast<int>(n));
    o.p = std::min(1.0, (static_cast<double>(low) + static_cast<double>(high)) / denom);
    return o;
}

} // namespace

TEST_CASE("summarize: median conventions") {
    auto odd = stats::summarize({3, 1, 2});
    CHECK(odd->median == doctest::Approx(2.0));
    auto even = stats::summarize({4, 1, 3, 2});
    CHECK(even->median == doctest::Approx(2.5));
    CHECK(even->min == 1.0);
    CHECK(even->max == 4.0);
    CHECK(even->mean == doctest::Approx(2.5));
    CHECK_FALSE(stats::summarize({}).has_value());
}

TEST_CASE("io_ratio: identity, two-point arithmetic, skip accounting") {
    const auto io1 = stats::io_ratio(hourly({50, 80, 120}), hourly({50, 80, 120}), "S");
    REQUIRE(io1.points.size() == 3);
    for (const auto& p : io1.points) CHECK(p.ratio == doctest::Approx(1.0));

    const auto io2 = stats::io_ratio(hourly({20, 40}), hourly({100, 80}), "S");
    REQUIRE(io2.points.size() == 2);
    CHECK(io2.points[0].ratio == doctest::Approx(0.20));
    CHECK(io2.points[1].ratio == doctest::Approx(0.50));
    CHECK(io2.summary->median == doctest::Approx(0.35));

    const auto io3 = stats::io_ratio(hourly({20, 40, 30}), hourly({100, 0, 60}), "S");
    CHECK(io3.points.size() == 2);
    CHECK(io3.skipped_nonpositive_outdoor == 1);

    // empty intersection is empty output, not an error
    const auto io4 = stats::io_ratio(hourly({1}), hourly({1}, 86400 * 10), "S");
    CHECK(io4.points.empty());
    CHECK_FALSE(io4.summary.has_value());
}

TEST_CASE("io_ratio: 264 aligned hours match the sort-based summary oracle") {
    Rng rng(264);
    std::vector<double> in, out;
    for (int i = 0; i < 264; ++i) {
        in.push_back(rng.uniform(5, 120));
        out.push_back(rng.uniform(50, 220));
    }
    const auto io = stats::io_ratio(hourly(in), hourly(out), "S");
    REQUIRE(io.points.size() == 264);

    std::vector<double> ratios;
    for (int i = 0; i < 264; ++i) ratios.push_back(in[i] / out[i]);
    std::sort(ratios.begin(), ratios.end());
    double sum = 0;
    for (double r : ratios) sum += r;
    CHECK(io.summary->min == doctest::Approx(ratios.front()).epsilon(1e-14));
    CHECK(io.summary->max == doctest::Approx(ratios.back()).epsilon(1e-14));
    CHECK(io.summary->mean == doctest::Approx(sum / 264.0).epsilon(1e-12));
    CHECK(io.summary->median ==
          doctest::Approx(0.5 * (ratios[131] + ratios[132])).epsilon(1e-14));
}

TEST_CASE("io_ratio: scale equivariance") {
    Rng rng(11);
    std::vector<double> in, out;
    for (int i = 0; i < 50; ++i) {
        in.push_back(rng.uniform(5, 100));
        out.push_back(rng.uniform(40, 200));
    }
    const auto base = stats::io_ratio(hourly(in), hourly(out), "S");
    auto scale = [](std::vector<double> v, double k) {
        for (double& x : v) x *= k;
        return v;
    };
    const auto both = stats::io_ratio(hourly(scale(in, 3.7)), hourly(scale(out, 3.7)), "S");
    const auto in_only = stats::io_ratio(hourly(scale(in, 2.5)), hourly(out), "S");
    for (std::size_t i = 0; i < base.points.size(); ++i) {
        CHECK(both.points[i].ratio == doctest::Approx(base.points[i].ratio).epsilon(1e-12));
        CHECK(in_only.points[i].ratio == doctest::Approx(2.5 * base.points[i].ratio).epsilon(1e-12));
    }
}

TEST_CASE("pm_reduction: zero reduction, absent cases and range") {
    const auto same = stats::pm_reduction(hourly({60, 60}), hourly({60, 60}), 0, 1 << 30);
    CHECK(same.value() == doctest::Approx(0.0));

    CHECK_FALSE(stats::pm_reduction(hourly({10}), hourly({0.0}), 0, 1 << 30).has_value());
    CHECK_FALSE(stats::pm_reduction(hourly({}), hourly({50}), 0, 1 << 30).has_value());

    // 100% iff indoor mean is zero; negative iff indoor exceeds outdoor
    CHECK(stats::pm_reduction(hourly({0, 0}), hourly({80, 120}), 0, 1 << 30).value() ==
          doctest::Approx(100.0));
    CHECK(stats::pm_reduction(hourly({150}), hourly({100}), 0, 1 << 30).value() < 0.0);

    // means over each series' own valid windows (L4-style early outdoor loss)
    const auto r = stats::pm_reduction(hourly({20.9}), hourly({102.0}), 0, 1 << 30);
    CHECK(r.value() == doctest::Approx((102.0 - 20.9) / 102.0 * 100.0).epsilon(1e-12));
    CHECK(std::abs(r.value() - 79.6) < 0.2);
}

TEST_CASE("network_average: two-point sample SD and column oracle") {
    const std::vector<TimeSeries> two = {hourly({1}), hourly({3})};
    auto pts = stats::network_average(two);
    REQUIRE(pts.size() == 1);
    CHECK(pts[0].mean == doctest::Approx(2.0));
    CHECK(pts[0].sigma.value() == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));

    const std::vector<TimeSeries> same = {hourly({5, 7}), hourly({5, 7})};
    for (const auto& p : stats::network_average(same)) CHECK(p.sigma.value() == 0.0);

    // single reporter carries no sigma
    const std::vector<TimeSeries> solo = {hourly({9})};
    CHECK_FALSE(stats::network_average(solo)[0].sigma.has_value());

    Rng rng(321);
    std::vector<std::vector<double>> cols(4, std::vector<double>(24));
    std::vector<TimeSeries> series;
    for (auto& c : cols) {
        for (double& v : c) v = rng.uniform(10, 200);
        series.push_back(hourly(c));
    }
    const auto net = stats::network_average(series);
    REQUIRE(net.size() == 24);
    for (int h = 0; h < 24; ++h) {
        double m = 0;
        for (int s = 0; s < 4; ++s) m += cols[s][h];
        m /= 4.0;
        double ss = 0;
        for (int s = 0; s < 4; ++s) ss += (cols[s][h] - m) * (cols[s][h] - m);
        CHECK(net[h].mean == doctest::Approx(m).epsilon(1e-12));
        CHECK(net[h].sigma.value() == doctest::Approx(std::sqrt(ss / 3.0)).epsilon(1e-12));
        CHECK(net[h].n_sensors == 4);
    }
}

TEST_CASE("correlation: perfect lines, constants, oracle and affine invariance") {
    Rng rng(100);
    std::vector<double> a(100);
    for (double& v : a) v = rng.uniform(0, 50);
    std::vector<double> b2a1(100), neg(100);
    for (std::size_t i = 0; i < a.size(); ++i) {
        b2a1[i] = 2 * a[i] + 1;
        neg[i] = -a[i];
    }
    CHECK(stats::correlation(a, b2a1).value() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(stats::correlation(a, neg).value() == doctest::Approx(-1.0).epsilon(1e-12));

    std::vector<double> c(100, 7.0);
    CHECK_FALSE(stats::correlation(a, c).has_value());
    CHECK_FALSE(stats::correlation(std::vector<double>{1, 2}, std::vector<double>{3, 4}).has_value());

    std::vector<double> y(100);
    for (double& v : y) v = rng.uniform(0, 50);
    const double r = stats::correlation(a, y).value();

    // direct covariance-definition oracle
    double ma = 0, my = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        my += y[i];
    }
    ma /= 100.0;
    my /= 100.0;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sxy += (a[i] - ma) * (y[i] - my);
        sxx += (a[i] - ma) * (a[i] - ma);
        syy += (y[i] - my) * (y[i] - my);
    }
    CHECK(r == doctest::Approx(sxy / std::sqrt(sxx * syy)).epsilon(1e-12));

    // positive affine transforms leave r untouched
    std::vector<double> ay(100), yy(100);
    for (std::size_t i = 0; i < a.size(); ++i) {
        ay[i] = 4.2 * a[i] + 17.0;
        yy[i] = 0.3 * y[i] - 2.0;
    }
    CHECK(stats::correlation(ay, yy).value() == doctest::Approx(r).epsilon(1e-10));
}

TEST_CASE("correlation over series joins on valid hourly windows") {
    const auto r = stats::correlation(hourly({1, 2, 3, 4}), hourly({3, 5, 7, 9}));
    CHECK(r.value() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("wilcoxon: all-positive run of five") {
    const std::vector<double> x = {1, 2, 3, 4, 5};
    const std::vector<double> y = {0, 0, 0, 0, 0};
    const WilcoxonResult w = stats::wilcoxon_signed_rank(x, y);
    CHECK(w.n_nonzero == 5);
    CHECK(w.w_minus == 0.0);
    CHECK(w.w_plus == 15.0);
    CHECK(w.statistic == 0.0);
    CHECK(w.p_value == doctest::Approx(0.0625).epsilon(1e-15)); // 2/2^5
    CHECK(w.method == stats::WilcoxonMethod::exact);
}

TEST_CASE("wilcoxon: tie in |d| takes midranks and p saturates") {
    const std::vector<double> d = {+1, -1};
    const WilcoxonResult w = stats::wilcoxon_signed_rank_diffs(d);
    CHECK(w.w_plus == doctest::Approx(1.5));
    CHECK(w.w_minus == doctest::Approx(1.5));
    CHECK(w.p_value == doctest::Approx(1.0));
}

TEST_CASE("wilcoxon: zero differences drop; all-zero is degenerate") {
    const std::vector<double> d = {0, 0, 2, -1, 0};
    const WilcoxonResult w = stats::wilcoxon_signed_rank_diffs(d);
    CHECK(w.n_nonzero == 2);

    const std::vector<double> z = {0, 0, 0};
    const WilcoxonResult wz = stats::wilcoxon_signed_rank_diffs(z);
    CHECK(wz.degenerate);
    CHECK(wz.p_value == 1.0);
    CHECK(wz.n_nonzero == 0);
}

TEST_CASE("wilcoxon: 200 seeded samples match the full 2^n enumeration oracle") {
    Rng rng(5150);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng.below(12);
        std::vector<double> d(n);
        bool any = false;
        for (double& v : d) {
            v = static_cast<double>(static_cast<long long>(rng.below(13)) - 6);
            any |= v != 0.0;
        }
        if (!any) d[0] = 1.0;
        const WilcoxonResult got = stats::wilcoxon_signed_rank_diffs(d);
        const EnumOracle want = enum_oracle(d);
        CHECK(got.n_nonzero == want.n);
        CHECK(got.w_plus == want.w_plus);
        CHECK(got.w_minus == want.w_minus);
        CHECK(got.statistic == want.statistic);
        CHECK(got.p_value == want.p); // identical rationals, identical doubles
    }
}

TEST_CASE("wilcoxon: rank-sum identity and sign/rank-only dependence") {
    Rng rng(777);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 3 + rng.below(15);
        std::vector<double> d(n);
        for (double& v : d) v = rng.normal(0.3, 1.0);
        const WilcoxonResult w = stats::wilcoxon_signed_rank_diffs(d);
        const double n_nz = static_cast<double>(w.n_nonzero);
        CHECK(w.w_plus + w.w_minus == doctest::Approx(n_nz * (n_nz + 1) / 2.0).epsilon(1e-12));

        // strictly increasing odd transform preserves signs and |d| order
        std::vector<double> t(n);
        for (std::size_t i = 0; i < n; ++i) t[i] = std::asinh(d[i]) * 3.0;
        const WilcoxonResult wt = stats::wilcoxon_signed_rank_diffs(t);
        CHECK(wt.w_plus == w.w_plus);
        CHECK(wt.statistic == w.statistic);
        CHECK(wt.p_value == w.p_value);
    }
}

TEST_CASE("wilcoxon: normal approximation tracks the exact tail for 15<=n<=20") {
    Rng rng(1618);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t n = 15 + rng.below(6);
        std::vector<double> d(n);
        for (double& v : d) v = rng.normal(0.25, 1.0);
        const WilcoxonResult exact = stats::wilcoxon_signed_rank_diffs(d, 25);
        const WilcoxonResult approx = stats::wilcoxon_signed_rank_diffs(d, 1);
        REQUIRE(exact.method == stats::WilcoxonMethod::exact);
        REQUIRE(approx.method == stats::WilcoxonMethod::normal_approx);
        CHECK(std::abs(exact.p_value - approx.p_value) < 0.02);
    }
}

TEST_CASE("site_summary_row: constant streams and internal consistency") {
    const auto row = stats::site_summary_row("S", hourly({50, 50, 50}), hourly({100, 100, 100}),
                                             0, 1 << 30);
    CHECK(row.indoor_mean.value() == doctest::Approx(50.0));
    CHECK(row.indoor_max.value() == doctest::Approx(50.0));
    CHECK(row.outdoor_mean.value() == doctest::Approx(100.0));
    CHECK(row.outdoor_max.value() == doctest::Approx(100.0));
    CHECK(row.io->min == doctest::Approx(0.5));
    CHECK(row.io->median == doctest::Approx(0.5));
    CHECK(row.io->mean == doctest::Approx(0.5));
    CHECK(row.io->max == doctest::Approx(0.5));
    CHECK(row.reduction_pct.value() == doctest::Approx(50.0));

    // reduction column equals (1 - indoor_mean/outdoor_mean) for any row
    Rng rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> in(24), out(24);
        for (double& v : in) v = rng.uniform(5, 120);
        for (double& v : out) v = rng.uniform(60, 220);
        const auto r = stats::site_summary_row("S", hourly(in), hourly(out), 0, 1 << 30);
        const double expect = (1.0 - r.indoor_mean.value() / r.outdoor_mean.value()) * 100.0;
        CHECK(r.reduction_pct.value() == doctest::Approx(expect).epsilon(1e-12));
    }
}
