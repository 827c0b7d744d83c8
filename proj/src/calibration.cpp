#include "airnet/calibration.hpp"

#include "airnet/errors.hpp"
#include "airnet/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace airnet::cal {

int coefficient_count(ModelForm form) {
    switch (form) {
        case ModelForm::linear_zero: return 1;
        case ModelForm::linear_free: return 2;
        case ModelForm::quadratic_zero: return 2;
        case ModelForm::quadratic_free: return 3;
    }
    return 0;
}

bool is_quadratic(ModelForm form) {
    return form == ModelForm::quadratic_zero || form == ModelForm::quadratic_free;
}

bool has_intercept(ModelForm form) {
    return form == ModelForm::linear_free || form == ModelForm::quadratic_free;
}

std::string_view to_string(ModelForm form) {
    switch (form) {
        case ModelForm::linear_zero: return "linear_zero_intercept";
        case ModelForm::linear_free: return "linear_free_intercept";
        case ModelForm::quadratic_zero: return "quadratic_zero_intercept";
        case ModelForm::quadratic_free: return "quadratic_free_intercept";
    }
    return "unknown";
}

std::optional<ModelForm> form_from_string(std::string_view s) {
    for (ModelForm f : kAllForms)
        if (to_string(f) == s) return f;
    return std::nullopt;
}

namespace {

// Column labels in design order for the given form.
std::vector<std::string> design_columns(ModelForm form) {
    std::vector<std::string> cols;
    if (has_intercept(form)) cols.push_back("intercept");
    cols.push_back("pms");
    if (is_quadratic(form)) cols.push_back("pms^2");
    return cols;
}

double column_value(const std::string& col, double x) {
    if (col == "intercept") return 1.0;
    if (col == "pms") return x;
    return x * x;
}

// Solve the k x k normal equations in place by Gaussian elimination with
// partial pivoting. Returns the index of the first degenerate column, or -1.
int solve_normal_equations(std::vector<std::vector<double>>& a, std::vector<double>& b,
                           std::vector<double>& x, double pivot_floor) {
    const std::size_t k = b.size();
    std::vector<std::size_t> col_of(k);
    for (std::size_t i = 0; i < k; ++i) col_of[i] = i;

    for (std::size_t c = 0; c < k; ++c) {
        std::size_t pivot = c;
        for (std::size_t r = c + 1; r < k; ++r)
            if (std::abs(a[r][c]) > std::abs(a[pivot][c])) pivot = r;
        if (std::abs(a[pivot][c]) <= pivot_floor) return static_cast<int>(c);
        std::swap(a[c], a[pivot]);
        std::swap(b[c], b[pivot]);
        for (std::size_t r = c + 1; r < k; ++r) {
            const double f = a[r][c] / a[c][c];
            for (std::size_t j = c; j < k; ++j) a[r][j] -= f * a[c][j];
            b[r] -= f * b[c];
        }
    }
    x.assign(k, 0.0);
    for (std::size_t i = k; i-- > 0;) {
        double s = b[i];
        for (std::size_t j = i + 1; j < k; ++j) s -= a[i][j] * x[j];
        x[i] = s / a[i][i];
    }
    return -1;
}

double residual_sum_of_squares(const CalibrationModel& m, std::span<const AlignedPair> pairs) {
    double rss = 0.0;
    for (const AlignedPair& p : pairs) {
        const double e = p.b - m.evaluate(p.a);
        rss += e * e;
    }
    return rss;
}

} // namespace

double bic_score(std::size_t n, double rss, int k) {
    const double nn = static_cast<double>(n);
    const double floor = 1e-12 * nn;
    return nn * std::log(std::max(rss, floor) / nn) + k * std::log(nn);
}

CalibrationModel fit(std::span<const AlignedPair> pairs, ModelForm form) {
    const auto cols = design_columns(form);
    const std::size_t k = cols.size();
    const std::size_t n = pairs.size();
    if (n < k + 2) {
        throw FitError("fit(" + std::string(to_string(form)) + "): need at least " +
                       std::to_string(k + 2) + " pairs, got " + std::to_string(n));
    }

    // A constant predictor cannot identify a slope in any form.
    double sx = 0.0, sxx = 0.0;
    for (const AlignedPair& p : pairs) {
        sx += p.a;
        sxx += p.a * p.a;
    }
    const double var_x = sxx / n - (sx / n) * (sx / n);
    const double scale = std::max(1.0, sxx / n);
    if (var_x <= 1e-12 * scale) {
        throw FitError("fit(" + std::string(to_string(form)) + "): degenerate column 'pms' (constant predictor)");
    }

    std::vector<std::vector<double>> ata(k, std::vector<double>(k, 0.0));
    std::vector<double> aty(k, 0.0);
    for (const AlignedPair& p : pairs) {
        std::vector<double> row(k);
        for (std::size_t c = 0; c < k; ++c) row[c] = column_value(cols[c], p.a);
        for (std::size_t i = 0; i < k; ++i) {
            for (std::size_t j = i; j < k; ++j) ata[i][j] += row[i] * row[j];
            aty[i] += row[i] * p.b;
        }
    }
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < i; ++j) ata[i][j] = ata[j][i];

    // Pivot floor relative to the largest diagonal entry.
    double diag_max = 0.0;
    for (std::size_t i = 0; i < k; ++i) diag_max = std::max(diag_max, ata[i][i]);
    std::vector<double> beta;
    const int bad_col = solve_normal_equations(ata, aty, beta, 1e-12 * std::max(diag_max, 1.0));
    if (bad_col >= 0) {
        throw FitError("fit(" + std::string(to_string(form)) + "): degenerate column '" +
                       cols[static_cast<std::size_t>(bad_col)] + "'");
    }

    CalibrationModel m;
    m.form = form;
    m.n = n;
    std::size_t c = 0;
    if (has_intercept(form)) m.beta0 = beta[c++];
    m.beta1 = beta[c++];
    if (is_quadratic(form)) m.beta2 = beta[c++];

    const double rss = residual_sum_of_squares(m, pairs);
    m.rmse = std::sqrt(rss / n);
    m.bic = bic_score(n, rss, static_cast<int>(k));
    double ref_mean = 0.0;
    for (const AlignedPair& p : pairs) ref_mean += p.b;
    ref_mean /= n;
    double tss = 0.0;
    for (const AlignedPair& p : pairs) tss += (p.b - ref_mean) * (p.b - ref_mean);
    if (tss > 0.0) m.r2 = 1.0 - rss / tss;
    return m;
}

CalibrationModel select_model(std::span<const AlignedPair> pairs) {
    std::optional<CalibrationModel> best;
    std::string failures;
    for (ModelForm form : kAllForms) {
        CalibrationModel m;
        try {
            m = fit(pairs, form);
        } catch (const FitError& e) {
            failures += failures.empty() ? e.what() : std::string("; ") + e.what();
            continue;
        }
        if (!best) {
            best = m;
            continue;
        }
        const bool better =
            m.bic < best->bic ||
            (m.bic == best->bic &&
             (coefficient_count(m.form) < coefficient_count(best->form) ||
              (coefficient_count(m.form) == coefficient_count(best->form) &&
               !has_intercept(m.form) && has_intercept(best->form))));
        if (better) best = m;
    }
    if (!best) throw FitError("select_model: all candidate forms failed (" + failures + ")");
    return *best;
}

TimeSeries apply(const CalibrationModel& model, const TimeSeries& series, ApplyStats* stats) {
    TimeSeries out = series;
    std::vector<unsigned char> clamped(out.windows.size(), 0);
    parallel_for(static_cast<std::int64_t>(out.windows.size()), [&](std::int64_t i) {
        Window& w = out.windows[static_cast<std::size_t>(i)];
        double y = model.evaluate(w.mean_pm25);
        if (y < 0.0) {
            y = 0.0;
            clamped[static_cast<std::size_t>(i)] = 1;
        }
        w.mean_pm25 = y;
    });
    if (stats) {
        for (unsigned char c : clamped) stats->clamped += c;
    }
    return out;
}

Metrics metrics(const CalibrationModel& model, std::span<const AlignedPair> pairs) {
    Metrics out;
    const std::size_t n = pairs.size();
    if (n == 0) return out;
    const double rss = residual_sum_of_squares(model, pairs);
    out.rmse = std::sqrt(rss / n);
    double ref_mean = 0.0;
    for (const AlignedPair& p : pairs) ref_mean += p.b;
    ref_mean /= n;
    double tss = 0.0;
    for (const AlignedPair& p : pairs) tss += (p.b - ref_mean) * (p.b - ref_mean);
    if (tss > 0.0) out.r2 = 1.0 - rss / tss;
    return out;
}

} // namespace airnet::cal
