#pragma once

#include "airnet/timeseries.hpp"

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace airnet::cal {

// The four candidate correction forms: Ref = b0 + b1*PMS (+ b2*PMS^2), each
// with the intercept either fitted or forced to zero.
enum class ModelForm { linear_zero, linear_free, quadratic_zero, quadratic_free };

inline constexpr std::array<ModelForm, 4> kAllForms = {
    ModelForm::linear_zero, ModelForm::linear_free, ModelForm::quadratic_zero,
    ModelForm::quadratic_free};

int coefficient_count(ModelForm form); // 1, 2, 2, 3
bool is_quadratic(ModelForm form);
bool has_intercept(ModelForm form);
std::string_view to_string(ModelForm form);
std::optional<ModelForm> form_from_string(std::string_view s);

struct CalibrationModel {
    ModelForm form = ModelForm::linear_free;
    double beta0 = 0.0;
    double beta1 = 1.0;
    double beta2 = 0.0; // meaningful only for quadratic forms
    std::size_t n = 0;  // training pair count
    std::optional<double> r2; // absent when the reference is constant
    double rmse = 0.0;
    double bic = 0.0;

    double evaluate(double pms) const {
        double y = beta0 + beta1 * pms;
        if (is_quadratic(form)) y += beta2 * pms * pms;
        return y;
    }
};

// Ordinary least squares for the requested form. Throws FitError on too few
// pairs or a rank-deficient design (the error names the degenerate column).
CalibrationModel fit(std::span<const AlignedPair> pairs, ModelForm form);

// Gaussian-likelihood BIC: n*ln(max(RSS, eps)/n) + k*ln(n). The floor keeps
// exact fits finite; eps = 1e-12 * n so synthetic zero-residual data still
// orders below any imperfect fit.
double bic_score(std::size_t n, double rss, int k);

// Fit all four forms and return the minimum-BIC model. Ties break toward
// fewer coefficients, then toward the zero intercept. Throws FitError when
// every form fails.
CalibrationModel select_model(std::span<const AlignedPair> pairs);

struct ApplyStats {
    std::size_t clamped = 0; // negative predictions clamped to zero
};

// Pointwise model evaluation on each window mean; window structure and
// coverage are untouched. Runs parallel across windows.
TimeSeries apply(const CalibrationModel& model, const TimeSeries& series,
                 ApplyStats* stats = nullptr);

struct Metrics {
    std::optional<double> r2;
    double rmse = 0.0;
};

Metrics metrics(const CalibrationModel& model, std::span<const AlignedPair> pairs);

} // namespace airnet::cal
