#pragma once

#include <span>
#include <string>
#include <vector>

#include "triagenet/record.hpp"

namespace triagenet {

struct TestResult {
    std::string name;       // variable label ("age", "sex", ...)
    std::string test;       // "t" or "chi_square"
    double statistic = 0;   // +/-infinity for the degenerate zero-variance case
    double df = 0;
    double p_value = 1;     // clamped to >= 1e-300; never printed as exact zero
    bool p_underflow = false;
    double alpha = 0.05;
    bool significant = false;
};

/// Pooled-variance two-sided Student's t-test. Both samples need >= 2 values.
/// With both variances zero: equal means give p = 1, unequal means give the
/// p = 0 convention (reported as underflow below 1e-300).
TestResult t_test(std::span<const double> a, std::span<const double> b, double alpha = 0.05);

/// Welch variant (unpooled variance, Welch-Satterthwaite df).
TestResult welch_t_test(std::span<const double> a, std::span<const double> b, double alpha = 0.05);

/// Pearson chi-square test of independence on an r x k count table.
/// Expected counts must all be positive.
TestResult chi_square_test(const std::vector<std::vector<double>>& contingency,
                           double alpha = 0.05);

/// The excluded-vs-included comparison: t-tests on age, GCS total and ISS,
/// chi-square on sex and comorbidity presence. Per-variable, records missing
/// that variable are dropped from the corresponding sample.
std::vector<TestResult> compare_cohorts(std::span<const PatientRecord> included,
                                        std::span<const PatientRecord> excluded,
                                        double alpha = 0.05);

std::string test_results_to_json(std::span<const TestResult> results);
std::string test_results_table(std::span<const TestResult> results);

// Self-contained distribution functions (accuracy target 1e-10 over
// |t| <= 10, df <= 1000 and x <= 100, df <= 50).

/// Regularized incomplete beta I_x(a, b) via the Lentz continued fraction.
double regularized_incomplete_beta(double a, double b, double x);
/// Regularized lower/upper incomplete gamma P(a, x) / Q(a, x).
double regularized_gamma_p(double a, double x);
double regularized_gamma_q(double a, double x);

/// Upper tail P(T > t) of Student's t with df degrees of freedom.
double student_t_sf(double t, double df);
/// Upper tail P(X > x) of the chi-square distribution.
double chi_square_sf(double x, double df);

} // namespace triagenet
