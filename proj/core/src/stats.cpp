#include "triagenet/stats.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include <json.hpp>

#include "triagenet/csv.hpp"
#include "triagenet/errors.hpp"

namespace triagenet {

namespace {

constexpr double kPFloor = 1e-300;

// Continued fraction for the incomplete beta (modified Lentz).
double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 500;
    constexpr double kEps = 1e-15;
    constexpr double kTiny = 1e-300;

    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) return h;
    }
    throw NumericError("incomplete beta continued fraction did not converge");
}

// Series for the lower incomplete gamma P(a, x), x < a + 1.
double gamma_p_series(double a, double x) {
    constexpr int kMaxIter = 1000;
    constexpr double kEps = 1e-16;
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int n = 0; n < kMaxIter; ++n) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::abs(del) < std::abs(sum) * kEps) {
            return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
        }
    }
    throw NumericError("incomplete gamma series did not converge");
}

// Lentz continued fraction for the upper incomplete gamma Q(a, x), x >= a + 1.
double gamma_q_cf(double a, double x) {
    constexpr int kMaxIter = 1000;
    constexpr double kEps = 1e-16;
    constexpr double kTiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / kTiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= kMaxIter; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < kTiny) d = kTiny;
        c = b + an / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) {
            return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
        }
    }
    throw NumericError("incomplete gamma continued fraction did not converge");
}

struct SampleMoments {
    double mean = 0;
    double var = 0; // unbiased (n-1)
    std::size_t n = 0;
};

SampleMoments moments(std::span<const double> xs) {
    SampleMoments m;
    m.n = xs.size();
    for (const double x : xs) m.mean += x;
    m.mean /= static_cast<double>(m.n);
    for (const double x : xs) {
        const double d = x - m.mean;
        m.var += d * d;
    }
    m.var /= static_cast<double>(m.n - 1);
    return m;
}

TestResult finish_t(TestResult r, double alpha) {
    r.test = "t";
    r.alpha = alpha;
    if (std::isinf(r.statistic)) {
        r.p_value = kPFloor;
        r.p_underflow = true;
    } else {
        double p = 2.0 * student_t_sf(std::abs(r.statistic), r.df);
        p = std::min(p, 1.0);
        if (p < kPFloor) {
            r.p_value = kPFloor;
            r.p_underflow = true;
        } else {
            r.p_value = p;
        }
    }
    r.significant = r.p_value < alpha;
    return r;
}

} // namespace

double regularized_incomplete_beta(double a, double b, double x) {
    if (a <= 0 || b <= 0) throw NumericError("incomplete beta: a, b must be positive");
    if (x <= 0) return 0.0;
    if (x >= 1) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_front);
    // Use the continued fraction on the side where it converges fast.
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * betacf(a, b, x) / a;
    }
    return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double regularized_gamma_p(double a, double x) {
    if (a <= 0) throw NumericError("incomplete gamma: a must be positive");
    if (x < 0) throw NumericError("incomplete gamma: x must be non-negative");
    if (x == 0) return 0.0;
    if (x < a + 1.0) return gamma_p_series(a, x);
    return 1.0 - gamma_q_cf(a, x);
}

double regularized_gamma_q(double a, double x) {
    if (a <= 0) throw NumericError("incomplete gamma: a must be positive");
    if (x < 0) throw NumericError("incomplete gamma: x must be non-negative");
    if (x == 0) return 1.0;
    if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
    return gamma_q_cf(a, x);
}

double student_t_sf(double t, double df) {
    if (df <= 0) throw NumericError("student_t_sf: df must be positive");
    const double x = df / (df + t * t);
    const double half_tail = 0.5 * regularized_incomplete_beta(0.5 * df, 0.5, x);
    return t >= 0 ? half_tail : 1.0 - half_tail;
}

double chi_square_sf(double x, double df) {
    if (df <= 0) throw NumericError("chi_square_sf: df must be positive");
    return regularized_gamma_q(0.5 * df, 0.5 * x);
}

TestResult t_test(std::span<const double> a, std::span<const double> b, double alpha) {
    if (a.size() < 2 || b.size() < 2) {
        throw ValidationError("t_test: each sample needs at least 2 values");
    }
    const SampleMoments ma = moments(a), mb = moments(b);
    TestResult r;
    r.df = static_cast<double>(ma.n + mb.n - 2);
    if (ma.var == 0.0 && mb.var == 0.0) {
        if (ma.mean == mb.mean) {
            r.statistic = 0.0;
            r.test = "t";
            r.alpha = alpha;
            r.p_value = 1.0;
            r.significant = false;
            return r;
        }
        r.statistic = ma.mean > mb.mean ? std::numeric_limits<double>::infinity()
                                        : -std::numeric_limits<double>::infinity();
        return finish_t(r, alpha);
    }
    const double pooled = ((static_cast<double>(ma.n) - 1.0) * ma.var +
                           (static_cast<double>(mb.n) - 1.0) * mb.var) /
                          r.df;
    const double se = std::sqrt(pooled * (1.0 / static_cast<double>(ma.n) +
                                          1.0 / static_cast<double>(mb.n)));
    r.statistic = (ma.mean - mb.mean) / se;
    return finish_t(r, alpha);
}

TestResult welch_t_test(std::span<const double> a, std::span<const double> b, double alpha) {
    if (a.size() < 2 || b.size() < 2) {
        throw ValidationError("t_test: each sample needs at least 2 values");
    }
    const SampleMoments ma = moments(a), mb = moments(b);
    const double va = ma.var / static_cast<double>(ma.n);
    const double vb = mb.var / static_cast<double>(mb.n);
    TestResult r;
    r.test = "welch_t";
    if (va + vb == 0.0) {
        TestResult pooled = t_test(a, b, alpha);
        pooled.test = "welch_t";
        return pooled;
    }
    r.df = (va + vb) * (va + vb) /
           (va * va / (static_cast<double>(ma.n) - 1.0) +
            vb * vb / (static_cast<double>(mb.n) - 1.0));
    r.statistic = (ma.mean - mb.mean) / std::sqrt(va + vb);
    r = finish_t(r, alpha);
    r.test = "welch_t";
    return r;
}

TestResult chi_square_test(const std::vector<std::vector<double>>& contingency, double alpha) {
    const std::size_t rows = contingency.size();
    if (rows < 2) throw ValidationError("chi_square_test: need at least 2 rows");
    const std::size_t cols = contingency.front().size();
    if (cols < 2) throw ValidationError("chi_square_test: need at least 2 columns");
    for (const auto& row : contingency) {
        if (row.size() != cols) throw ValidationError("chi_square_test: ragged table");
        for (const double c : row) {
            if (c < 0) throw ValidationError("chi_square_test: negative count");
        }
    }
    std::vector<double> row_sum(rows, 0.0), col_sum(cols, 0.0);
    double total = 0;
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
            row_sum[i] += contingency[i][j];
            col_sum[j] += contingency[i][j];
            total += contingency[i][j];
        }
    }
    TestResult r;
    r.test = "chi_square";
    r.alpha = alpha;
    r.df = static_cast<double>((rows - 1) * (cols - 1));
    double stat = 0;
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
            const double expected = row_sum[i] * col_sum[j] / total;
            if (expected <= 0) {
                throw ValidationError("chi_square_test: zero expected cell count");
            }
            const double d = contingency[i][j] - expected;
            stat += d * d / expected;
        }
    }
    r.statistic = stat;
    double p = chi_square_sf(stat, r.df);
    p = std::min(p, 1.0);
    if (p < kPFloor) {
        r.p_value = kPFloor;
        r.p_underflow = true;
    } else {
        r.p_value = p;
    }
    r.significant = r.p_value < alpha;
    return r;
}

std::vector<TestResult> compare_cohorts(std::span<const PatientRecord> included,
                                        std::span<const PatientRecord> excluded, double alpha) {
    if (included.empty() || excluded.empty()) {
        throw ValidationError("compare_cohorts: empty cohort");
    }
    auto numeric_sample = [](std::span<const PatientRecord> recs, auto&& extract) {
        std::vector<double> out;
        out.reserve(recs.size());
        for (const auto& r : recs) {
            if (const auto v = extract(r)) out.push_back(*v);
        }
        return out;
    };
    auto age_of = [](const PatientRecord& r) -> std::optional<double> {
        return static_cast<double>(r.age);
    };
    auto gcs_of = [](const PatientRecord& r) -> std::optional<double> {
        if (!r.gcs_eye || !r.gcs_verbal || !r.gcs_motor) return std::nullopt;
        return static_cast<double>(*r.gcs_eye + *r.gcs_verbal + *r.gcs_motor);
    };
    auto iss_of = [](const PatientRecord& r) -> std::optional<double> {
        return static_cast<double>(r.iss);
    };

    std::vector<TestResult> results;
    {
        TestResult t = t_test(numeric_sample(included, age_of), numeric_sample(excluded, age_of),
                              alpha);
        t.name = "age";
        results.push_back(std::move(t));
    }
    {
        TestResult t = t_test(numeric_sample(included, gcs_of), numeric_sample(excluded, gcs_of),
                              alpha);
        t.name = "gcs_total";
        results.push_back(std::move(t));
    }
    {
        TestResult t = t_test(numeric_sample(included, iss_of), numeric_sample(excluded, iss_of),
                              alpha);
        t.name = "iss";
        results.push_back(std::move(t));
    }
    auto two_by_two = [&](auto&& flag) {
        std::vector<std::vector<double>> table(2, std::vector<double>(2, 0.0));
        for (const auto& r : included) table[0][flag(r) ? 1 : 0] += 1.0;
        for (const auto& r : excluded) table[1][flag(r) ? 1 : 0] += 1.0;
        return table;
    };
    {
        TestResult t = chi_square_test(
            two_by_two([](const PatientRecord& r) { return r.sex == Sex::female; }), alpha);
        t.name = "sex";
        results.push_back(std::move(t));
    }
    {
        TestResult t = chi_square_test(
            two_by_two([](const PatientRecord& r) { return !r.comorbidities.none(); }), alpha);
        t.name = "comorbidity_presence";
        results.push_back(std::move(t));
    }
    return results;
}

std::string test_results_to_json(std::span<const TestResult> results) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : results) {
        nlohmann::json j;
        j["name"] = r.name;
        j["test"] = r.test;
        if (std::isfinite(r.statistic)) {
            j["statistic"] = r.statistic;
        } else {
            j["statistic"] = r.statistic > 0 ? "inf" : "-inf";
        }
        j["df"] = r.df;
        j["p_value"] = r.p_value;
        j["p_display"] = r.p_underflow ? "<1e-300" : format_double(r.p_value);
        j["alpha"] = r.alpha;
        j["significant"] = r.significant;
        arr.push_back(std::move(j));
    }
    return arr.dump(2) + "\n";
}

std::string test_results_table(std::span<const TestResult> results) {
    std::string out;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-22s %-12s %12s %8s %12s %s\n", "variable", "test",
                  "statistic", "df", "p", "significant");
    out += buf;
    for (const auto& r : results) {
        char stat[32];
        if (std::isfinite(r.statistic)) {
            std::snprintf(stat, sizeof stat, "%.4f", r.statistic);
        } else {
            std::snprintf(stat, sizeof stat, "%s", r.statistic > 0 ? "inf" : "-inf");
        }
        char p[32];
        if (r.p_underflow) {
            std::snprintf(p, sizeof p, "<1e-300");
        } else {
            std::snprintf(p, sizeof p, "%.4g", r.p_value);
        }
        std::snprintf(buf, sizeof buf, "%-22s %-12s %12s %8.1f %12s %s\n", r.name.c_str(),
                      r.test.c_str(), stat, r.df, p, r.significant ? "yes" : "no");
        out += buf;
    }
    return out;
}

} // namespace triagenet
