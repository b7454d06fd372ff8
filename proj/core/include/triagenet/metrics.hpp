#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "triagenet/record.hpp"

namespace triagenet {

struct ConfusionCounts {
    std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
    std::size_t total() const { return tp + tn + fp + fn; }
};

/// Threshold rule: positive iff probability >= threshold.
ConfusionCounts confusion_at_threshold(std::span<const double> probs,
                                       std::span<const std::uint8_t> labels, double threshold);

/// Sensitivity-specificity gap: (1 - sensitivity) + (1 - specificity).
double gap(double sensitivity, double specificity);

/// Matthews correlation coefficient. Returns 0 when any factor of the
/// denominator is zero (documented convention for the undefined case).
double mcc(const ConfusionCounts& c);

// Ratio metrics; a zero denominator raises ValidationError rather than
// silently returning 0.
double sensitivity(const ConfusionCounts& c);
double specificity(const ConfusionCounts& c);
double ppv(const ConfusionCounts& c);
double npv(const ConfusionCounts& c);

/// Mann-Whitney AUC: the fraction of (positive, negative) pairs ranked
/// correctly, ties counting one half. Computed via midranks in O(n log n);
/// equals the trapezoidal ROC area. Throws on single-class input.
double auc(std::span<const double> probs, std::span<const std::uint8_t> labels);

/// Threshold maximizing sensitivity + specificity - 1 over the observed
/// probabilities.
double youden_threshold(std::span<const double> probs, std::span<const std::uint8_t> labels);

enum class MetricKind : std::uint8_t { auc, sensitivity, specificity, gap, ppv, npv, mcc };
std::string_view to_token(MetricKind m);

struct CiInterval {
    double lower = 0;
    double upper = 0;
};

/// Stratified percentile bootstrap: positives and negatives are resampled
/// separately with replacement (counts preserved), percentile interval at
/// 2.5/97.5. Replicate seeds are derived by counter so results do not depend
/// on evaluation order. Resamples where the metric is undefined are skipped;
/// more than 50% undefined is an error. The interval is widened to contain
/// the full-sample point estimate.
CiInterval bootstrap_ci(std::span<const double> probs, std::span<const std::uint8_t> labels,
                        MetricKind metric, double threshold, int n_boot, std::uint64_t seed);

struct MetricValue {
    double value = 0;
    CiInterval ci;
};

struct MetricsReport {
    MetricValue auc, sensitivity, specificity, gap, ppv, npv, mcc;
    double threshold = 0.5;
    double youden_threshold = 0.5;
    std::size_t n_rows = 0;
    std::size_t n_positive = 0;
    std::string label; // report row label ("with_falls", ...)
};

struct EvaluateOptions {
    double threshold = 0.5;
    int n_boot = 1000;
    std::uint64_t seed = 0;
};

/// Full seven-metric report with bootstrap confidence intervals.
MetricsReport evaluate_predictions(std::span<const double> probs,
                                   std::span<const std::uint8_t> labels,
                                   const EvaluateOptions& options);

/// Test-set ablation: returns the cohort minus all rows with the given
/// mechanism. Training data is never touched by this protocol.
std::vector<PatientRecord> ablate_mechanism(std::span<const PatientRecord> records,
                                            InjuryMechanism mechanism);
/// Name-based variant; throws ValidationError for unknown mechanism names.
std::vector<PatientRecord> ablate_mechanism(std::span<const PatientRecord> records,
                                            const std::string& mechanism_name);

std::string report_to_json(const MetricsReport& r);
MetricsReport report_from_json(const std::string& text);

/// One formatted row of the performance table ("0.78 (0.77-0.79)  ...").
std::string report_table_row(const MetricsReport& r);
std::string report_table_header();

} // namespace triagenet
