#pragma once

#include <optional>

#include "triagenet/metrics.hpp"
#include "triagenet/train.hpp"

namespace triagenet {

struct ModelEvalOptions {
    std::optional<double> threshold; // defaults to the artifact's cutoff
    int n_boot = 1000;
    std::uint64_t seed = 0;
    std::optional<AgeGroup> age_filter;
    std::optional<InjuryMechanism> ablate;
    std::string label;
};

/// Scores an artifact on a held-out test cohort and produces the full metric
/// report. Age filtering and mechanism ablation apply to the test set only;
/// an empty test set after filtering is an error.
MetricsReport evaluate_model(const ModelArtifact& artifact,
                             std::span<const PatientRecord> test,
                             const ModelEvalOptions& options);

} // namespace triagenet
