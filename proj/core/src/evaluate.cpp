#include "triagenet/evaluate.hpp"

#include "triagenet/errors.hpp"

namespace triagenet {

MetricsReport evaluate_model(const ModelArtifact& artifact,
                             std::span<const PatientRecord> test,
                             const ModelEvalOptions& options) {
    std::vector<PatientRecord> subset;
    subset.reserve(test.size());
    for (const auto& r : test) {
        if (options.age_filter && !in_age_group(r, *options.age_filter)) continue;
        if (options.ablate && r.injury_mechanism == *options.ablate) continue;
        subset.push_back(r);
    }
    if (subset.empty()) {
        throw ValidationError("evaluate: test set is empty after ablation/filtering");
    }

    const auto predictions = predict(artifact, subset);
    std::vector<double> probs(predictions.size());
    for (std::size_t i = 0; i < predictions.size(); ++i) probs[i] = predictions[i].probability;
    std::vector<std::uint8_t> labels(subset.size());
    for (std::size_t i = 0; i < subset.size(); ++i) {
        labels[i] = label_mortality(subset[i].disposition) ? 1 : 0;
    }

    EvaluateOptions eval;
    eval.threshold = options.threshold.value_or(artifact.config.threshold);
    eval.n_boot = options.n_boot;
    eval.seed = options.seed;
    MetricsReport report = evaluate_predictions(probs, labels, eval);
    report.label = options.label;
    return report;
}

} // namespace triagenet
