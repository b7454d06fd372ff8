#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "triagenet/net.hpp"
#include "triagenet/pipeline.hpp"
#include "triagenet/record.hpp"

namespace triagenet {

struct TrainConfig {
    double coarse_lr = 1e-3;   // phase 1 (and single-phase) learning rate
    double fine_lr = 1e-4;     // phase 2 fine-tuning learning rate
    int epochs_phase1 = 30;
    int epochs_phase2 = 30;
    int batch_size = 512;
    double dropout_rate = 0.3;
    double bn_momentum = 0.1;
    int smote_k = 5;
    double smote_multiplier = 10.0; // synthetic rows = multiplier * minority count
    double threshold = 0.5;         // classification cutoff
    std::uint64_t seed = 0;
    EncodePolicy encode_policy = EncodePolicy::strict;

    /// fine_lr < coarse_lr, batch_size >= 1, epochs >= 0 (zero epochs is the
    /// documented no-op phase), threshold in (0,1).
    void validate() const;
};

struct TrainLogEntry {
    int phase = 1;
    int epoch = 0;
    double loss = 0;
};

/// Everything needed to reproduce predictions: the fitted schema, the network
/// weights and running statistics, and the configuration that produced them.
struct ModelArtifact {
    int format_version = 1;
    FeatureSchema schema;
    Network net; // stored in eval mode
    TrainConfig config;
    AgeGroup age_group = AgeGroup::all;
    std::string scope; // "ed_only" or "hospital_and_ed" training arm
    double phase1_final_loss = 0;
    double phase2_final_loss = 0;
};

struct TrainOutput {
    ModelArtifact artifact;
    std::vector<TrainLogEntry> log; // one entry per epoch, both phases
};

/// Two-phase transfer protocol: phase 1 trains from initialization on the
/// hospital-outcome set at coarse_lr; phase 2 continues the same weights (no
/// layers frozen) on the ED set augmented with SMOTE-synthesized mortality
/// rows, at fine_lr. Both matrices must share one schema; the ED set needs at
/// least 2 positive rows. Deterministic per seed.
TrainOutput train_transfer(const FeatureMatrix& hospital, const FeatureMatrix& ed,
                           const TrainConfig& cfg);

/// One-phase training at coarse_lr (the combined hospital & ED arm).
TrainOutput train_single(const FeatureMatrix& data, const TrainConfig& cfg);

struct Prediction {
    double probability = 0;
    bool positive = false; // probability >= threshold
};

/// Eval-mode scoring of schema-encoded records. Records must pass inclusion.
std::vector<Prediction> predict(const ModelArtifact& artifact,
                                std::span<const PatientRecord> records);
/// Scoring of an already-encoded matrix (columns must match the schema).
std::vector<Prediction> predict_encoded(const ModelArtifact& artifact, const Matrix& x);

/// Versioned JSON, written atomically (temp file + rename). load(save(a))
/// reproduces predictions bit-exactly.
void save_artifact(const ModelArtifact& artifact, const std::filesystem::path& path);
ModelArtifact load_artifact(const std::filesystem::path& path);

std::string artifact_to_json(const ModelArtifact& artifact);
ModelArtifact artifact_from_json(const std::string& text);

} // namespace triagenet
