#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "triagenet/matrix.hpp"
#include "triagenet/record.hpp"

namespace triagenet {

/// Encoded column layout, fixed at fit time. Numeric columns carry the
/// training-set mean/SD used for standardization; one-hot groups carry the
/// category levels observed at fit time (one column per level, enum order);
/// binary columns pass through as 0/1.
struct FeatureSchema {
    enum class ColumnKind : std::uint8_t { numeric, onehot, binary };

    struct Column {
        ColumnKind kind;
        std::string name;      // "iss", "race=white", "comorbidity=obesity", ...
        int variable;          // FeatureVariable index
        int level;             // category index for onehot, flag index for binary
        double mean = 0.0;     // numeric only
        double sd = 1.0;       // numeric only; zero-variance columns store 1

        friend bool operator==(const Column&, const Column&) = default;
    };

    struct OneHotGroup {
        int variable;
        std::size_t first_column;
        std::vector<int> levels; // observed category indices, enum order

        friend bool operator==(const OneHotGroup&, const OneHotGroup&) = default;
    };

    std::vector<Column> columns;
    std::vector<OneHotGroup> groups;

    std::size_t column_count() const { return columns.size(); }
    std::vector<std::string> column_names() const;

    friend bool operator==(const FeatureSchema&, const FeatureSchema&) = default;
};

/// Dense encoded matrix with per-row mortality labels.
struct FeatureMatrix {
    FeatureSchema schema;
    Matrix x;
    std::vector<std::uint8_t> labels;

    std::size_t rows() const { return x.rows(); }
    std::size_t positives() const;
};

struct SplitSpec {
    double train_fraction = 0.7;
    std::uint64_t seed = 0;
    bool stratified = true; // per-class sampling, the study protocol
};

enum class EncodePolicy : std::uint8_t {
    strict,  // category unseen at fit time is an error
    lenient, // unseen category encodes as an all-zero one-hot group
};

/// Learns the column layout and numeric standardization statistics from the
/// given records (the training split). Population SD (divide by n); an SD of
/// zero is stored as 1. Records must be complete (inclusion-filtered).
/// Throws ValidationError on empty input.
FeatureSchema fit_schema(std::span<const PatientRecord> records);

/// Standardizes numerics with the schema's training statistics and expands
/// categoricals to one-hot columns. Labels come from label_mortality.
FeatureMatrix encode(std::span<const PatientRecord> records, const FeatureSchema& schema,
                     EncodePolicy policy = EncodePolicy::strict);

/// Class-stratified shuffle split: train takes round(train_fraction * count)
/// of each class, the remainder goes to test; deterministic per seed; the
/// union of the two index lists is a permutation of 0..n-1.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>>
stratified_split_indices(std::span<const std::uint8_t> labels, const SplitSpec& spec);

std::pair<FeatureMatrix, FeatureMatrix> stratified_split(const FeatureMatrix& m,
                                                         const SplitSpec& spec);

/// Linear interpolation x + lambda * (x' - x) between a minority row and one
/// of its k nearest minority neighbours (Euclidean), lambda uniform on [0,1].
/// Returns exactly n_synthetic rows. k is clamped to |minority| - 1; fewer
/// than two minority rows is an error.
Matrix smote_oversample(const Matrix& minority_rows, int k, std::size_t n_synthetic,
                        std::uint64_t seed);

/// Convex combination of two rows (exposed for tests).
std::vector<double> smote_interpolate(std::span<const double> x, std::span<const double> x_prime,
                                      double lambda);

/// Category index encoded in a one-hot group of an encoded row, or -1 when
/// the group is all zero (lenient-mode unseen category).
int onehot_decode(const FeatureMatrix& m, std::size_t row, const FeatureSchema::OneHotGroup& g);

/// Schema serialization (embedded in model artifacts).
std::string schema_to_json(const FeatureSchema& schema);
FeatureSchema schema_from_json(const std::string& json_text);

} // namespace triagenet
