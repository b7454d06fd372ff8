#pragma once

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "triagenet/matrix.hpp"
#include "triagenet/rng.hpp"

namespace triagenet {

enum class Mode : std::uint8_t { train, eval };

/// Fully connected layer; weights are (in x out), bias per output unit.
struct DenseLayer {
    Matrix w;
    std::vector<double> b;
    Matrix cached_input; // train-mode forward cache
};

/// Per-feature batch normalization placed after a dense layer, before the
/// activation. Train mode normalizes with batch statistics (population
/// variance) and updates the running estimates; eval mode uses the running
/// estimates.
struct BatchNormLayer {
    std::vector<double> gamma;
    std::vector<double> beta;
    std::vector<double> running_mean;
    std::vector<double> running_var;
    double eps = 1e-5;
    double momentum = 0.1;
    Matrix cached_xhat;
    std::vector<double> cached_inv_std;
};

/// Inverted dropout: kept units scale by 1/(1-rate) in train mode, eval mode
/// is the identity.
struct DropoutLayer {
    double rate = 0.3;
    Matrix mask; // 0 or 1/(1-rate), sampled per train-mode forward
};

struct ReluLayer {
    Matrix cached_input;
};

using Layer = std::variant<DenseLayer, BatchNormLayer, DropoutLayer, ReluLayer>;

/// Layer stack ending in a single logit that forward() squashes through a
/// sigmoid. Train-mode forward caches activations for backward() and mutates
/// BN running statistics; eval-mode inference through forward_eval is
/// read-only and safe to run concurrently.
struct Network {
    std::vector<Layer> layers;
    Mode mode = Mode::train;
    SplitMix64 dropout_rng{0};
    // Reuse previously sampled dropout masks instead of redrawing (used by
    // the finite-difference gradient checks).
    bool freeze_dropout_masks = false;
    std::vector<double> cached_probs;

    std::size_t input_dim() const;
};

/// The default topology: input -> Dense(300) -> BN -> ReLU -> Dropout ->
/// Dense(100) -> BN -> ReLU -> Dropout -> Dense(1) -> sigmoid.
/// Kaiming fan-in initialization, deterministic per seed.
Network make_default_network(std::size_t input_dim, double dropout_rate, std::uint64_t seed,
                             double bn_momentum = 0.1);

/// Arbitrary dense stack (for tests): hidden layer sizes with BN+ReLU+Dropout
/// after each hidden dense, then Dense(1).
Network make_network(std::size_t input_dim, std::span<const std::size_t> hidden,
                     double dropout_rate, std::uint64_t seed, double bn_momentum = 0.1);

/// Per-row probability of the positive class. Train mode requires >= 2 rows
/// (batch-norm variance); throws ValidationError on dimension mismatch.
std::vector<double> forward(Network& net, const Matrix& batch);

/// Eval-mode forward that never touches caches or running statistics.
std::vector<double> forward_eval(const Network& net, const Matrix& batch);

/// Mean binary cross-entropy with probabilities clamped to [1e-7, 1 - 1e-7].
double bce_loss(std::span<const double> probs, std::span<const std::uint8_t> labels);

/// Parameter gradients for one layer; empty tensors for layers without
/// parameters.
struct LayerGrads {
    Matrix dw;
    std::vector<double> db;
    std::vector<double> dgamma;
    std::vector<double> dbeta;
};

struct GradientSet {
    std::vector<LayerGrads> layers; // parallel to Network::layers
};

/// Exact gradients of bce_loss(forward(net, batch), labels) with respect to
/// every parameter. Requires the train-mode forward cache for this batch;
/// dropout masks from that forward pass are reused.
GradientSet backward(Network& net, const Matrix& batch, std::span<const std::uint8_t> labels);

/// Adaptive-moment optimizer state (first/second moment accumulators with
/// bias correction).
struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long step = 0;
    std::vector<LayerGrads> m;
    std::vector<LayerGrads> v;
};

AdamState make_adam(const Network& net, double lr);

/// One update step; increments the step counter. Non-finite gradient entries
/// abort the step (NumericError) leaving net and state untouched.
void adam_step(AdamState& state, Network& net, const GradientSet& grads);

} // namespace triagenet
