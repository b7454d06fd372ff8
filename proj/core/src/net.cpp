#include "triagenet/net.hpp"

#include <cmath>

#include "triagenet/errors.hpp"

namespace triagenet {

namespace {

double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

DenseLayer make_dense(std::size_t in, std::size_t out, SplitMix64& rng) {
    DenseLayer d;
    d.w = Matrix(in, out);
    d.b.assign(out, 0.0);
    // Kaiming fan-in init for ReLU stacks.
    const double scale = std::sqrt(2.0 / static_cast<double>(in));
    for (std::size_t i = 0; i < in; ++i) {
        for (std::size_t j = 0; j < out; ++j) d.w.at(i, j) = scale * rng.normal();
    }
    return d;
}

BatchNormLayer make_bn(std::size_t width, double momentum) {
    BatchNormLayer bn;
    bn.gamma.assign(width, 1.0);
    bn.beta.assign(width, 0.0);
    bn.running_mean.assign(width, 0.0);
    bn.running_var.assign(width, 1.0);
    bn.momentum = momentum;
    return bn;
}

struct ForwardVisitor {
    Matrix x;
    Network* net; // null for the const eval path
    bool train;

    void dense(const DenseLayer& l, DenseLayer* mut) {
        if (x.cols() != l.w.rows()) {
            throw ValidationError("forward: batch width " + std::to_string(x.cols()) +
                                  " does not match dense input " + std::to_string(l.w.rows()));
        }
        if (mut) mut->cached_input = x;
        Matrix y = matmul(x, l.w);
        for (std::size_t i = 0; i < y.rows(); ++i) {
            auto row = y.row(i);
            for (std::size_t j = 0; j < row.size(); ++j) row[j] += l.b[j];
        }
        x = std::move(y);
    }

    void batchnorm(const BatchNormLayer& l, BatchNormLayer* mut) {
        const std::size_t m = x.rows(), n = x.cols();
        if (n != l.gamma.size()) throw ValidationError("forward: batch-norm width mismatch");
        if (train) {
            std::vector<double> mean(n, 0.0), var(n, 0.0), inv_std(n);
            for (std::size_t i = 0; i < m; ++i) {
                const auto row = x.row(i);
                for (std::size_t j = 0; j < n; ++j) mean[j] += row[j];
            }
            for (std::size_t j = 0; j < n; ++j) mean[j] /= static_cast<double>(m);
            for (std::size_t i = 0; i < m; ++i) {
                const auto row = x.row(i);
                for (std::size_t j = 0; j < n; ++j) {
                    const double d = row[j] - mean[j];
                    var[j] += d * d;
                }
            }
            for (std::size_t j = 0; j < n; ++j) {
                var[j] /= static_cast<double>(m); // population variance
                inv_std[j] = 1.0 / std::sqrt(var[j] + l.eps);
            }
            Matrix xhat(m, n);
            for (std::size_t i = 0; i < m; ++i) {
                const auto row = x.row(i);
                auto out = xhat.row(i);
                for (std::size_t j = 0; j < n; ++j) out[j] = (row[j] - mean[j]) * inv_std[j];
            }
            for (std::size_t i = 0; i < m; ++i) {
                auto row = x.row(i);
                const auto xh = xhat.row(i);
                for (std::size_t j = 0; j < n; ++j) row[j] = l.gamma[j] * xh[j] + l.beta[j];
            }
            if (mut) {
                for (std::size_t j = 0; j < n; ++j) {
                    mut->running_mean[j] =
                        (1.0 - l.momentum) * l.running_mean[j] + l.momentum * mean[j];
                    mut->running_var[j] =
                        (1.0 - l.momentum) * l.running_var[j] + l.momentum * var[j];
                }
                mut->cached_xhat = std::move(xhat);
                mut->cached_inv_std = std::move(inv_std);
            }
        } else {
            for (std::size_t i = 0; i < m; ++i) {
                auto row = x.row(i);
                for (std::size_t j = 0; j < n; ++j) {
                    const double xhat =
                        (row[j] - l.running_mean[j]) / std::sqrt(l.running_var[j] + l.eps);
                    row[j] = l.gamma[j] * xhat + l.beta[j];
                }
            }
        }
    }

    void dropout(const DropoutLayer& l, DropoutLayer* mut) {
        if (!train || l.rate <= 0.0) return;
        if (l.rate >= 1.0) throw ValidationError("dropout rate must be < 1");
        const std::size_t m = x.rows(), n = x.cols();
        const bool reuse = net && net->freeze_dropout_masks && l.mask.rows() == m &&
                           l.mask.cols() == n;
        if (mut && !reuse) {
            const double keep_scale = 1.0 / (1.0 - l.rate);
            Matrix mask(m, n);
            for (std::size_t i = 0; i < m; ++i) {
                auto row = mask.row(i);
                for (std::size_t j = 0; j < n; ++j) {
                    row[j] = net->dropout_rng.bernoulli(l.rate) ? 0.0 : keep_scale;
                }
            }
            mut->mask = std::move(mask);
        }
        const Matrix& mask = mut ? mut->mask : l.mask;
        for (std::size_t i = 0; i < m; ++i) {
            auto row = x.row(i);
            const auto mrow = mask.row(i);
            for (std::size_t j = 0; j < n; ++j) row[j] *= mrow[j];
        }
    }

    void relu(const ReluLayer& l, ReluLayer* mut) {
        (void)l;
        if (mut) mut->cached_input = x;
        for (std::size_t i = 0; i < x.rows(); ++i) {
            auto row = x.row(i);
            for (double& v : row) v = v > 0.0 ? v : 0.0;
        }
    }
};

std::vector<double> run_forward(ForwardVisitor& v, std::vector<Layer>* mut_layers,
                                const std::vector<Layer>& layers) {
    for (std::size_t li = 0; li < layers.size(); ++li) {
        Layer* mut = mut_layers ? &(*mut_layers)[li] : nullptr;
        std::visit(
            [&](const auto& layer) {
                using T = std::decay_t<decltype(layer)>;
                T* mptr = mut ? &std::get<T>(*mut) : nullptr;
                if constexpr (std::is_same_v<T, DenseLayer>) {
                    v.dense(layer, mptr);
                } else if constexpr (std::is_same_v<T, BatchNormLayer>) {
                    v.batchnorm(layer, mptr);
                } else if constexpr (std::is_same_v<T, DropoutLayer>) {
                    v.dropout(layer, mptr);
                } else {
                    v.relu(layer, mptr);
                }
            },
            layers[li]);
    }
    if (v.x.cols() != 1) throw ValidationError("network must end in a single output unit");
    std::vector<double> probs(v.x.rows());
    for (std::size_t i = 0; i < probs.size(); ++i) probs[i] = sigmoid(v.x.at(i, 0));
    return probs;
}

} // namespace

std::size_t Network::input_dim() const {
    for (const auto& l : layers) {
        if (const auto* d = std::get_if<DenseLayer>(&l)) return d->w.rows();
    }
    throw ValidationError("network has no dense layer");
}

Network make_network(std::size_t input_dim, std::span<const std::size_t> hidden,
                     double dropout_rate, std::uint64_t seed, double bn_momentum) {
    Network net;
    net.dropout_rng = SplitMix64(derive_seed(seed, "net.dropout"));
    SplitMix64 init_rng(derive_seed(seed, "net.init"));
    std::size_t in = input_dim;
    for (const std::size_t h : hidden) {
        net.layers.emplace_back(make_dense(in, h, init_rng));
        net.layers.emplace_back(make_bn(h, bn_momentum));
        net.layers.emplace_back(ReluLayer{});
        net.layers.emplace_back(DropoutLayer{dropout_rate, {}});
        in = h;
    }
    net.layers.emplace_back(make_dense(in, 1, init_rng));
    return net;
}

Network make_default_network(std::size_t input_dim, double dropout_rate, std::uint64_t seed,
                             double bn_momentum) {
    const std::size_t hidden[] = {300, 100};
    return make_network(input_dim, hidden, dropout_rate, seed, bn_momentum);
}

std::vector<double> forward(Network& net, const Matrix& batch) {
    if (net.mode == Mode::train && batch.rows() < 2) {
        throw ValidationError("train-mode forward needs at least 2 rows");
    }
    ForwardVisitor v{batch, &net, net.mode == Mode::train};
    auto probs = run_forward(v, &net.layers, net.layers);
    net.cached_probs = probs;
    return probs;
}

std::vector<double> forward_eval(const Network& net, const Matrix& batch) {
    ForwardVisitor v{batch, nullptr, false};
    return run_forward(v, nullptr, net.layers);
}

double bce_loss(std::span<const double> probs, std::span<const std::uint8_t> labels) {
    if (probs.size() != labels.size()) throw ValidationError("bce_loss: length mismatch");
    if (probs.empty()) throw ValidationError("bce_loss: empty input");
    constexpr double kClamp = 1e-7;
    double sum = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const double p = std::clamp(probs[i], kClamp, 1.0 - kClamp);
        sum += labels[i] ? -std::log(p) : -std::log(1.0 - p);
    }
    return sum / static_cast<double>(probs.size());
}

GradientSet backward(Network& net, const Matrix& batch, std::span<const std::uint8_t> labels) {
    if (net.cached_probs.size() != batch.rows() || labels.size() != batch.rows()) {
        throw ValidationError("backward: no cached forward pass for this batch");
    }
    GradientSet grads;
    grads.layers.resize(net.layers.size());

    const std::size_t m = batch.rows();
    // d(mean BCE)/d(logit) with the sigmoid folded in.
    Matrix delta(m, 1);
    for (std::size_t i = 0; i < m; ++i) {
        delta.at(i, 0) = (net.cached_probs[i] - static_cast<double>(labels[i])) /
                         static_cast<double>(m);
    }

    for (std::size_t li = net.layers.size(); li-- > 0;) {
        LayerGrads& g = grads.layers[li];
        std::visit(
            [&](auto& layer) {
                using T = std::decay_t<decltype(layer)>;
                if constexpr (std::is_same_v<T, DenseLayer>) {
                    if (layer.cached_input.rows() != m) {
                        throw ValidationError("backward: stale forward cache");
                    }
                    g.dw = matmul_transpose_a(layer.cached_input, delta);
                    g.db.assign(layer.b.size(), 0.0);
                    for (std::size_t i = 0; i < m; ++i) {
                        const auto row = delta.row(i);
                        for (std::size_t j = 0; j < g.db.size(); ++j) g.db[j] += row[j];
                    }
                    delta = matmul_transpose_b(delta, layer.w);
                } else if constexpr (std::is_same_v<T, BatchNormLayer>) {
                    if (layer.cached_xhat.rows() != m) {
                        throw ValidationError("backward: stale forward cache");
                    }
                    const std::size_t n = layer.gamma.size();
                    g.dgamma.assign(n, 0.0);
                    g.dbeta.assign(n, 0.0);
                    std::vector<double> sum_dxhat(n, 0.0), sum_dxhat_xhat(n, 0.0);
                    for (std::size_t i = 0; i < m; ++i) {
                        const auto d = delta.row(i);
                        const auto xh = layer.cached_xhat.row(i);
                        for (std::size_t j = 0; j < n; ++j) {
                            g.dgamma[j] += d[j] * xh[j];
                            g.dbeta[j] += d[j];
                            const double dxhat = d[j] * layer.gamma[j];
                            sum_dxhat[j] += dxhat;
                            sum_dxhat_xhat[j] += dxhat * xh[j];
                        }
                    }
                    const double inv_m = 1.0 / static_cast<double>(m);
                    for (std::size_t i = 0; i < m; ++i) {
                        auto d = delta.row(i);
                        const auto xh = layer.cached_xhat.row(i);
                        for (std::size_t j = 0; j < n; ++j) {
                            const double dxhat = d[j] * layer.gamma[j];
                            d[j] = layer.cached_inv_std[j] *
                                   (dxhat - inv_m * sum_dxhat[j] -
                                    xh[j] * inv_m * sum_dxhat_xhat[j]);
                        }
                    }
                } else if constexpr (std::is_same_v<T, DropoutLayer>) {
                    if (layer.rate > 0.0) {
                        if (layer.mask.rows() != m) {
                            throw ValidationError("backward: stale forward cache");
                        }
                        for (std::size_t i = 0; i < m; ++i) {
                            auto d = delta.row(i);
                            const auto mk = layer.mask.row(i);
                            for (std::size_t j = 0; j < d.size(); ++j) d[j] *= mk[j];
                        }
                    }
                } else { // ReluLayer
                    if (layer.cached_input.rows() != m) {
                        throw ValidationError("backward: stale forward cache");
                    }
                    for (std::size_t i = 0; i < m; ++i) {
                        auto d = delta.row(i);
                        const auto in = layer.cached_input.row(i);
                        for (std::size_t j = 0; j < d.size(); ++j) {
                            if (in[j] <= 0.0) d[j] = 0.0;
                        }
                    }
                }
            },
            net.layers[li]);
    }
    return grads;
}

AdamState make_adam(const Network& net, double lr) {
    AdamState st;
    st.lr = lr;
    st.m.resize(net.layers.size());
    st.v.resize(net.layers.size());
    for (std::size_t li = 0; li < net.layers.size(); ++li) {
        if (const auto* d = std::get_if<DenseLayer>(&net.layers[li])) {
            st.m[li].dw = Matrix(d->w.rows(), d->w.cols());
            st.m[li].db.assign(d->b.size(), 0.0);
            st.v[li].dw = Matrix(d->w.rows(), d->w.cols());
            st.v[li].db.assign(d->b.size(), 0.0);
        } else if (const auto* bn = std::get_if<BatchNormLayer>(&net.layers[li])) {
            st.m[li].dgamma.assign(bn->gamma.size(), 0.0);
            st.m[li].dbeta.assign(bn->beta.size(), 0.0);
            st.v[li].dgamma.assign(bn->gamma.size(), 0.0);
            st.v[li].dbeta.assign(bn->beta.size(), 0.0);
        }
    }
    return st;
}

namespace {

void check_finite(std::span<const double> g) {
    for (const double v : g) {
        if (!std::isfinite(v)) throw NumericError("optimizer step: non-finite gradient");
    }
}

void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, const AdamState& st, double corr1, double corr2) {
    for (std::size_t i = 0; i < param.size(); ++i) {
        m[i] = st.beta1 * m[i] + (1.0 - st.beta1) * grad[i];
        v[i] = st.beta2 * v[i] + (1.0 - st.beta2) * grad[i] * grad[i];
        const double mhat = m[i] / corr1;
        const double vhat = v[i] / corr2;
        param[i] -= st.lr * mhat / (std::sqrt(vhat) + st.eps);
    }
}

std::span<double> mat_span(Matrix& m) { return {m.data(), m.rows() * m.cols()}; }
std::span<const double> mat_span(const Matrix& m) { return {m.data(), m.rows() * m.cols()}; }

} // namespace

void adam_step(AdamState& state, Network& net, const GradientSet& grads) {
    if (grads.layers.size() != net.layers.size()) {
        throw ValidationError("optimizer step: gradient/layer count mismatch");
    }
    // Validate everything before mutating anything.
    for (std::size_t li = 0; li < net.layers.size(); ++li) {
        const LayerGrads& g = grads.layers[li];
        if (const auto* d = std::get_if<DenseLayer>(&net.layers[li])) {
            if (g.dw.rows() != d->w.rows() || g.dw.cols() != d->w.cols() ||
                g.db.size() != d->b.size()) {
                throw ValidationError("optimizer step: dense gradient shape mismatch");
            }
            check_finite(mat_span(g.dw));
            check_finite(g.db);
        } else if (const auto* bn = std::get_if<BatchNormLayer>(&net.layers[li])) {
            if (g.dgamma.size() != bn->gamma.size() || g.dbeta.size() != bn->beta.size()) {
                throw ValidationError("optimizer step: batch-norm gradient shape mismatch");
            }
            check_finite(g.dgamma);
            check_finite(g.dbeta);
        }
    }

    const long t = state.step + 1;
    const double corr1 = 1.0 - std::pow(state.beta1, static_cast<double>(t));
    const double corr2 = 1.0 - std::pow(state.beta2, static_cast<double>(t));
    for (std::size_t li = 0; li < net.layers.size(); ++li) {
        const LayerGrads& g = grads.layers[li];
        if (auto* d = std::get_if<DenseLayer>(&net.layers[li])) {
            adam_update(mat_span(d->w), mat_span(g.dw), mat_span(state.m[li].dw),
                        mat_span(state.v[li].dw), state, corr1, corr2);
            adam_update(d->b, g.db, state.m[li].db, state.v[li].db, state, corr1, corr2);
        } else if (auto* bn = std::get_if<BatchNormLayer>(&net.layers[li])) {
            adam_update(bn->gamma, g.dgamma, state.m[li].dgamma, state.v[li].dgamma, state,
                        corr1, corr2);
            adam_update(bn->beta, g.dbeta, state.m[li].dbeta, state.v[li].dbeta, state, corr1,
                        corr2);
        }
    }
    state.step = t;
}

} // namespace triagenet
