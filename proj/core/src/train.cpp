#include "triagenet/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "triagenet/errors.hpp"
#include "triagenet/rng.hpp"

namespace triagenet {

void TrainConfig::validate() const {
    if (!(fine_lr < coarse_lr)) throw ValidationError("train config: fine_lr must be < coarse_lr");
    if (!(coarse_lr > 0)) throw ValidationError("train config: coarse_lr must be positive");
    if (epochs_phase1 < 0 || epochs_phase2 < 0) {
        throw ValidationError("train config: epoch counts must be >= 0");
    }
    if (batch_size < 1) throw ValidationError("train config: batch_size must be >= 1");
    if (!(dropout_rate >= 0 && dropout_rate < 1)) {
        throw ValidationError("train config: dropout_rate must be in [0,1)");
    }
    if (smote_k < 1) throw ValidationError("train config: smote_k must be >= 1");
    if (smote_multiplier < 0) throw ValidationError("train config: smote_multiplier must be >= 0");
    if (!(threshold > 0 && threshold < 1)) {
        throw ValidationError("train config: threshold must be in (0,1)");
    }
}

namespace {

// One epoch of minibatch SGD over a fixed (x, labels) set. Rows are shuffled
// per epoch from a derived seed; a trailing 1-row remainder is folded into
// the previous batch (batch-norm needs >= 2 rows). Returns the mean
// train-mode loss over the epoch.
double run_epoch(Network& net, AdamState& opt, const Matrix& x,
                 std::span<const std::uint8_t> labels, int batch_size, std::uint64_t epoch_seed) {
    const std::size_t n = x.rows();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    SplitMix64 rng(epoch_seed);
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    double loss_sum = 0;
    std::size_t loss_rows = 0;
    std::size_t start = 0;
    while (start < n) {
        std::size_t end = std::min(n, start + static_cast<std::size_t>(batch_size));
        if (n - end == 1) end = n; // absorb a lone trailing row
        const std::size_t rows = end - start;
        if (rows < 2) break; // a 1-row set cannot be batch-normalized
        Matrix batch(rows, x.cols());
        std::vector<std::uint8_t> batch_labels(rows);
        for (std::size_t i = 0; i < rows; ++i) {
            const auto src = x.row(order[start + i]);
            std::copy(src.begin(), src.end(), batch.row(i).begin());
            batch_labels[i] = labels[order[start + i]];
        }
        const auto probs = forward(net, batch);
        loss_sum += bce_loss(probs, batch_labels) * static_cast<double>(rows);
        loss_rows += rows;
        const auto grads = backward(net, batch, batch_labels);
        adam_step(opt, net, grads);
        start = end;
    }
    if (loss_rows == 0) throw ValidationError("training set too small for one batch");
    return loss_sum / static_cast<double>(loss_rows);
}

double run_phase(Network& net, const Matrix& x, std::span<const std::uint8_t> labels,
                 const TrainConfig& cfg, int phase, double lr, int epochs,
                 std::vector<TrainLogEntry>& log) {
    AdamState opt = make_adam(net, lr);
    double last_loss = 0;
    for (int e = 0; e < epochs; ++e) {
        const std::uint64_t epoch_seed =
            derive_seed(cfg.seed, phase == 1 ? "train.phase1.epoch" : "train.phase2.epoch",
                        static_cast<std::uint64_t>(e));
        last_loss = run_epoch(net, opt, x, labels, cfg.batch_size, epoch_seed);
        log.push_back({phase, e + 1, last_loss});
    }
    return last_loss;
}

void strip_caches(Network& net) {
    for (auto& layer : net.layers) {
        std::visit(
            [](auto& l) {
                using T = std::decay_t<decltype(l)>;
                if constexpr (std::is_same_v<T, DenseLayer>) {
                    l.cached_input = Matrix();
                } else if constexpr (std::is_same_v<T, BatchNormLayer>) {
                    l.cached_xhat = Matrix();
                    l.cached_inv_std.clear();
                } else if constexpr (std::is_same_v<T, DropoutLayer>) {
                    l.mask = Matrix();
                } else {
                    l.cached_input = Matrix();
                }
            },
            layer);
    }
    net.cached_probs.clear();
}

ModelArtifact finish_artifact(Network net, const FeatureMatrix& schema_source,
                              const TrainConfig& cfg, const std::string& scope, double loss1,
                              double loss2) {
    net.mode = Mode::eval;
    strip_caches(net);
    ModelArtifact artifact;
    artifact.schema = schema_source.schema;
    artifact.net = std::move(net);
    artifact.config = cfg;
    artifact.scope = scope;
    artifact.phase1_final_loss = loss1;
    artifact.phase2_final_loss = loss2;
    return artifact;
}

} // namespace

TrainOutput train_transfer(const FeatureMatrix& hospital, const FeatureMatrix& ed,
                           const TrainConfig& cfg) {
    cfg.validate();
    if (hospital.schema != ed.schema) {
        throw ValidationError("train_transfer: hospital and ED matrices use different schemas");
    }
    if (ed.positives() < 2) {
        throw ValidationError("train_transfer: ED set needs at least 2 positive rows");
    }

    TrainOutput out;
    Network net = make_default_network(hospital.schema.column_count(), cfg.dropout_rate,
                                       derive_seed(cfg.seed, "train.net"), cfg.bn_momentum);

    const double loss1 = run_phase(net, hospital.x, hospital.labels, cfg, 1, cfg.coarse_lr,
                                   cfg.epochs_phase1, out.log);

    // Phase 2: fine-tune on the ED set augmented with synthetic mortality rows.
    double loss2 = 0;
    if (cfg.epochs_phase2 > 0) {
        std::vector<std::size_t> pos_idx;
        for (std::size_t i = 0; i < ed.labels.size(); ++i) {
            if (ed.labels[i]) pos_idx.push_back(i);
        }
        Matrix minority(pos_idx.size(), ed.x.cols());
        for (std::size_t i = 0; i < pos_idx.size(); ++i) {
            const auto src = ed.x.row(pos_idx[i]);
            std::copy(src.begin(), src.end(), minority.row(i).begin());
        }
        const auto n_synth = static_cast<std::size_t>(
            std::llround(cfg.smote_multiplier * static_cast<double>(pos_idx.size())));
        Matrix synthetic;
        if (n_synth > 0) {
            synthetic = smote_oversample(minority, cfg.smote_k, n_synth,
                                         derive_seed(cfg.seed, "train.smote"));
        }
        Matrix augmented(ed.rows() + synthetic.rows(), ed.x.cols());
        std::vector<std::uint8_t> augmented_labels(augmented.rows());
        for (std::size_t i = 0; i < ed.rows(); ++i) {
            const auto src = ed.x.row(i);
            std::copy(src.begin(), src.end(), augmented.row(i).begin());
            augmented_labels[i] = ed.labels[i];
        }
        for (std::size_t i = 0; i < synthetic.rows(); ++i) {
            const auto src = synthetic.row(i);
            std::copy(src.begin(), src.end(), augmented.row(ed.rows() + i).begin());
            augmented_labels[ed.rows() + i] = 1;
        }
        loss2 = run_phase(net, augmented, augmented_labels, cfg, 2, cfg.fine_lr,
                          cfg.epochs_phase2, out.log);
    }

    out.artifact = finish_artifact(std::move(net), hospital, cfg, "ed_only", loss1, loss2);
    return out;
}

TrainOutput train_single(const FeatureMatrix& data, const TrainConfig& cfg) {
    cfg.validate();
    if (data.positives() < 2) {
        throw ValidationError("train_single: needs at least 2 positive rows");
    }
    TrainOutput out;
    Network net = make_default_network(data.schema.column_count(), cfg.dropout_rate,
                                       derive_seed(cfg.seed, "train.net"), cfg.bn_momentum);
    const double loss1 = run_phase(net, data.x, data.labels, cfg, 1, cfg.coarse_lr,
                                   cfg.epochs_phase1, out.log);
    out.artifact = finish_artifact(std::move(net), data, cfg, "hospital_and_ed", loss1, 0.0);
    return out;
}

std::vector<Prediction> predict_encoded(const ModelArtifact& artifact, const Matrix& x) {
    if (x.cols() != artifact.schema.column_count()) {
        throw ValidationError("predict: matrix width does not match artifact schema");
    }
    const auto probs = forward_eval(artifact.net, x);
    std::vector<Prediction> out(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) {
        out[i] = {probs[i], probs[i] >= artifact.config.threshold};
    }
    return out;
}

std::vector<Prediction> predict(const ModelArtifact& artifact,
                                std::span<const PatientRecord> records) {
    const FeatureMatrix encoded = encode(records, artifact.schema, artifact.config.encode_policy);
    return predict_encoded(artifact, encoded.x);
}

// ----- persistence -----

namespace {

nlohmann::json matrix_to_json(const Matrix& m) {
    nlohmann::json j;
    j["rows"] = m.rows();
    j["cols"] = m.cols();
    j["data"] = std::vector<double>(m.data(), m.data() + m.rows() * m.cols());
    return j;
}

Matrix matrix_from_json(const nlohmann::json& j) {
    const auto rows = j.at("rows").get<std::size_t>();
    const auto cols = j.at("cols").get<std::size_t>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (data.size() != rows * cols) {
        throw ValidationError("artifact: matrix payload size does not match its shape");
    }
    Matrix m(rows, cols);
    std::copy(data.begin(), data.end(), m.data());
    return m;
}

nlohmann::json config_to_json(const TrainConfig& c) {
    nlohmann::json j;
    j["coarse_lr"] = c.coarse_lr;
    j["fine_lr"] = c.fine_lr;
    j["epochs_phase1"] = c.epochs_phase1;
    j["epochs_phase2"] = c.epochs_phase2;
    j["batch_size"] = c.batch_size;
    j["dropout_rate"] = c.dropout_rate;
    j["bn_momentum"] = c.bn_momentum;
    j["smote_k"] = c.smote_k;
    j["smote_multiplier"] = c.smote_multiplier;
    j["threshold"] = c.threshold;
    j["seed"] = c.seed;
    j["encode_policy"] = c.encode_policy == EncodePolicy::strict ? "strict" : "lenient";
    return j;
}

TrainConfig config_from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.coarse_lr = j.at("coarse_lr").get<double>();
    c.fine_lr = j.at("fine_lr").get<double>();
    c.epochs_phase1 = j.at("epochs_phase1").get<int>();
    c.epochs_phase2 = j.at("epochs_phase2").get<int>();
    c.batch_size = j.at("batch_size").get<int>();
    c.dropout_rate = j.at("dropout_rate").get<double>();
    c.bn_momentum = j.at("bn_momentum").get<double>();
    c.smote_k = j.at("smote_k").get<int>();
    c.smote_multiplier = j.at("smote_multiplier").get<double>();
    c.threshold = j.at("threshold").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.encode_policy = j.at("encode_policy").get<std::string>() == "strict"
                          ? EncodePolicy::strict
                          : EncodePolicy::lenient;
    return c;
}

} // namespace

std::string artifact_to_json(const ModelArtifact& artifact) {
    nlohmann::json j;
    j["format_version"] = artifact.format_version;
    j["schema"] = nlohmann::json::parse(schema_to_json(artifact.schema));
    j["config"] = config_to_json(artifact.config);
    j["age_group"] = std::string(to_token(artifact.age_group));
    j["scope"] = artifact.scope;
    j["phase1_final_loss"] = artifact.phase1_final_loss;
    j["phase2_final_loss"] = artifact.phase2_final_loss;

    nlohmann::json layers = nlohmann::json::array();
    for (const auto& layer : artifact.net.layers) {
        nlohmann::json l;
        std::visit(
            [&](const auto& v) {
                using T = std::decay_t<decltype(v)>;
                if constexpr (std::is_same_v<T, DenseLayer>) {
                    l["kind"] = "dense";
                    l["w"] = matrix_to_json(v.w);
                    l["b"] = v.b;
                } else if constexpr (std::is_same_v<T, BatchNormLayer>) {
                    l["kind"] = "batch_norm";
                    l["gamma"] = v.gamma;
                    l["beta"] = v.beta;
                    l["running_mean"] = v.running_mean;
                    l["running_var"] = v.running_var;
                    l["eps"] = v.eps;
                    l["momentum"] = v.momentum;
                } else if constexpr (std::is_same_v<T, DropoutLayer>) {
                    l["kind"] = "dropout";
                    l["rate"] = v.rate;
                } else {
                    l["kind"] = "relu";
                }
            },
            layer);
        layers.push_back(std::move(l));
    }
    j["layers"] = std::move(layers);
    return j.dump();
}

ModelArtifact artifact_from_json(const std::string& text) {
    ModelArtifact artifact;
    try {
        const auto j = nlohmann::json::parse(text);
        const int version = j.at("format_version").get<int>();
        if (version != artifact.format_version) {
            throw ValidationError("artifact format version " + std::to_string(version) +
                                  " is not supported (expected " +
                                  std::to_string(artifact.format_version) + ")");
        }
        artifact.schema = schema_from_json(j.at("schema").dump());
        artifact.config = config_from_json(j.at("config"));
        const auto group = age_group_from_token(j.at("age_group").get<std::string>());
        if (!group) throw ValidationError("artifact: unknown age_group");
        artifact.age_group = *group;
        artifact.scope = j.at("scope").get<std::string>();
        artifact.phase1_final_loss = j.at("phase1_final_loss").get<double>();
        artifact.phase2_final_loss = j.at("phase2_final_loss").get<double>();

        artifact.net.mode = Mode::eval;
        std::size_t next_width = artifact.schema.column_count();
        for (const auto& l : j.at("layers")) {
            const auto kind = l.at("kind").get<std::string>();
            if (kind == "dense") {
                DenseLayer d;
                d.w = matrix_from_json(l.at("w"));
                d.b = l.at("b").get<std::vector<double>>();
                if (d.w.cols() != d.b.size()) {
                    throw ValidationError("artifact: dense bias width mismatch");
                }
                if (d.w.rows() != next_width) {
                    throw ValidationError("artifact: dense layer does not compose with input");
                }
                next_width = d.w.cols();
                artifact.net.layers.emplace_back(std::move(d));
            } else if (kind == "batch_norm") {
                BatchNormLayer bn;
                bn.gamma = l.at("gamma").get<std::vector<double>>();
                bn.beta = l.at("beta").get<std::vector<double>>();
                bn.running_mean = l.at("running_mean").get<std::vector<double>>();
                bn.running_var = l.at("running_var").get<std::vector<double>>();
                bn.eps = l.at("eps").get<double>();
                bn.momentum = l.at("momentum").get<double>();
                if (bn.gamma.size() != next_width || bn.beta.size() != next_width ||
                    bn.running_mean.size() != next_width || bn.running_var.size() != next_width) {
                    throw ValidationError("artifact: batch-norm width mismatch");
                }
                artifact.net.layers.emplace_back(std::move(bn));
            } else if (kind == "dropout") {
                artifact.net.layers.emplace_back(DropoutLayer{l.at("rate").get<double>(), {}});
            } else if (kind == "relu") {
                artifact.net.layers.emplace_back(ReluLayer{});
            } else {
                throw ValidationError("artifact: unknown layer kind '" + kind + "'");
            }
        }
        if (next_width != 1) {
            throw ValidationError("artifact: network does not end in a single output unit");
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("artifact json: ") + e.what());
    }
    return artifact;
}

void save_artifact(const ModelArtifact& artifact, const std::filesystem::path& path) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw ValidationError("cannot open for writing: " + tmp.string());
        out << artifact_to_json(artifact) << '\n';
        if (!out) throw ValidationError("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

ModelArtifact load_artifact(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open artifact: " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return artifact_from_json(text);
}

} // namespace triagenet
