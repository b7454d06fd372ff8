#include "triagenet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include <json.hpp>

#include "triagenet/errors.hpp"
#include "triagenet/rng.hpp"

namespace triagenet {

ConfusionCounts confusion_at_threshold(std::span<const double> probs,
                                       std::span<const std::uint8_t> labels, double threshold) {
    if (probs.size() != labels.size()) {
        throw ValidationError("confusion_at_threshold: length mismatch");
    }
    if (probs.empty()) throw ValidationError("confusion_at_threshold: empty input");
    ConfusionCounts c;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const bool predicted = probs[i] >= threshold;
        if (labels[i]) {
            (predicted ? c.tp : c.fn)++;
        } else {
            (predicted ? c.fp : c.tn)++;
        }
    }
    return c;
}

double gap(double sensitivity, double specificity) {
    return (1.0 - sensitivity) + (1.0 - specificity);
}

double mcc(const ConfusionCounts& c) {
    const double tp = static_cast<double>(c.tp), tn = static_cast<double>(c.tn);
    const double fp = static_cast<double>(c.fp), fn = static_cast<double>(c.fn);
    const double denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
    if (denom == 0.0) return 0.0;
    return (tp * tn - fp * fn) / std::sqrt(denom);
}

namespace {

double ratio(std::size_t num, std::size_t denom, const char* what) {
    if (denom == 0) {
        throw ValidationError(std::string(what) + " undefined: zero denominator");
    }
    return static_cast<double>(num) / static_cast<double>(denom);
}

} // namespace

double sensitivity(const ConfusionCounts& c) { return ratio(c.tp, c.tp + c.fn, "sensitivity"); }
double specificity(const ConfusionCounts& c) { return ratio(c.tn, c.tn + c.fp, "specificity"); }
double ppv(const ConfusionCounts& c) { return ratio(c.tp, c.tp + c.fp, "ppv"); }
double npv(const ConfusionCounts& c) { return ratio(c.tn, c.tn + c.fn, "npv"); }

double auc(std::span<const double> probs, std::span<const std::uint8_t> labels) {
    if (probs.size() != labels.size()) throw ValidationError("auc: length mismatch");
    const std::size_t n = probs.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return probs[a] < probs[b]; });

    // Midrank rank-sum; midranks are multiples of 1/2, so the statistic is
    // exact in double arithmetic.
    double pos_rank_sum = 0;
    std::size_t n_pos = 0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && probs[order[j + 1]] == probs[order[i]]) ++j;
        const double midrank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (std::size_t k = i; k <= j; ++k) {
            if (labels[order[k]]) {
                pos_rank_sum += midrank;
                ++n_pos;
            }
        }
        i = j + 1;
    }
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) throw ValidationError("auc: needs both classes present");
    const double u = pos_rank_sum -
                     static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0) / 2.0;
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double youden_threshold(std::span<const double> probs, std::span<const std::uint8_t> labels) {
    if (probs.size() != labels.size() || probs.empty()) {
        throw ValidationError("youden_threshold: bad input");
    }
    std::vector<double> thresholds(probs.begin(), probs.end());
    std::sort(thresholds.begin(), thresholds.end());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

    const auto n_pos = static_cast<double>(
        std::count(labels.begin(), labels.end(), std::uint8_t{1}));
    const auto n_neg = static_cast<double>(labels.size()) - n_pos;
    if (n_pos == 0 || n_neg == 0) throw ValidationError("youden_threshold: single-class input");

    double best = thresholds.front();
    double best_j = -2.0;
    for (const double t : thresholds) {
        std::size_t tp = 0, tn = 0;
        for (std::size_t i = 0; i < probs.size(); ++i) {
            const bool predicted = probs[i] >= t;
            if (labels[i] && predicted) ++tp;
            if (!labels[i] && !predicted) ++tn;
        }
        const double j = static_cast<double>(tp) / n_pos + static_cast<double>(tn) / n_neg - 1.0;
        if (j > best_j) {
            best_j = j;
            best = t;
        }
    }
    return best;
}

std::string_view to_token(MetricKind m) {
    switch (m) {
        case MetricKind::auc: return "auc";
        case MetricKind::sensitivity: return "sensitivity";
        case MetricKind::specificity: return "specificity";
        case MetricKind::gap: return "gap";
        case MetricKind::ppv: return "ppv";
        case MetricKind::npv: return "npv";
        case MetricKind::mcc: return "mcc";
    }
    return "?";
}

namespace {

std::optional<double> metric_on(MetricKind kind, std::span<const double> probs,
                                std::span<const std::uint8_t> labels, double threshold) {
    try {
        switch (kind) {
            case MetricKind::auc: return auc(probs, labels);
            case MetricKind::mcc: return mcc(confusion_at_threshold(probs, labels, threshold));
            case MetricKind::sensitivity:
                return sensitivity(confusion_at_threshold(probs, labels, threshold));
            case MetricKind::specificity:
                return specificity(confusion_at_threshold(probs, labels, threshold));
            case MetricKind::gap: {
                const auto c = confusion_at_threshold(probs, labels, threshold);
                return gap(sensitivity(c), specificity(c));
            }
            case MetricKind::ppv: return ppv(confusion_at_threshold(probs, labels, threshold));
            case MetricKind::npv: return npv(confusion_at_threshold(probs, labels, threshold));
        }
    } catch (const ValidationError&) {
        return std::nullopt; // undefined on this (re)sample
    }
    return std::nullopt;
}

CiInterval percentile_interval(std::vector<double>& values, double point) {
    std::sort(values.begin(), values.end());
    const auto b = values.size();
    const auto lo_idx = static_cast<std::size_t>(std::floor(0.025 * static_cast<double>(b - 1)));
    const auto hi_idx = static_cast<std::size_t>(std::ceil(0.975 * static_cast<double>(b - 1)));
    CiInterval ci{values[lo_idx], values[hi_idx]};
    ci.lower = std::min(ci.lower, point);
    ci.upper = std::max(ci.upper, point);
    return ci;
}

} // namespace

CiInterval bootstrap_ci(std::span<const double> probs, std::span<const std::uint8_t> labels,
                        MetricKind metric, double threshold, int n_boot, std::uint64_t seed) {
    if (n_boot < 1) throw ValidationError("bootstrap_ci: n_boot must be >= 1");
    const auto point = metric_on(metric, probs, labels, threshold);
    if (!point) throw ValidationError("bootstrap_ci: metric undefined on the full sample");

    std::vector<std::size_t> pos_idx, neg_idx;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        (labels[i] ? pos_idx : neg_idx).push_back(i);
    }

    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(n_boot));
    std::vector<double> rp(probs.size());
    std::vector<std::uint8_t> rl(labels.size());
    std::size_t skipped = 0;
    for (int b = 0; b < n_boot; ++b) {
        SplitMix64 rng(derive_seed(seed, "bootstrap", static_cast<std::uint64_t>(b)));
        std::size_t k = 0;
        for (std::size_t t = 0; t < pos_idx.size(); ++t, ++k) {
            const std::size_t src = pos_idx[rng.below(pos_idx.size())];
            rp[k] = probs[src];
            rl[k] = 1;
        }
        for (std::size_t t = 0; t < neg_idx.size(); ++t, ++k) {
            const std::size_t src = neg_idx[rng.below(neg_idx.size())];
            rp[k] = probs[src];
            rl[k] = 0;
        }
        const auto v = metric_on(metric, rp, rl, threshold);
        if (v) {
            values.push_back(*v);
        } else {
            ++skipped;
        }
    }
    if (skipped * 2 > static_cast<std::size_t>(n_boot)) {
        throw ValidationError("bootstrap_ci: metric undefined in more than half the resamples");
    }
    return percentile_interval(values, *point);
}

MetricsReport evaluate_predictions(std::span<const double> probs,
                                   std::span<const std::uint8_t> labels,
                                   const EvaluateOptions& options) {
    if (probs.size() != labels.size() || probs.empty()) {
        throw ValidationError("evaluate: bad prediction/label input");
    }
    MetricsReport r;
    r.threshold = options.threshold;
    r.n_rows = probs.size();
    r.n_positive = static_cast<std::size_t>(
        std::count(labels.begin(), labels.end(), std::uint8_t{1}));

    const auto c = confusion_at_threshold(probs, labels, options.threshold);
    r.auc.value = auc(probs, labels);
    r.sensitivity.value = sensitivity(c);
    r.specificity.value = specificity(c);
    r.gap.value = gap(r.sensitivity.value, r.specificity.value);
    r.ppv.value = ppv(c);
    r.npv.value = npv(c);
    r.mcc.value = mcc(c);
    r.youden_threshold = youden_threshold(probs, labels);

    // One shared set of stratified resamples drives all seven intervals.
    std::vector<std::size_t> pos_idx, neg_idx;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        (labels[i] ? pos_idx : neg_idx).push_back(i);
    }
    constexpr MetricKind kKinds[] = {MetricKind::auc, MetricKind::sensitivity,
                                     MetricKind::specificity, MetricKind::gap, MetricKind::ppv,
                                     MetricKind::npv, MetricKind::mcc};
    std::vector<std::vector<double>> samples(7);
    std::vector<std::size_t> skipped(7, 0);
    std::vector<double> rp(probs.size());
    std::vector<std::uint8_t> rl(labels.size());
    for (int b = 0; b < options.n_boot; ++b) {
        SplitMix64 rng(derive_seed(options.seed, "bootstrap", static_cast<std::uint64_t>(b)));
        std::size_t k = 0;
        for (std::size_t t = 0; t < pos_idx.size(); ++t, ++k) {
            rp[k] = probs[pos_idx[rng.below(pos_idx.size())]];
            rl[k] = 1;
        }
        for (std::size_t t = 0; t < neg_idx.size(); ++t, ++k) {
            rp[k] = probs[neg_idx[rng.below(neg_idx.size())]];
            rl[k] = 0;
        }
        for (int m = 0; m < 7; ++m) {
            const auto v = metric_on(kKinds[m], rp, rl, options.threshold);
            if (v) {
                samples[m].push_back(*v);
            } else {
                ++skipped[m];
            }
        }
    }
    MetricValue* slots[7] = {&r.auc, &r.sensitivity, &r.specificity, &r.gap,
                             &r.ppv, &r.npv, &r.mcc};
    for (int m = 0; m < 7; ++m) {
        if (skipped[m] * 2 > static_cast<std::size_t>(options.n_boot)) {
            throw ValidationError(std::string("bootstrap: ") +
                                  std::string(to_token(kKinds[m])) +
                                  " undefined in more than half the resamples");
        }
        slots[m]->ci = percentile_interval(samples[m], slots[m]->value);
    }
    return r;
}

std::vector<PatientRecord> ablate_mechanism(std::span<const PatientRecord> records,
                                            InjuryMechanism mechanism) {
    std::vector<PatientRecord> out;
    out.reserve(records.size());
    for (const auto& r : records) {
        if (r.injury_mechanism != mechanism) out.push_back(r);
    }
    return out;
}

std::vector<PatientRecord> ablate_mechanism(std::span<const PatientRecord> records,
                                            const std::string& mechanism_name) {
    const auto m = mechanism_from_name(mechanism_name);
    if (!m) throw ValidationError("unknown injury mechanism: '" + mechanism_name + "'");
    return ablate_mechanism(records, *m);
}

namespace {

nlohmann::json metric_json(const MetricValue& v) {
    return {{"value", v.value}, {"ci_lower", v.ci.lower}, {"ci_upper", v.ci.upper}};
}

MetricValue metric_from_json(const nlohmann::json& j) {
    return {j.at("value").get<double>(),
            {j.at("ci_lower").get<double>(), j.at("ci_upper").get<double>()}};
}

} // namespace

std::string report_to_json(const MetricsReport& r) {
    nlohmann::json j;
    j["label"] = r.label;
    j["auc"] = metric_json(r.auc);
    j["sensitivity"] = metric_json(r.sensitivity);
    j["specificity"] = metric_json(r.specificity);
    j["gap"] = metric_json(r.gap);
    j["ppv"] = metric_json(r.ppv);
    j["npv"] = metric_json(r.npv);
    j["mcc"] = metric_json(r.mcc);
    j["threshold"] = r.threshold;
    j["youden_threshold"] = r.youden_threshold;
    j["n_rows"] = r.n_rows;
    j["n_positive"] = r.n_positive;
    return j.dump();
}

MetricsReport report_from_json(const std::string& text) {
    MetricsReport r;
    try {
        const auto j = nlohmann::json::parse(text);
        r.label = j.at("label").get<std::string>();
        r.auc = metric_from_json(j.at("auc"));
        r.sensitivity = metric_from_json(j.at("sensitivity"));
        r.specificity = metric_from_json(j.at("specificity"));
        r.gap = metric_from_json(j.at("gap"));
        r.ppv = metric_from_json(j.at("ppv"));
        r.npv = metric_from_json(j.at("npv"));
        r.mcc = metric_from_json(j.at("mcc"));
        r.threshold = j.at("threshold").get<double>();
        r.youden_threshold = j.at("youden_threshold").get<double>();
        r.n_rows = j.at("n_rows").get<std::size_t>();
        r.n_positive = j.at("n_positive").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("report json: ") + e.what());
    }
    return r;
}

std::string report_table_header() {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-14s %-18s %-18s %-18s %-6s %-18s %-20s %-20s", "Model",
                  "AUC (95% CI)", "Sens. (95% CI)", "Spec. (95% CI)", "Gap", "PPV (95% CI)",
                  "NPV (95% CI)", "MCC (95% CI)");
    return buf;
}

std::string report_table_row(const MetricsReport& r) {
    auto two = [](const MetricValue& v) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.2f (%.2f-%.2f)", v.value, v.ci.lower, v.ci.upper);
        return std::string(buf);
    };
    auto three = [](const MetricValue& v) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.3f (%.3f-%.3f)", v.value, v.ci.lower, v.ci.upper);
        return std::string(buf);
    };
    char buf[512];
    std::snprintf(buf, sizeof buf, "%-14s %-18s %-18s %-18s %-6.2f %-18s %-20s %-20s",
                  r.label.c_str(), two(r.auc).c_str(), two(r.sensitivity).c_str(),
                  two(r.specificity).c_str(), r.gap.value, two(r.ppv).c_str(),
                  three(r.npv).c_str(), three(r.mcc).c_str());
    return buf;
}

} // namespace triagenet
