// triagenet: synthetic trauma cohorts, transfer-trained mortality models,
// evaluation reports and cohort statistics, end to end from the command line.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "triagenet/csv.hpp"
#include "triagenet/errors.hpp"
#include "triagenet/evaluate.hpp"
#include "triagenet/metrics.hpp"
#include "triagenet/pipeline.hpp"
#include "triagenet/record.hpp"
#include "triagenet/rng.hpp"
#include "triagenet/stats.hpp"
#include "triagenet/synth.hpp"
#include "triagenet/train.hpp"

namespace {

using namespace triagenet;

constexpr const char* kToolVersion = "1.0.0";

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

// ----- provenance -----

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ull;
    }
    return h;
}

/// Canonical dump of every parsed option of the active subcommand; equal
/// dumps mean equal effective configuration, so outputs with equal
/// provenance headers are byte-identical.
std::string config_fingerprint(const CLI::App& sub) {
    std::map<std::string, std::string> kv;
    for (const CLI::Option* opt : sub.get_options()) {
        if (opt->get_name().empty() || opt->count() == 0) continue;
        std::string joined;
        for (const auto& v : opt->results()) {
            if (!joined.empty()) joined += ';';
            joined += v;
        }
        kv[opt->get_name()] = joined;
    }
    std::string dump = sub.get_name();
    for (const auto& [k, v] : kv) {
        dump += '\n';
        dump += k;
        dump += '=';
        dump += v;
    }
    return dump;
}

struct Provenance {
    std::string command;
    std::string config_hash;
    std::uint64_t seed = 0;

    std::string header_line() const {
        char buf[160];
        std::snprintf(buf, sizeof buf, "provenance command=%s config_hash=%016llx seed=%llu version=%s",
                      command.c_str(), static_cast<unsigned long long>(fnv1a(config_hash)),
                      static_cast<unsigned long long>(seed), kToolVersion);
        return buf;
    }

    nlohmann::json to_json() const {
        char hash[24];
        std::snprintf(hash, sizeof hash, "%016llx",
                      static_cast<unsigned long long>(fnv1a(config_hash)));
        return {{"command", command},
                {"config_hash", hash},
                {"seed", seed},
                {"version", kToolVersion}};
    }
};

void atomic_write(const std::filesystem::path& path, const std::string& content) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw ValidationError("cannot open for writing: " + tmp.string());
        out << content;
        if (!out) throw ValidationError("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::string cohort_csv_string(std::span<const PatientRecord> records, const Provenance& prov) {
    std::ostringstream out;
    const std::string comments[] = {prov.header_line()};
    write_cohort_csv(out, records, comments);
    return out.str();
}

std::filesystem::path sibling(const std::filesystem::path& base, const std::string& suffix) {
    std::filesystem::path p = base;
    p.replace_extension();
    return p.string() + suffix;
}

// ----- shared option plumbing -----

struct CommonArgs {
    std::uint64_t seed = 0;
    std::string age_group = "all";
};

AgeGroup parse_age_group(const std::string& s) {
    const auto g = age_group_from_token(s);
    if (!g) throw CLI::ValidationError("--age-group", "expected children|adults|all");
    return *g;
}

std::vector<PatientRecord> load_cohort(const std::string& path) {
    return read_cohort_csv(std::filesystem::path(path));
}

struct SplitSets {
    std::vector<PatientRecord> train;
    std::vector<PatientRecord> test;
};

SplitSets split_cohort(const std::vector<PatientRecord>& records, double train_fraction,
                       std::uint64_t seed) {
    std::vector<std::uint8_t> labels(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        labels[i] = label_mortality(records[i].disposition) ? 1 : 0;
    }
    SplitSpec spec;
    spec.train_fraction = train_fraction;
    spec.seed = seed;
    const auto [train_idx, test_idx] = stratified_split_indices(labels, spec);
    SplitSets out;
    out.train.reserve(train_idx.size());
    out.test.reserve(test_idx.size());
    for (const auto i : train_idx) out.train.push_back(records[i]);
    for (const auto i : test_idx) out.test.push_back(records[i]);
    return out;
}

// ----- generate -----

struct GenerateArgs {
    std::string age_group = "adults";
    std::size_t n = 0;
    std::uint64_t seed = 0;
    std::string out;
    std::string spec_file;
    std::vector<std::string> sets;
    double mortality_rate = -1;
    double missingness_rate = -1;
};

int cmd_generate(const GenerateArgs& args, const Provenance& prov) {
    CohortSpec spec = default_spec(parse_age_group(args.age_group));
    if (!args.spec_file.empty()) spec = load_spec_file(args.spec_file, spec);
    for (const auto& kv : args.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            throw ValidationError("--set expects key=value, got '" + kv + "'");
        }
        apply_spec_override(spec, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (args.mortality_rate >= 0) spec.mortality_rate = args.mortality_rate;
    if (args.missingness_rate >= 0) spec.missingness_rate = args.missingness_rate;
    spec.n_records = args.n;
    spec.seed = derive_seed(args.seed, "cohort");
    spec.validate();

    const auto records = generate(spec);
    atomic_write(args.out, cohort_csv_string(records, prov));

    nlohmann::json sidecar = nlohmann::json::parse(spec_to_json(spec));
    sidecar["provenance"] = prov.to_json();
    atomic_write(sibling(args.out, ".spec.json"), sidecar.dump(2) + "\n");
    std::cout << "wrote " << records.size() << " records to " << args.out << "\n";
    return kExitOk;
}

// ----- preprocess -----

struct PreprocessArgs {
    std::string cohort;
    std::string age_group = "all";
    std::uint64_t seed = 0;
    double train_fraction = 0.7;
    std::string summary_out;
    std::string excluded_out;
    std::string train_out;
    std::string test_out;
};

int cmd_preprocess(const PreprocessArgs& args, const Provenance& prov) {
    const auto cohort = load_cohort(args.cohort);
    const AgeGroup group = parse_age_group(args.age_group);
    std::vector<PatientRecord> in_group;
    for (const auto& r : cohort) {
        if (in_age_group(r, group)) in_group.push_back(r);
    }
    const auto included = filter_included(in_group);
    const auto excluded = filter_excluded(in_group);

    std::vector<PatientRecord> hospital, ed;
    for (const auto& r : included) {
        (assign_scope(r) == OutcomeScope::ed_only ? ed : hospital).push_back(r);
    }

    nlohmann::json j;
    j["provenance"] = prov.to_json();
    j["total_rows"] = cohort.size();
    j["age_group"] = args.age_group;
    j["age_group_rows"] = in_group.size();
    j["included"] = included.size();
    j["excluded"] = excluded.size();
    j["scopes"] = {{"ed_only", ed.size()}, {"hospital_and_ed", hospital.size()}};

    auto split_stats = [&](const std::vector<PatientRecord>& recs, const char* label) {
        const auto sets = split_cohort(recs, args.train_fraction,
                                       derive_seed(args.seed, std::string("split.") + label));
        auto positives = [](const std::vector<PatientRecord>& v) {
            std::size_t c = 0;
            for (const auto& r : v) c += label_mortality(r.disposition) ? 1 : 0;
            return c;
        };
        return nlohmann::json{{"train_rows", sets.train.size()},
                              {"test_rows", sets.test.size()},
                              {"train_positives", positives(sets.train)},
                              {"test_positives", positives(sets.test)}};
    };
    j["splits"] = {{"ed_only", split_stats(ed, "ed")},
                   {"hospital_and_ed", split_stats(hospital, "hospital")}};

    if (!args.summary_out.empty()) atomic_write(args.summary_out, j.dump(2) + "\n");
    if (!args.excluded_out.empty()) atomic_write(args.excluded_out, cohort_csv_string(excluded, prov));
    if (!args.train_out.empty() || !args.test_out.empty()) {
        const auto sets = split_cohort(included, args.train_fraction,
                                       derive_seed(args.seed, "split.all"));
        if (!args.train_out.empty()) atomic_write(args.train_out, cohort_csv_string(sets.train, prov));
        if (!args.test_out.empty()) atomic_write(args.test_out, cohort_csv_string(sets.test, prov));
    }
    std::cout << j.dump(2) << "\n";
    return kExitOk;
}

// ----- train -----

struct TrainArgs {
    std::string cohort;
    std::string scope = "ed_only";
    std::string age_group = "all";
    std::string out;
    double train_fraction = 0.7;
    TrainConfig cfg;
    bool lenient = false;
};

int cmd_train(const TrainArgs& args, const Provenance& prov) {
    const auto scope = scope_from_token(args.scope);
    if (!scope) throw ValidationError("--scope expects ed_only|hospital_and_ed");
    const AgeGroup group = parse_age_group(args.age_group);

    TrainConfig cfg = args.cfg;
    cfg.encode_policy = args.lenient ? EncodePolicy::lenient : EncodePolicy::strict;
    cfg.validate();

    const auto cohort = load_cohort(args.cohort);
    std::vector<PatientRecord> in_group;
    for (const auto& r : cohort) {
        if (in_age_group(r, group)) in_group.push_back(r);
    }
    const auto included = filter_included(in_group);
    const auto excluded = filter_excluded(in_group);
    if (included.empty()) throw ValidationError("no records pass the inclusion filter");

    TrainOutput result;
    std::vector<PatientRecord> test_records;
    if (*scope == OutcomeScope::ed_only) {
        std::vector<PatientRecord> hospital, ed;
        for (const auto& r : included) {
            (assign_scope(r) == OutcomeScope::ed_only ? ed : hospital).push_back(r);
        }
        const auto hosp_sets =
            split_cohort(hospital, args.train_fraction, derive_seed(cfg.seed, "split.hospital"));
        const auto ed_sets =
            split_cohort(ed, args.train_fraction, derive_seed(cfg.seed, "split.ed"));
        std::vector<PatientRecord> schema_pool = hosp_sets.train;
        schema_pool.insert(schema_pool.end(), ed_sets.train.begin(), ed_sets.train.end());
        const auto schema = fit_schema(schema_pool);
        result = train_transfer(encode(hosp_sets.train, schema), encode(ed_sets.train, schema),
                                cfg);
        test_records = ed_sets.test;
    } else {
        const auto sets =
            split_cohort(included, args.train_fraction, derive_seed(cfg.seed, "split.all"));
        const auto schema = fit_schema(sets.train);
        result = train_single(encode(sets.train, schema), cfg);
        test_records = sets.test;
    }
    result.artifact.age_group = group;

    save_artifact(result.artifact, args.out);

    std::string log_csv = "# " + prov.header_line() + "\nphase,epoch,loss\n";
    for (const auto& e : result.log) {
        log_csv += std::to_string(e.phase) + "," + std::to_string(e.epoch) + "," +
                   format_double(e.loss) + "\n";
    }
    atomic_write(sibling(args.out, ".trainlog.csv"), log_csv);
    atomic_write(sibling(args.out, ".test.csv"), cohort_csv_string(test_records, prov));
    atomic_write(sibling(args.out, ".excluded.csv"), cohort_csv_string(excluded, prov));

    std::cout << "trained " << args.scope << " model on " << included.size()
              << " included records; artifact at " << args.out << "\n";
    return kExitOk;
}

// ----- evaluate / ablate -----

struct EvaluateArgs {
    std::string artifact;
    std::string test;
    std::string threshold = ""; // number or "youden"; empty = artifact default
    std::string ablate_mechanism;
    std::string age_group = "all";
    int n_boot = 1000;
    std::uint64_t seed = 0;
    std::string json_out;
    std::string table_out;
};

int cmd_evaluate(const EvaluateArgs& args, const Provenance& prov) {
    const ModelArtifact artifact = load_artifact(args.artifact);
    const auto test = load_cohort(args.test);
    const AgeGroup group = parse_age_group(args.age_group);

    std::optional<InjuryMechanism> ablate;
    if (!args.ablate_mechanism.empty()) {
        const auto m = mechanism_from_name(args.ablate_mechanism);
        if (!m) throw ValidationError("unknown injury mechanism: '" + args.ablate_mechanism + "'");
        ablate = *m;
    }

    std::vector<PatientRecord> filtered;
    for (const auto& r : test) {
        if (in_age_group(r, group)) filtered.push_back(r);
    }
    if (filtered.empty()) throw ValidationError("evaluate: empty test set after age filter");

    double threshold = artifact.config.threshold;
    if (args.threshold == "youden") {
        const auto preds = predict(artifact, filtered);
        std::vector<double> probs(preds.size());
        for (std::size_t i = 0; i < preds.size(); ++i) probs[i] = preds[i].probability;
        std::vector<std::uint8_t> labels(filtered.size());
        for (std::size_t i = 0; i < filtered.size(); ++i) {
            labels[i] = label_mortality(filtered[i].disposition) ? 1 : 0;
        }
        threshold = youden_threshold(probs, labels);
    } else if (!args.threshold.empty()) {
        try {
            threshold = std::stod(args.threshold);
        } catch (const std::exception&) {
            throw ValidationError("--threshold expects a number or 'youden'");
        }
        if (!(threshold > 0 && threshold < 1)) {
            throw ValidationError("--threshold must be in (0,1)");
        }
    }

    ModelEvalOptions base;
    base.threshold = threshold;
    base.n_boot = args.n_boot;
    base.seed = derive_seed(args.seed, "evaluate");

    std::vector<MetricsReport> reports;
    nlohmann::json ablation_info;
    if (ablate) {
        const bool is_fall = *ablate == InjuryMechanism::fall;
        ModelEvalOptions with = base;
        with.label = is_fall ? "with_falls" : ("with_" + std::string(to_token(*ablate)));
        reports.push_back(evaluate_model(artifact, filtered, with));

        ModelEvalOptions without = base;
        without.ablate = ablate;
        without.label = is_fall ? "no_falls" : ("without_" + std::string(to_token(*ablate)));
        reports.push_back(evaluate_model(artifact, filtered, without));

        const auto remaining = ablate_mechanism(filtered, *ablate);
        ablation_info = {{"mechanism", std::string(to_token(*ablate))},
                         {"rows_before", filtered.size()},
                         {"rows_after", remaining.size()},
                         {"removed_fraction",
                          1.0 - static_cast<double>(remaining.size()) /
                                    static_cast<double>(filtered.size())}};
    } else {
        ModelEvalOptions all = base;
        all.label = "all";
        reports.push_back(evaluate_model(artifact, filtered, all));
    }

    nlohmann::json j;
    j["provenance"] = prov.to_json();
    j["age_group"] = args.age_group;
    j["threshold"] = threshold;
    j["threshold_mode"] = args.threshold.empty() ? "artifact" : args.threshold;
    if (!ablation_info.is_null()) j["ablation"] = ablation_info;
    j["reports"] = nlohmann::json::array();
    for (const auto& r : reports) j["reports"].push_back(nlohmann::json::parse(report_to_json(r)));

    std::string table = report_table_header() + "\n";
    for (const auto& r : reports) table += report_table_row(r) + "\n";

    if (!args.json_out.empty()) atomic_write(args.json_out, j.dump(2) + "\n");
    if (!args.table_out.empty()) {
        atomic_write(args.table_out, "# " + prov.header_line() + "\n" + table);
    }
    std::cout << table;
    return kExitOk;
}

// ----- stats -----

struct StatsArgs {
    std::string included;
    std::string excluded;
    double alpha = 0.05;
    std::string json_out;
    std::string table_out;
};

int cmd_stats(const StatsArgs& args, const Provenance& prov) {
    const auto included = load_cohort(args.included);
    const auto excluded = load_cohort(args.excluded);
    const auto results = compare_cohorts(included, excluded, args.alpha);

    nlohmann::json j;
    j["provenance"] = prov.to_json();
    j["alpha"] = args.alpha;
    j["results"] = nlohmann::json::parse(test_results_to_json(results));
    const std::string table = test_results_table(results);

    if (!args.json_out.empty()) atomic_write(args.json_out, j.dump(2) + "\n");
    if (!args.table_out.empty()) {
        atomic_write(args.table_out, "# " + prov.header_line() + "\n" + table);
    }
    std::cout << table;
    return kExitOk;
}

// ----- predict -----

struct PredictArgs {
    std::string artifact;
    std::string input;
    std::string out;
    bool lenient = false;
    bool strict = false;
};

int cmd_predict(const PredictArgs& args, const Provenance& prov) {
    ModelArtifact artifact = load_artifact(args.artifact);
    if (args.lenient) artifact.config.encode_policy = EncodePolicy::lenient;
    if (args.strict) artifact.config.encode_policy = EncodePolicy::strict;
    const auto input = load_cohort(args.input);

    std::vector<PatientRecord> scored;
    std::vector<std::pair<PatientRecord, std::string>> excluded;
    for (const auto& r : input) {
        if (passes_inclusion(r)) {
            scored.push_back(r);
        } else {
            std::string reasons;
            for (const auto& why : inclusion_failures(r)) {
                if (!reasons.empty()) reasons += ';';
                reasons += why;
            }
            excluded.emplace_back(r, reasons);
        }
    }

    std::vector<Prediction> preds;
    if (!scored.empty()) preds = predict(artifact, scored);

    std::string out_csv = "# " + prov.header_line() + "\n";
    for (const auto& col : cohort_csv_columns()) {
        out_csv += col;
        out_csv += ',';
    }
    out_csv += "probability,predicted\n";
    for (std::size_t i = 0; i < scored.size(); ++i) {
        out_csv += record_to_csv_row(scored[i]) + "," + format_double(preds[i].probability) +
                   "," + (preds[i].positive ? "1" : "0") + "\n";
    }
    atomic_write(args.out, out_csv);

    std::string excl_csv = "# " + prov.header_line() + "\n";
    for (const auto& col : cohort_csv_columns()) {
        excl_csv += col;
        excl_csv += ',';
    }
    excl_csv += "reasons\n";
    for (const auto& [r, reasons] : excluded) {
        excl_csv += record_to_csv_row(r) + "," + reasons + "\n";
    }
    atomic_write(sibling(args.out, ".excluded.csv"), excl_csv);

    std::cout << "scored " << scored.size() << " records (" << excluded.size()
              << " excluded) to " << args.out << "\n";
    return kExitOk;
}

void add_train_config_options(CLI::App* sub, TrainConfig& cfg) {
    sub->add_option("--coarse-lr", cfg.coarse_lr, "Phase-1 learning rate");
    sub->add_option("--fine-lr", cfg.fine_lr, "Phase-2 learning rate");
    sub->add_option("--epochs-phase1", cfg.epochs_phase1, "Phase-1 epochs");
    sub->add_option("--epochs-phase2", cfg.epochs_phase2, "Phase-2 epochs");
    sub->add_option("--batch-size", cfg.batch_size, "Minibatch size");
    sub->add_option("--dropout-rate", cfg.dropout_rate, "Dropout rate");
    sub->add_option("--bn-momentum", cfg.bn_momentum, "Batch-norm running-stat momentum");
    sub->add_option("--smote-k", cfg.smote_k, "SMOTE neighbour count");
    sub->add_option("--smote-multiplier", cfg.smote_multiplier,
                    "Synthetic positives per real ED positive");
    sub->add_option("--threshold", cfg.threshold, "Classification cutoff");
    sub->add_option("--seed", cfg.seed, "Master seed (all randomness derives from it)");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Trauma mortality prediction pipeline on synthetic cohorts"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    GenerateArgs gen;
    CLI::App* sub_gen = app.add_subcommand("generate", "Generate a synthetic cohort CSV");
    sub_gen->add_option("--age-group", gen.age_group, "children|adults|all");
    sub_gen->add_option("--n", gen.n, "Number of records")->required();
    sub_gen->add_option("--seed", gen.seed, "Master seed");
    sub_gen->add_option("--out", gen.out, "Output cohort CSV path")->required();
    sub_gen->add_option("--spec-file", gen.spec_file, "key=value overrides for the cohort spec");
    sub_gen->add_option("--set", gen.sets, "Inline spec override key=value (repeatable)");
    sub_gen->add_option("--mortality-rate", gen.mortality_rate, "Override target mortality rate");
    sub_gen->add_option("--missingness-rate", gen.missingness_rate, "Override missingness rate");
    sub_gen->set_config("--config");

    PreprocessArgs pre;
    CLI::App* sub_pre = app.add_subcommand("preprocess", "Filter + scope + split dry run");
    sub_pre->add_option("--cohort", pre.cohort, "Cohort CSV")->required();
    sub_pre->add_option("--age-group", pre.age_group, "children|adults|all");
    sub_pre->add_option("--seed", pre.seed, "Master seed");
    sub_pre->add_option("--train-fraction", pre.train_fraction, "Training fraction");
    sub_pre->add_option("--summary-out", pre.summary_out, "Summary JSON path");
    sub_pre->add_option("--excluded-out", pre.excluded_out, "Excluded-rows CSV path");
    sub_pre->add_option("--train-out", pre.train_out, "Train-split CSV path");
    sub_pre->add_option("--test-out", pre.test_out, "Test-split CSV path");
    sub_pre->set_config("--config");

    TrainArgs train;
    CLI::App* sub_train = app.add_subcommand("train", "Train a mortality model");
    sub_train->add_option("--cohort", train.cohort, "Cohort CSV")->required();
    sub_train->add_option("--scope", train.scope, "ed_only|hospital_and_ed");
    sub_train->add_option("--age-group", train.age_group, "children|adults|all");
    sub_train->add_option("--out", train.out, "Artifact JSON path")->required();
    sub_train->add_option("--train-fraction", train.train_fraction, "Training fraction");
    sub_train->add_flag("--lenient", train.lenient, "Lenient unseen-category encoding");
    add_train_config_options(sub_train, train.cfg);
    sub_train->set_config("--config");

    EvaluateArgs eval;
    CLI::App* sub_eval = app.add_subcommand("evaluate", "Evaluate an artifact on a test cohort");
    sub_eval->add_option("--artifact", eval.artifact, "Artifact JSON")->required();
    sub_eval->add_option("--test", eval.test, "Held-out test cohort CSV")->required();
    sub_eval->add_option("--threshold", eval.threshold, "Cutoff value or 'youden'");
    sub_eval->add_option("--ablate-mechanism", eval.ablate_mechanism,
                         "Emit with/without report pair for this mechanism");
    sub_eval->add_option("--age-group", eval.age_group, "children|adults|all");
    sub_eval->add_option("--n-boot", eval.n_boot, "Bootstrap resamples");
    sub_eval->add_option("--seed", eval.seed, "Bootstrap seed");
    sub_eval->add_option("--json-out", eval.json_out, "Report JSON path");
    sub_eval->add_option("--table-out", eval.table_out, "Report table path");
    sub_eval->set_config("--config");

    EvaluateArgs ablate_args;
    CLI::App* sub_ablate =
        app.add_subcommand("ablate", "Mechanism-ablation evaluation (with/without pair)");
    sub_ablate->add_option("--artifact", ablate_args.artifact, "Artifact JSON")->required();
    sub_ablate->add_option("--test", ablate_args.test, "Held-out test cohort CSV")->required();
    sub_ablate->add_option("--mechanism", ablate_args.ablate_mechanism, "Mechanism to remove")
        ->required();
    sub_ablate->add_option("--threshold", ablate_args.threshold, "Cutoff value or 'youden'");
    sub_ablate->add_option("--age-group", ablate_args.age_group, "children|adults|all");
    sub_ablate->add_option("--n-boot", ablate_args.n_boot, "Bootstrap resamples");
    sub_ablate->add_option("--seed", ablate_args.seed, "Bootstrap seed");
    sub_ablate->add_option("--json-out", ablate_args.json_out, "Report JSON path");
    sub_ablate->add_option("--table-out", ablate_args.table_out, "Report table path");
    sub_ablate->set_config("--config");

    StatsArgs stats;
    CLI::App* sub_stats =
        app.add_subcommand("stats", "Included-vs-excluded cohort comparison tests");
    sub_stats->add_option("--included", stats.included, "Included cohort CSV")->required();
    sub_stats->add_option("--excluded", stats.excluded, "Excluded cohort CSV")->required();
    sub_stats->add_option("--alpha", stats.alpha, "Significance level");
    sub_stats->add_option("--json-out", stats.json_out, "Results JSON path");
    sub_stats->add_option("--table-out", stats.table_out, "Results table path");
    sub_stats->set_config("--config");

    PredictArgs pred;
    CLI::App* sub_pred = app.add_subcommand("predict", "Score records with a trained artifact");
    sub_pred->add_option("--artifact", pred.artifact, "Artifact JSON")->required();
    sub_pred->add_option("--input", pred.input, "Input cohort CSV")->required();
    sub_pred->add_option("--out", pred.out, "Scores CSV path")->required();
    sub_pred->add_flag("--lenient", pred.lenient, "Lenient unseen-category encoding");
    sub_pred->add_flag("--strict", pred.strict, "Strict unseen-category encoding");
    sub_pred->set_config("--config");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (sub_gen->parsed()) {
            if (gen.n == 0) {
                std::cerr << "error: --n must be >= 1\n";
                return kExitUsage;
            }
            return cmd_generate(gen, {"generate", config_fingerprint(*sub_gen), gen.seed});
        }
        if (sub_pre->parsed()) {
            return cmd_preprocess(pre, {"preprocess", config_fingerprint(*sub_pre), pre.seed});
        }
        if (sub_train->parsed()) {
            return cmd_train(train, {"train", config_fingerprint(*sub_train), train.cfg.seed});
        }
        if (sub_eval->parsed()) {
            return cmd_evaluate(eval, {"evaluate", config_fingerprint(*sub_eval), eval.seed});
        }
        if (sub_ablate->parsed()) {
            if (ablate_args.ablate_mechanism.empty()) {
                std::cerr << "error: --mechanism is required\n";
                return kExitUsage;
            }
            return cmd_evaluate(ablate_args,
                                {"ablate", config_fingerprint(*sub_ablate), ablate_args.seed});
        }
        if (sub_stats->parsed()) {
            return cmd_stats(stats, {"stats", config_fingerprint(*sub_stats), 0});
        }
        if (sub_pred->parsed()) {
            return cmd_predict(pred, {"predict", config_fingerprint(*sub_pred), 0});
        }
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}
