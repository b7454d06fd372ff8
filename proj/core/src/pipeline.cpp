#include "triagenet/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "triagenet/errors.hpp"
#include "triagenet/rng.hpp"

namespace triagenet {

namespace {

// Feature variables in record field order. Comorbidities expand to the 20
// flag columns plus the mutually-exclusive "none" indicator.
enum Var : int {
    kAge, kSex, kRace,
    kO2, kSbp, kPulse, kRr, kTemp,
    kGcsEye, kGcsVerbal, kGcsMotor,
    kIss,
    kAis1, kAis2, kAis3, kAis4, kAis5, kAis6, kAis7, kAis8, kAis9,
    kComorbidities,
    kIntent, kType, kMechanism,
    kAmbulance, kTransferred,
};

constexpr int kNumericVars[] = {kAge, kO2, kSbp, kPulse, kRr, kTemp, kGcsEye, kGcsVerbal,
                                kGcsMotor, kIss, kAis1, kAis2, kAis3, kAis4, kAis5, kAis6,
                                kAis7, kAis8, kAis9};

const char* var_name(int var) {
    switch (var) {
        case kAge: return "age";
        case kSex: return "sex";
        case kRace: return "race";
        case kO2: return "oxygen_saturation";
        case kSbp: return "systolic_bp";
        case kPulse: return "pulse";
        case kRr: return "respiratory_rate";
        case kTemp: return "temperature";
        case kGcsEye: return "gcs_eye";
        case kGcsVerbal: return "gcs_verbal";
        case kGcsMotor: return "gcs_motor";
        case kIss: return "iss";
        case kComorbidities: return "comorbidities";
        case kIntent: return "injury_intent";
        case kType: return "injury_type";
        case kMechanism: return "injury_mechanism";
        case kAmbulance: return "arrived_by_ambulance";
        case kTransferred: return "transferred_in";
        default: break;
    }
    static const char* ais_names[9] = {"ais1", "ais2", "ais3", "ais4", "ais5",
                                       "ais6", "ais7", "ais8", "ais9"};
    return ais_names[var - kAis1];
}

double require(const std::optional<double>& v, const char* what) {
    if (!v) throw ValidationError(std::string("encode: record missing ") + what);
    return *v;
}

double require_int(const std::optional<int>& v, const char* what) {
    if (!v) throw ValidationError(std::string("encode: record missing ") + what);
    return static_cast<double>(*v);
}

double numeric_value(const PatientRecord& r, int var) {
    switch (var) {
        case kAge: return r.age;
        case kO2: return require(r.oxygen_saturation, "oxygen_saturation");
        case kSbp: return require(r.systolic_bp, "systolic_bp");
        case kPulse: return require(r.pulse, "pulse");
        case kRr: return require(r.respiratory_rate, "respiratory_rate");
        case kTemp: return require(r.temperature, "temperature");
        case kGcsEye: return require_int(r.gcs_eye, "gcs_eye");
        case kGcsVerbal: return require_int(r.gcs_verbal, "gcs_verbal");
        case kGcsMotor: return require_int(r.gcs_motor, "gcs_motor");
        case kIss: return r.iss;
        default: return r.ais[var - kAis1];
    }
}

int categorical_count(int var) {
    switch (var) {
        case kSex: return kNumSex;
        case kRace: return kNumRace;
        case kIntent: return kNumInjuryIntent;
        case kType: return kNumInjuryType;
        case kMechanism: return kNumInjuryMechanism;
        default: return 0;
    }
}

int categorical_index(const PatientRecord& r, int var) {
    switch (var) {
        case kSex: return static_cast<int>(r.sex);
        case kRace: return static_cast<int>(r.race);
        case kIntent: return static_cast<int>(r.injury_intent);
        case kType: return static_cast<int>(r.injury_type);
        case kMechanism: return static_cast<int>(r.injury_mechanism);
        default: throw ValidationError("not a categorical variable");
    }
}

std::string categorical_token(int var, int level) {
    switch (var) {
        case kSex: return std::string(to_token(static_cast<Sex>(level)));
        case kRace: return std::string(to_token(static_cast<Race>(level)));
        case kIntent: return std::string(to_token(static_cast<InjuryIntent>(level)));
        case kType: return std::string(to_token(static_cast<InjuryType>(level)));
        case kMechanism: return std::string(to_token(static_cast<InjuryMechanism>(level)));
        default: throw ValidationError("not a categorical variable");
    }
}

// Comorbidity binary block: flags 0..19 then the "none" indicator.
constexpr int kComorbidityColumns = kNumComorbidity + 1;

double binary_value(const PatientRecord& r, int var, int flag) {
    switch (var) {
        case kComorbidities:
            if (flag < kNumComorbidity) {
                return r.comorbidities.test(static_cast<Comorbidity>(flag)) ? 1.0 : 0.0;
            }
            return r.comorbidities.none() ? 1.0 : 0.0;
        case kAmbulance: {
            if (!r.arrived_by_ambulance) {
                throw ValidationError("encode: record missing arrived_by_ambulance");
            }
            return *r.arrived_by_ambulance ? 1.0 : 0.0;
        }
        case kTransferred: {
            if (!r.transferred_in) throw ValidationError("encode: record missing transferred_in");
            return *r.transferred_in ? 1.0 : 0.0;
        }
        default: throw ValidationError("not a binary variable");
    }
}

std::string binary_name(int var, int flag) {
    if (var == kComorbidities) {
        if (flag < kNumComorbidity) {
            return "comorbidity=" + std::string(to_token(static_cast<Comorbidity>(flag)));
        }
        return "comorbidity=none";
    }
    return var_name(var);
}

bool is_numeric_var(int var) {
    return std::find(std::begin(kNumericVars), std::end(kNumericVars), var) !=
           std::end(kNumericVars);
}

constexpr int kAllVars[] = {kAge, kSex, kRace, kO2, kSbp, kPulse, kRr, kTemp, kGcsEye,
                            kGcsVerbal, kGcsMotor, kIss, kAis1, kAis2, kAis3, kAis4, kAis5,
                            kAis6, kAis7, kAis8, kAis9, kComorbidities, kIntent, kType,
                            kMechanism, kAmbulance, kTransferred};

} // namespace

std::vector<std::string> FeatureSchema::column_names() const {
    std::vector<std::string> names;
    names.reserve(columns.size());
    for (const auto& c : columns) names.push_back(c.name);
    return names;
}

std::size_t FeatureMatrix::positives() const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), std::uint8_t{1}));
}

FeatureSchema fit_schema(std::span<const PatientRecord> records) {
    if (records.empty()) throw ValidationError("fit_schema: empty record list");

    FeatureSchema schema;
    const double n = static_cast<double>(records.size());

    for (const int var : kAllVars) {
        if (is_numeric_var(var)) {
            double sum = 0;
            for (const auto& r : records) sum += numeric_value(r, var);
            const double mean = sum / n;
            double ss = 0;
            for (const auto& r : records) {
                const double d = numeric_value(r, var) - mean;
                ss += d * d;
            }
            double sd = std::sqrt(ss / n); // population SD
            if (sd == 0.0) sd = 1.0;
            schema.columns.push_back({FeatureSchema::ColumnKind::numeric, var_name(var), var, 0,
                                      mean, sd});
        } else if (categorical_count(var) > 0) {
            std::vector<bool> seen(categorical_count(var), false);
            for (const auto& r : records) seen[categorical_index(r, var)] = true;
            FeatureSchema::OneHotGroup group{var, schema.columns.size(), {}};
            for (int level = 0; level < categorical_count(var); ++level) {
                if (!seen[level]) continue;
                group.levels.push_back(level);
                schema.columns.push_back({FeatureSchema::ColumnKind::onehot,
                                          std::string(var_name(var)) + "=" +
                                              categorical_token(var, level),
                                          var, level, 0.0, 1.0});
            }
            schema.groups.push_back(std::move(group));
        } else {
            const int flags = var == kComorbidities ? kComorbidityColumns : 1;
            for (int f = 0; f < flags; ++f) {
                schema.columns.push_back({FeatureSchema::ColumnKind::binary, binary_name(var, f),
                                          var, f, 0.0, 1.0});
            }
        }
    }
    return schema;
}

FeatureMatrix encode(std::span<const PatientRecord> records, const FeatureSchema& schema,
                     EncodePolicy policy) {
    FeatureMatrix out;
    out.schema = schema;
    out.x = Matrix(records.size(), schema.column_count());
    out.labels.resize(records.size());

    // Per-group level -> column lookup.
    std::vector<std::vector<int>> level_to_col;
    for (const auto& g : schema.groups) {
        std::vector<int> lookup(categorical_count(g.variable), -1);
        for (std::size_t k = 0; k < g.levels.size(); ++k) {
            lookup[g.levels[k]] = static_cast<int>(g.first_column + k);
        }
        level_to_col.push_back(std::move(lookup));
    }

    for (std::size_t i = 0; i < records.size(); ++i) {
        const PatientRecord& r = records[i];
        auto row = out.x.row(i);
        for (std::size_t j = 0; j < schema.columns.size(); ++j) {
            const auto& col = schema.columns[j];
            switch (col.kind) {
                case FeatureSchema::ColumnKind::numeric:
                    row[j] = (numeric_value(r, col.variable) - col.mean) / col.sd;
                    break;
                case FeatureSchema::ColumnKind::binary:
                    row[j] = binary_value(r, col.variable, col.level);
                    break;
                case FeatureSchema::ColumnKind::onehot:
                    break; // filled group-wise below
            }
        }
        for (std::size_t g = 0; g < schema.groups.size(); ++g) {
            const auto& group = schema.groups[g];
            const int level = categorical_index(r, group.variable);
            const int col = level_to_col[g][level];
            if (col < 0) {
                if (policy == EncodePolicy::strict) {
                    throw ValidationError(
                        std::string("encode: category unseen at fit time: ") +
                        var_name(group.variable) + "=" +
                        categorical_token(group.variable, level));
                }
                continue; // lenient: all-zero group
            }
            row[static_cast<std::size_t>(col)] = 1.0;
        }
        out.labels[i] = label_mortality(r.disposition) ? 1 : 0;
    }
    return out;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>>
stratified_split_indices(std::span<const std::uint8_t> labels, const SplitSpec& spec) {
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
        throw ValidationError("split: train_fraction must be in (0,1)");
    }
    auto shuffle = [](std::vector<std::size_t>& v, std::uint64_t seed) {
        SplitMix64 rng(seed);
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[rng.below(i)]);
        }
    };

    std::vector<std::size_t> train, test;
    if (spec.stratified) {
        std::vector<std::size_t> pos, neg;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            (labels[i] ? pos : neg).push_back(i);
        }
        if (pos.empty() || neg.empty()) {
            throw ValidationError("stratified split: a class has zero rows");
        }
        shuffle(pos, derive_seed(spec.seed, "split.pos"));
        shuffle(neg, derive_seed(spec.seed, "split.neg"));
        const auto take = [&](const std::vector<std::size_t>& cls) {
            const auto k = static_cast<std::size_t>(
                std::lround(spec.train_fraction * static_cast<double>(cls.size())));
            train.insert(train.end(), cls.begin(), cls.begin() + k);
            test.insert(test.end(), cls.begin() + k, cls.end());
        };
        take(neg);
        take(pos);
    } else {
        std::vector<std::size_t> all(labels.size());
        std::iota(all.begin(), all.end(), 0);
        if (all.empty()) throw ValidationError("split: empty input");
        shuffle(all, derive_seed(spec.seed, "split.all"));
        const auto k = static_cast<std::size_t>(
            std::lround(spec.train_fraction * static_cast<double>(all.size())));
        train.assign(all.begin(), all.begin() + k);
        test.assign(all.begin() + k, all.end());
    }
    shuffle(train, derive_seed(spec.seed, "split.train_order"));
    shuffle(test, derive_seed(spec.seed, "split.test_order"));
    return {std::move(train), std::move(test)};
}

std::pair<FeatureMatrix, FeatureMatrix> stratified_split(const FeatureMatrix& m,
                                                         const SplitSpec& spec) {
    const auto [train_idx, test_idx] = stratified_split_indices(m.labels, spec);
    auto take = [&](const std::vector<std::size_t>& idx) {
        FeatureMatrix out;
        out.schema = m.schema;
        out.x = Matrix(idx.size(), m.x.cols());
        out.labels.resize(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) {
            const auto src = m.x.row(idx[i]);
            std::copy(src.begin(), src.end(), out.x.row(i).begin());
            out.labels[i] = m.labels[idx[i]];
        }
        return out;
    };
    return {take(train_idx), take(test_idx)};
}

std::vector<double> smote_interpolate(std::span<const double> x, std::span<const double> x_prime,
                                      double lambda) {
    if (x.size() != x_prime.size()) throw ValidationError("smote_interpolate: size mismatch");
    std::vector<double> out(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) out[j] = x[j] + lambda * (x_prime[j] - x[j]);
    return out;
}

Matrix smote_oversample(const Matrix& minority_rows, int k, std::size_t n_synthetic,
                        std::uint64_t seed) {
    const std::size_t m = minority_rows.rows();
    if (m < 2) throw ValidationError("smote: need at least 2 minority rows");
    if (k < 1) throw ValidationError("smote: k must be >= 1");
    const std::size_t k_eff = std::min<std::size_t>(static_cast<std::size_t>(k), m - 1);

    // Brute-force k nearest neighbours; ties broken by row index so the
    // neighbour lists are stable.
    const std::size_t d = minority_rows.cols();
    std::vector<std::vector<std::size_t>> neighbors(m);
    std::vector<std::pair<double, std::size_t>> dist;
    for (std::size_t i = 0; i < m; ++i) {
        dist.clear();
        const auto xi = minority_rows.row(i);
        for (std::size_t j = 0; j < m; ++j) {
            if (j == i) continue;
            const auto xj = minority_rows.row(j);
            double s = 0;
            for (std::size_t c = 0; c < d; ++c) {
                const double diff = xi[c] - xj[c];
                s += diff * diff;
            }
            dist.emplace_back(s, j);
        }
        std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k_eff),
                          dist.end());
        neighbors[i].reserve(k_eff);
        for (std::size_t t = 0; t < k_eff; ++t) neighbors[i].push_back(dist[t].second);
    }

    Matrix synthetic(n_synthetic, d);
    SplitMix64 rng(derive_seed(seed, "smote"));
    for (std::size_t t = 0; t < n_synthetic; ++t) {
        const std::size_t i = rng.below(m);
        const std::size_t nn = neighbors[i][rng.below(k_eff)];
        const double lambda = rng.uniform();
        const auto xi = minority_rows.row(i);
        const auto xn = minority_rows.row(nn);
        auto out = synthetic.row(t);
        for (std::size_t c = 0; c < d; ++c) out[c] = xi[c] + lambda * (xn[c] - xi[c]);
    }
    return synthetic;
}

int onehot_decode(const FeatureMatrix& m, std::size_t row, const FeatureSchema::OneHotGroup& g) {
    const auto r = m.x.row(row);
    for (std::size_t k = 0; k < g.levels.size(); ++k) {
        if (r[g.first_column + k] > 0.5) return g.levels[k];
    }
    return -1;
}

std::string schema_to_json(const FeatureSchema& schema) {
    nlohmann::json j;
    j["columns"] = nlohmann::json::array();
    for (const auto& c : schema.columns) {
        nlohmann::json col;
        col["kind"] = static_cast<int>(c.kind);
        col["name"] = c.name;
        col["variable"] = c.variable;
        col["level"] = c.level;
        col["mean"] = c.mean;
        col["sd"] = c.sd;
        j["columns"].push_back(std::move(col));
    }
    j["groups"] = nlohmann::json::array();
    for (const auto& g : schema.groups) {
        nlohmann::json group;
        group["variable"] = g.variable;
        group["first_column"] = g.first_column;
        group["levels"] = g.levels;
        j["groups"].push_back(std::move(group));
    }
    return j.dump();
}

FeatureSchema schema_from_json(const std::string& json_text) {
    FeatureSchema schema;
    try {
        const auto j = nlohmann::json::parse(json_text);
        for (const auto& col : j.at("columns")) {
            schema.columns.push_back({static_cast<FeatureSchema::ColumnKind>(
                                          col.at("kind").get<int>()),
                                      col.at("name").get<std::string>(),
                                      col.at("variable").get<int>(), col.at("level").get<int>(),
                                      col.at("mean").get<double>(), col.at("sd").get<double>()});
        }
        for (const auto& g : j.at("groups")) {
            schema.groups.push_back({g.at("variable").get<int>(),
                                     g.at("first_column").get<std::size_t>(),
                                     g.at("levels").get<std::vector<int>>()});
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("schema json: ") + e.what());
    }
    return schema;
}

} // namespace triagenet
