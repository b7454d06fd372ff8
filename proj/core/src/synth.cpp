#include "triagenet/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include <json.hpp>

#include "triagenet/csv.hpp"
#include "triagenet/errors.hpp"
#include "triagenet/rng.hpp"

namespace triagenet {

namespace {

constexpr double kPi = 3.14159265358979323846;

double phi_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * kPi); }
double phi_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// ----- published cohort tables -----
// Counts per category; frequencies are normalized within each variable, since
// the published percentage columns use slightly different denominators per
// block and do not sum to exactly 100.

constexpr std::size_t kChildrenN = 300847;
constexpr std::size_t kAdultsN = 1706638;

constexpr double kChildSexFreq[kNumSex] = {0.3392, 1.0 - 0.3392};
constexpr double kAdultSexFreq[kNumSex] = {0.3795, 1.0 - 0.3795};

constexpr double kChildRaceCounts[kNumRace] = {196736, 51994, 34196, 5079, 3348, 1170, 853};
constexpr double kAdultRaceCounts[kNumRace] = {1258913, 229302, 123493, 27888, 14902, 8551, 3411};

constexpr double kChildIntentCounts[kNumInjuryIntent] = {21319, 228, 2449, 1820, 265434};
constexpr double kAdultIntentCounts[kNumInjuryIntent] = {177543, 3098, 25798, 6135, 1447143};

constexpr double kChildTypeCounts[kNumInjuryType] = {241153, 9740, 21498, 18859};
constexpr double kAdultTypeCounts[kNumInjuryType] = {1427232, 25843, 65390, 141252};

constexpr double kChildMechanismCounts[kNumInjuryMechanism] = {
    34, 22, 8855, 269, 95199, 2874, 9982, 6866, 3968, 51335, 932, 4436, 12745, 457,
    1101, 4949, 1543, 8773, 1379, 1490, 11880, 1568, 330, 32068, 281, 25462, 2452};
constexpr double kAdultMechanismCounts[kNumInjuryMechanism] = {
    307, 406, 77958, 650, 690746, 15864, 63173, 9979, 91688, 334239, 3423, 13306, 47643, 4193,
    20115, 7497, 5371, 21390, 7560, 4715, 25423, 4819, 647, 111135, 1396, 80501, 15573};

constexpr double kChildComorbidityCounts[kNumComorbidity] = {
    2420, 8, 55, 668, 58, 2248, 92, 10098, 233, 1074,
    34, 48, 651, 1054, 19, 3684, 1666, 14, 16312, 109};
constexpr double kAdultComorbidityCounts[kNumComorbidity] = {
    152602, 3873, 1265, 96168, 4358, 4598, 57005, 315492, 38609, 209902,
    11608, 3924, 32606, 527251, 23487, 110593, 412, 7831, 137284, 8746};
// Comorbidity percentages are published against the demographics-known subset
// (the race counts sum), not the full group size.
constexpr double kChildComorbidityDenom = 293376;
constexpr double kAdultComorbidityDenom = 1666460;

template <std::size_t N>
std::array<double, N> normalized(const double (&counts)[N]) {
    double total = 0;
    for (const double c : counts) total += c;
    std::array<double, N> out{};
    for (std::size_t i = 0; i < N; ++i) out[i] = counts[i] / total;
    return out;
}

VitalParams vp(double mean, double sd, double lo, double hi, bool integral = false) {
    return VitalParams{mean, sd, lo, hi, integral};
}

CohortSpec children_spec() {
    CohortSpec s;
    s.age_group = AgeGroup::children;
    s.mortality_rate = 0.0036;
    std::copy(std::begin(kChildSexFreq), std::end(kChildSexFreq), s.sex_freq.begin());
    s.race_freq = normalized(kChildRaceCounts);
    s.intent_freq = normalized(kChildIntentCounts);
    s.type_freq = normalized(kChildTypeCounts);
    s.mechanism_freq = normalized(kChildMechanismCounts);
    for (int i = 0; i < kNumComorbidity; ++i) {
        s.comorbidity_prob[i] = kChildComorbidityCounts[i] / kChildComorbidityDenom;
    }
    s.ambulance_prob = 0.7616;
    s.transferred_prob = 0.3706;
    s.age = vp(10.42, 5.91, 0, 17, true);
    s.oxygen_saturation = vp(98.26, 6.93, 0, 100);
    s.systolic_bp = vp(122.48, 19.53, 0, 300);
    s.pulse = vp(102.42, 26.18, 0, 300);
    s.respiratory_rate = vp(21.32, 6.82, 0, 99);
    s.temperature = vp(36.67, 1.26, 25, 45);
    s.gcs_eye = vp(3.85, 0.62, 1, 4, true);
    s.gcs_verbal = vp(4.75, 0.87, 1, 5, true);
    s.gcs_motor = vp(5.79, 0.91, 1, 6, true);
    s.iss = vp(7.36, 7.21, 0, 75, true);
    const double ais_mean[9] = {1.11, 0.31, 0.03, 0.34, 0.30, 0.19, 0.60, 0.60, 0.13};
    const double ais_sd[9] = {1.73, 0.63, 0.36, 1.00, 0.95, 0.69, 0.96, 1.07, 0.42};
    for (int i = 0; i < 9; ++i) s.ais[i] = vp(ais_mean[i], ais_sd[i], 0, 6, true);
    return s;
}

CohortSpec adults_spec() {
    CohortSpec s;
    s.age_group = AgeGroup::adults;
    s.mortality_rate = 0.0043;
    std::copy(std::begin(kAdultSexFreq), std::end(kAdultSexFreq), s.sex_freq.begin());
    s.race_freq = normalized(kAdultRaceCounts);
    s.intent_freq = normalized(kAdultIntentCounts);
    s.type_freq = normalized(kAdultTypeCounts);
    s.mechanism_freq = normalized(kAdultMechanismCounts);
    for (int i = 0; i < kNumComorbidity; ++i) {
        s.comorbidity_prob[i] = kAdultComorbidityCounts[i] / kAdultComorbidityDenom;
    }
    s.ambulance_prob = 0.8458;
    s.transferred_prob = 0.2326;
    s.age = vp(51.67, 20.93, 18, 100, true);
    s.oxygen_saturation = vp(96.85, 7.44, 0, 100);
    s.systolic_bp = vp(139.89, 26.35, 0, 300);
    s.pulse = vp(87.49, 19.13, 0, 300);
    s.respiratory_rate = vp(18.40, 4.63, 0, 99);
    s.temperature = vp(36.52, 1.45, 25, 45);
    s.gcs_eye = vp(3.84, 0.64, 1, 4, true);
    s.gcs_verbal = vp(4.69, 0.91, 1, 5, true);
    s.gcs_motor = vp(5.77, 0.96, 1, 6, true);
    s.iss = vp(9.08, 7.82, 0, 75, true);
    const double ais_mean[9] = {1.09, 0.34, 0.04, 0.62, 0.24, 0.43, 0.52, 0.87, 0.10};
    const double ais_sd[9] = {1.77, 0.67, 0.33, 1.26, 0.82, 0.96, 0.89, 1.21, 0.37};
    for (int i = 0; i < 9; ++i) s.ais[i] = vp(ais_mean[i], ais_sd[i], 0, 6, true);
    return s;
}

VitalParams pool_vitals(const VitalParams& c, const VitalParams& a, double wc, double wa) {
    VitalParams out = c;
    out.mean = wc * c.mean + wa * a.mean;
    const double e2 = wc * (c.sd * c.sd + c.mean * c.mean) + wa * (a.sd * a.sd + a.mean * a.mean);
    out.sd = std::sqrt(e2 - out.mean * out.mean);
    out.lo = std::min(c.lo, a.lo);
    out.hi = std::max(c.hi, a.hi);
    return out;
}

// The published tables cover children and adults separately; the all-ages
// spec is their size-weighted pool (mixture moments for vitals).
CohortSpec all_ages_spec() {
    const CohortSpec c = children_spec();
    const CohortSpec a = adults_spec();
    const double wc = static_cast<double>(kChildrenN) / (kChildrenN + kAdultsN);
    const double wa = 1.0 - wc;
    CohortSpec s;
    s.age_group = AgeGroup::all;
    s.mortality_rate = wc * c.mortality_rate + wa * a.mortality_rate;
    auto pool = [&](auto& out, const auto& fc, const auto& fa) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = wc * fc[i] + wa * fa[i];
    };
    pool(s.sex_freq, c.sex_freq, a.sex_freq);
    pool(s.race_freq, c.race_freq, a.race_freq);
    pool(s.intent_freq, c.intent_freq, a.intent_freq);
    pool(s.type_freq, c.type_freq, a.type_freq);
    pool(s.mechanism_freq, c.mechanism_freq, a.mechanism_freq);
    pool(s.comorbidity_prob, c.comorbidity_prob, a.comorbidity_prob);
    s.ambulance_prob = wc * c.ambulance_prob + wa * a.ambulance_prob;
    s.transferred_prob = wc * c.transferred_prob + wa * a.transferred_prob;
    s.age = pool_vitals(c.age, a.age, wc, wa);
    s.oxygen_saturation = pool_vitals(c.oxygen_saturation, a.oxygen_saturation, wc, wa);
    s.systolic_bp = pool_vitals(c.systolic_bp, a.systolic_bp, wc, wa);
    s.pulse = pool_vitals(c.pulse, a.pulse, wc, wa);
    s.respiratory_rate = pool_vitals(c.respiratory_rate, a.respiratory_rate, wc, wa);
    s.temperature = pool_vitals(c.temperature, a.temperature, wc, wa);
    s.gcs_eye = pool_vitals(c.gcs_eye, a.gcs_eye, wc, wa);
    s.gcs_verbal = pool_vitals(c.gcs_verbal, a.gcs_verbal, wc, wa);
    s.gcs_motor = pool_vitals(c.gcs_motor, a.gcs_motor, wc, wa);
    s.iss = pool_vitals(c.iss, a.iss, wc, wa);
    for (int i = 0; i < 9; ++i) s.ais[i] = pool_vitals(c.ais[i], a.ais[i], wc, wa);
    return s;
}

void fill_shared_defaults(CohortSpec& s) {
    s.survivor_disposition_freq = {0.560, 0.190, 0.128, 0.024, 0.098};
    s.death_disposition_freq = {0.5, 0.3, 0.2};
    s.disposition_validity_freq = {0.97, 0.012, 0.012, 0.006};
    s.missingness_rate = 0.1;
}

template <std::size_t N>
std::size_t pick_category(double u, const std::array<double, N>& freq) {
    double cum = 0;
    for (std::size_t i = 0; i + 1 < N; ++i) {
        cum += freq[i];
        if (u < cum) return i;
    }
    return N - 1;
}

// Resolved per-field sampling parameters for one generation run.
struct FieldSampler {
    ClampedNormalParams p;
    double lo, hi;
    bool integral;

    double draw(SplitMix64& rng) const {
        const double x = p.mu + p.sigma * rng.normal();
        if (integral) {
            const long v = std::lround(x);
            return static_cast<double>(std::clamp(v, static_cast<long>(lo), static_cast<long>(hi)));
        }
        return std::clamp(x, lo, hi);
    }
};

FieldSampler make_sampler(const VitalParams& target) {
    return FieldSampler{solve_clamped_normal(target), target.lo, target.hi, target.integral};
}

struct ResolvedSamplers {
    FieldSampler age, o2, sbp, pulse, rr, temp, gcs_e, gcs_v, gcs_m, iss;
    std::array<FieldSampler, 9> ais;
};

ResolvedSamplers resolve_samplers(const CohortSpec& s) {
    ResolvedSamplers r{
        make_sampler(s.age),
        make_sampler(s.oxygen_saturation),
        make_sampler(s.systolic_bp),
        make_sampler(s.pulse),
        make_sampler(s.respiratory_rate),
        make_sampler(s.temperature),
        make_sampler(s.gcs_eye),
        make_sampler(s.gcs_verbal),
        make_sampler(s.gcs_motor),
        make_sampler(s.iss),
        {},
    };
    for (int i = 0; i < 9; ++i) r.ais[i] = make_sampler(s.ais[i]);
    return r;
}

struct SampledCohort {
    std::vector<PatientRecord> records;
    std::vector<double> scores; // observable score + hidden fall noise
};

SampledCohort sample_features(const CohortSpec& spec) {
    const ResolvedSamplers fs = resolve_samplers(spec);
    const std::uint64_t base = derive_seed(spec.seed, "synth.features");

    SampledCohort out;
    out.records.resize(spec.n_records);
    out.scores.resize(spec.n_records);
    for (std::size_t i = 0; i < spec.n_records; ++i) {
        SplitMix64 rng(mix_seed(base, i));
        PatientRecord& r = out.records[i];
        r.age = static_cast<int>(fs.age.draw(rng));
        r.sex = static_cast<Sex>(pick_category(rng.uniform(), spec.sex_freq));
        r.race = static_cast<Race>(pick_category(rng.uniform(), spec.race_freq));
        r.oxygen_saturation = fs.o2.draw(rng);
        r.systolic_bp = fs.sbp.draw(rng);
        r.pulse = fs.pulse.draw(rng);
        r.respiratory_rate = fs.rr.draw(rng);
        r.temperature = fs.temp.draw(rng);
        r.gcs_eye = static_cast<int>(fs.gcs_e.draw(rng));
        r.gcs_verbal = static_cast<int>(fs.gcs_v.draw(rng));
        r.gcs_motor = static_cast<int>(fs.gcs_m.draw(rng));
        r.iss = static_cast<int>(fs.iss.draw(rng));
        for (int k = 0; k < 9; ++k) r.ais[k] = static_cast<int>(fs.ais[k].draw(rng));
        for (int c = 0; c < kNumComorbidity; ++c) {
            if (rng.bernoulli(spec.comorbidity_prob[c])) {
                r.comorbidities.set(static_cast<Comorbidity>(c));
            }
        }
        r.injury_intent = static_cast<InjuryIntent>(pick_category(rng.uniform(), spec.intent_freq));
        r.injury_type = static_cast<InjuryType>(pick_category(rng.uniform(), spec.type_freq));
        r.injury_mechanism =
            static_cast<InjuryMechanism>(pick_category(rng.uniform(), spec.mechanism_freq));
        r.arrived_by_ambulance = rng.bernoulli(spec.ambulance_prob);
        r.transferred_in = rng.bernoulli(spec.transferred_prob);

        double score = latent_risk_score(r, spec.risk);
        if (r.injury_mechanism == InjuryMechanism::fall && r.age >= 65 &&
            spec.risk.fall_elderly_noise_sd > 0) {
            score += spec.risk.fall_elderly_noise_sd * rng.normal();
        }
        out.scores[i] = score;
    }
    return out;
}

double intercept_for(const std::vector<double>& scores, double rate) {
    auto mean_prob = [&](double b) {
        double sum = 0;
        for (const double s : scores) sum += sigmoid(s + b);
        return sum / static_cast<double>(scores.size());
    };
    double lo = -30.0, hi = 30.0;
    double flo = mean_prob(lo) - rate;
    double fhi = mean_prob(hi) - rate;
    if (flo > 0 || fhi < 0) {
        throw NumericError("intercept bisection bracket [-30,30] does not straddle target rate");
    }
    for (int iter = 0; iter < 200 && hi - lo > 1e-13; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (mean_prob(mid) - rate < 0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

} // namespace

void CohortSpec::validate() const {
    if (n_records == 0) throw ValidationError("cohort spec: n_records must be >= 1");
    if (!(mortality_rate > 0.0 && mortality_rate < 1.0)) {
        throw ValidationError("cohort spec: mortality_rate must be in (0,1)");
    }
    if (!(missingness_rate >= 0.0 && missingness_rate < 1.0)) {
        throw ValidationError("cohort spec: missingness_rate must be in [0,1)");
    }
    auto check_freq = [](const auto& freq, const char* name) {
        double sum = 0;
        for (const double f : freq) {
            if (f < 0) throw ValidationError(std::string("cohort spec: negative frequency in ") + name);
            sum += f;
        }
        if (std::abs(sum - 1.0) > 1e-9) {
            throw ValidationError(std::string("cohort spec: frequencies of ") + name +
                                  " sum to " + format_double(sum) + ", expected 1");
        }
    };
    check_freq(sex_freq, "sex");
    check_freq(race_freq, "race");
    check_freq(intent_freq, "injury_intent");
    check_freq(type_freq, "injury_type");
    check_freq(mechanism_freq, "injury_mechanism");
    check_freq(survivor_disposition_freq, "survivor_disposition");
    check_freq(death_disposition_freq, "death_disposition");
    check_freq(disposition_validity_freq, "disposition_validity");
    for (const double p : comorbidity_prob) {
        if (p < 0 || p > 1) throw ValidationError("cohort spec: comorbidity probability out of [0,1]");
    }
    auto check_vital = [](const VitalParams& v, const char* name) {
        if (!(v.sd > 0) || !(v.lo < v.hi) || v.mean < v.lo || v.mean > v.hi) {
            throw ValidationError(std::string("cohort spec: bad vital parameters for ") + name);
        }
    };
    check_vital(age, "age");
    check_vital(oxygen_saturation, "oxygen_saturation");
    check_vital(systolic_bp, "systolic_bp");
    check_vital(pulse, "pulse");
    check_vital(respiratory_rate, "respiratory_rate");
    check_vital(temperature, "temperature");
    check_vital(gcs_eye, "gcs_eye");
    check_vital(gcs_verbal, "gcs_verbal");
    check_vital(gcs_motor, "gcs_motor");
    check_vital(iss, "iss");
    for (const auto& a : ais) check_vital(a, "ais");
}

CohortSpec default_spec(AgeGroup group) {
    CohortSpec s;
    switch (group) {
        case AgeGroup::children: s = children_spec(); break;
        case AgeGroup::adults: s = adults_spec(); break;
        case AgeGroup::all: s = all_ages_spec(); break;
    }
    fill_shared_defaults(s);
    return s;
}

double latent_risk_score(const PatientRecord& r, const RiskCoefficients& risk) {
    if (!r.systolic_bp) throw ValidationError("latent_risk_score requires systolic_bp");
    double severity = risk.iss_per_point * r.iss;
    severity += risk.gcs_deficit_per_point * (15 - r.gcs_total());
    if (*r.systolic_bp < 90.0) {
        severity += risk.low_sbp_per_10mmhg * (90.0 - *r.systolic_bp) / 10.0;
    }
    double score = 0;
    const bool elderly_fall = r.injury_mechanism == InjuryMechanism::fall && r.age >= 65;
    if (elderly_fall) {
        score += risk.fall_elderly_severity_attenuation * severity + risk.fall_elderly;
    } else {
        score += severity;
    }
    if (r.age > 18) score += risk.age_per_decade_over_18 * (r.age - 18) / 10.0;
    return score;
}

double calibrate_intercept(const CohortSpec& spec) {
    spec.validate();
    const SampledCohort sampled = sample_features(spec);
    return intercept_for(sampled.scores, spec.mortality_rate);
}

std::vector<PatientRecord> generate(const CohortSpec& spec) {
    spec.validate();
    SampledCohort sampled = sample_features(spec);
    const double intercept = intercept_for(sampled.scores, spec.mortality_rate);

    const std::size_t n = spec.n_records;
    const std::uint64_t outcome_base = derive_seed(spec.seed, "synth.outcomes");

    // Outcome draws are taken up front so that the ED-death assignment (which
    // depends on the realized death-score distribution) cannot disturb the
    // stream of any other record.
    std::vector<std::array<double, 4>> draws(n);
    std::vector<char> died(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        SplitMix64 rng(mix_seed(outcome_base, i));
        draws[i] = {rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform()};
        died[i] = draws[i][0] < sigmoid(sampled.scores[i] + intercept) ? 1 : 0;
    }

    double death_mean = 0, death_sd = 1;
    {
        double sum = 0, sum2 = 0;
        std::size_t count = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (!died[i]) continue;
            sum += sampled.scores[i];
            sum2 += sampled.scores[i] * sampled.scores[i];
            ++count;
        }
        if (count >= 2) {
            death_mean = sum / count;
            const double var = sum2 / count - death_mean * death_mean;
            death_sd = var > 1e-12 ? std::sqrt(var) : 1.0;
        } else if (count == 1) {
            death_mean = sum;
        }
    }

    constexpr Disposition kSurvivorDispositions[5] = {
        Disposition::admitted_general, Disposition::admitted_icu, Disposition::admitted_stepdown,
        Disposition::transferred_out, Disposition::discharged};
    constexpr Disposition kDeathDispositions[3] = {Disposition::deceased_expired,
                                                   Disposition::expired, Disposition::hospice};
    constexpr Disposition kInvalidDispositions[3] = {
        Disposition::not_applicable, Disposition::not_known, Disposition::left_ama};

    for (std::size_t i = 0; i < n; ++i) {
        PatientRecord& r = sampled.records[i];
        const auto& u = draws[i];
        if (died[i]) {
            r.disposition = kDeathDispositions[pick_category(u[1], spec.death_disposition_freq)];
            const double z = (sampled.scores[i] - death_mean) / death_sd;
            const double p_ed = std::clamp(spec.risk.ed_death_base - spec.risk.ed_death_z_slope * z,
                                           spec.risk.ed_death_min, spec.risk.ed_death_max);
            r.died_in_ed = u[2] < p_ed;
        } else {
            r.disposition =
                kSurvivorDispositions[pick_category(u[1], spec.survivor_disposition_freq)];
            r.died_in_ed = false;
        }
        const std::size_t validity = pick_category(u[3], spec.disposition_validity_freq);
        if (validity > 0) {
            r.disposition = kInvalidDispositions[validity - 1];
            r.died_in_ed = false;
        }
    }

    // Missingness, uniform at random: a hit record loses at least one of the
    // ten optional fields.
    const std::uint64_t missing_base = derive_seed(spec.seed, "synth.missing");
    for (std::size_t i = 0; i < n; ++i) {
        SplitMix64 rng(mix_seed(missing_base, i));
        if (!rng.bernoulli(spec.missingness_rate)) continue;
        PatientRecord& r = sampled.records[i];
        const std::uint64_t forced = rng.below(10);
        auto knock =
            [&](std::size_t idx, auto& field) {
                if (idx == forced || rng.bernoulli(0.25)) field.reset();
            };
        knock(0, r.oxygen_saturation);
        knock(1, r.systolic_bp);
        knock(2, r.pulse);
        knock(3, r.respiratory_rate);
        knock(4, r.temperature);
        knock(5, r.gcs_eye);
        knock(6, r.gcs_verbal);
        knock(7, r.gcs_motor);
        knock(8, r.arrived_by_ambulance);
        knock(9, r.transferred_in);
    }

    return std::move(sampled.records);
}

// ----- clamped-normal moments and calibration -----

double clamped_normal_mean(double mu, double sigma, double lo, double hi) {
    const double a = (lo - mu) / sigma;
    const double b = (hi - mu) / sigma;
    const double zmid = phi_cdf(b) - phi_cdf(a);
    return lo * phi_cdf(a) + hi * (1.0 - phi_cdf(b)) + mu * zmid +
           sigma * (phi_pdf(a) - phi_pdf(b));
}

double clamped_normal_sd(double mu, double sigma, double lo, double hi) {
    const double a = (lo - mu) / sigma;
    const double b = (hi - mu) / sigma;
    const double zmid = phi_cdf(b) - phi_cdf(a);
    const double e = clamped_normal_mean(mu, sigma, lo, hi);
    const double e2 = lo * lo * phi_cdf(a) + hi * hi * (1.0 - phi_cdf(b)) +
                      (mu * mu + sigma * sigma) * zmid +
                      2.0 * mu * sigma * (phi_pdf(a) - phi_pdf(b)) +
                      sigma * sigma * (a * phi_pdf(a) - b * phi_pdf(b));
    return std::sqrt(std::max(0.0, e2 - e * e));
}

namespace {

void discrete_bin_moments(double mu, double sigma, int lo, int hi, double& mean, double& sd) {
    double e = 0, e2 = 0;
    for (int k = lo; k <= hi; ++k) {
        const double upper = k == hi ? 1.0 : phi_cdf((k + 0.5 - mu) / sigma);
        const double lower = k == lo ? 0.0 : phi_cdf((k - 0.5 - mu) / sigma);
        const double p = upper - lower;
        e += k * p;
        e2 += static_cast<double>(k) * k * p;
    }
    mean = e;
    sd = std::sqrt(std::max(0.0, e2 - e * e));
}

} // namespace

double discrete_clamped_mean(double mu, double sigma, int lo, int hi) {
    double m, s;
    discrete_bin_moments(mu, sigma, lo, hi, m, s);
    return m;
}

double discrete_clamped_sd(double mu, double sigma, int lo, int hi) {
    double m, s;
    discrete_bin_moments(mu, sigma, lo, hi, m, s);
    return s;
}

ClampedNormalParams solve_clamped_normal(const VitalParams& target) {
    if (!(target.sd > 0) || !(target.lo < target.hi) || target.mean <= target.lo ||
        target.mean >= target.hi) {
        throw NumericError("solve_clamped_normal: bad target parameters");
    }
    auto moments = [&](double mu, double sigma, double& m, double& s) {
        if (target.integral) {
            discrete_bin_moments(mu, sigma, static_cast<int>(target.lo),
                                 static_cast<int>(target.hi), m, s);
        } else {
            m = clamped_normal_mean(mu, sigma, target.lo, target.hi);
            s = clamped_normal_sd(mu, sigma, target.lo, target.hi);
        }
    };

    // The clamped mean is strictly increasing in mu at fixed sigma, so the
    // mean target is solved exactly by bisection; sigma is then chosen by a
    // bracketed search on the achieved sd along that mean-matched path.
    const double range = target.hi - target.lo;
    auto mu_for_mean = [&](double sigma) {
        double lo = target.lo - 50.0 * sigma - range;
        double hi = target.hi + 50.0 * sigma + range;
        double m, s;
        for (int iter = 0; iter < 200; ++iter) {
            const double mid = 0.5 * (lo + hi);
            moments(mid, sigma, m, s);
            if (m < target.mean) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        return 0.5 * (lo + hi);
    };
    auto sd_at = [&](double sigma) {
        double m, s;
        moments(mu_for_mean(sigma), sigma, m, s);
        return s;
    };

    double best_sigma = target.sd;
    double best_err = std::abs(sd_at(best_sigma) - target.sd);
    double bracket_lo = 0, bracket_hi = 0;
    bool bracketed = false;
    double prev_sigma = std::max(1e-6, 0.01 * target.sd);
    double prev_diff = sd_at(prev_sigma) - target.sd;
    const double sigma_max = 300.0 * (target.sd + range);
    for (double sigma = prev_sigma * 1.3; sigma <= sigma_max; sigma *= 1.3) {
        const double diff = sd_at(sigma) - target.sd;
        if (std::abs(diff) < best_err) {
            best_err = std::abs(diff);
            best_sigma = sigma;
        }
        if ((prev_diff <= 0 && diff >= 0) || (prev_diff >= 0 && diff <= 0)) {
            bracket_lo = prev_sigma;
            bracket_hi = sigma;
            bracketed = true;
            break;
        }
        prev_sigma = sigma;
        prev_diff = diff;
    }
    double sigma = best_sigma;
    if (bracketed) {
        const double sign_lo = sd_at(bracket_lo) - target.sd;
        for (int iter = 0; iter < 100; ++iter) {
            const double mid = 0.5 * (bracket_lo + bracket_hi);
            const double d = sd_at(mid) - target.sd;
            if ((d <= 0) == (sign_lo <= 0)) {
                bracket_lo = mid;
            } else {
                bracket_hi = mid;
            }
        }
        sigma = 0.5 * (bracket_lo + bracket_hi);
    }
    // The sd target can be unreachable (published spreads of heavily
    // boundary-piled fields); the closest achievable spread is kept, with the
    // mean always exact.
    const double mu = mu_for_mean(sigma);
    double m, s;
    moments(mu, sigma, m, s);
    if (std::abs(m - target.mean) > 1e-6 * std::max(1.0, std::abs(target.mean))) {
        throw NumericError("solve_clamped_normal: mean target not reached");
    }
    return ClampedNormalParams{mu, sigma};
}

// ----- spec file I/O -----

namespace {

// Single definition of every documented scalar spec key.
void for_each_double_key(CohortSpec& s,
                         const std::function<void(const std::string&, double&)>& fn) {
    fn("mortality_rate", s.mortality_rate);
    fn("missingness_rate", s.missingness_rate);
    fn("ambulance_prob", s.ambulance_prob);
    fn("transferred_prob", s.transferred_prob);
    for (int i = 0; i < kNumSex; ++i) {
        fn("sex." + std::string(to_token(static_cast<Sex>(i))), s.sex_freq[i]);
    }
    for (int i = 0; i < kNumRace; ++i) {
        fn("race." + std::string(to_token(static_cast<Race>(i))), s.race_freq[i]);
    }
    for (int i = 0; i < kNumInjuryIntent; ++i) {
        fn("intent." + std::string(to_token(static_cast<InjuryIntent>(i))), s.intent_freq[i]);
    }
    for (int i = 0; i < kNumInjuryType; ++i) {
        fn("type." + std::string(to_token(static_cast<InjuryType>(i))), s.type_freq[i]);
    }
    for (int i = 0; i < kNumInjuryMechanism; ++i) {
        fn("mechanism." + std::string(to_token(static_cast<InjuryMechanism>(i))),
           s.mechanism_freq[i]);
    }
    for (int i = 0; i < kNumComorbidity; ++i) {
        fn("comorbidity." + std::string(to_token(static_cast<Comorbidity>(i))),
           s.comorbidity_prob[i]);
    }
    const char* survivor_names[5] = {"admitted_general", "admitted_icu", "admitted_stepdown",
                                     "transferred_out", "discharged"};
    for (int i = 0; i < 5; ++i) {
        fn("survivor_disposition." + std::string(survivor_names[i]),
           s.survivor_disposition_freq[i]);
    }
    const char* death_names[3] = {"deceased_expired", "expired", "hospice"};
    for (int i = 0; i < 3; ++i) {
        fn("death_disposition." + std::string(death_names[i]), s.death_disposition_freq[i]);
    }
    const char* validity_names[4] = {"valid", "not_applicable", "not_known", "left_ama"};
    for (int i = 0; i < 4; ++i) {
        fn("disposition_validity." + std::string(validity_names[i]),
           s.disposition_validity_freq[i]);
    }
    auto vital = [&](const std::string& name, VitalParams& v) {
        fn("vital." + name + ".mean", v.mean);
        fn("vital." + name + ".sd", v.sd);
        fn("vital." + name + ".lo", v.lo);
        fn("vital." + name + ".hi", v.hi);
    };
    vital("age", s.age);
    vital("oxygen_saturation", s.oxygen_saturation);
    vital("systolic_bp", s.systolic_bp);
    vital("pulse", s.pulse);
    vital("respiratory_rate", s.respiratory_rate);
    vital("temperature", s.temperature);
    vital("gcs_eye", s.gcs_eye);
    vital("gcs_verbal", s.gcs_verbal);
    vital("gcs_motor", s.gcs_motor);
    vital("iss", s.iss);
    for (int i = 0; i < 9; ++i) vital("ais" + std::to_string(i + 1), s.ais[i]);
    fn("risk.iss_per_point", s.risk.iss_per_point);
    fn("risk.gcs_deficit_per_point", s.risk.gcs_deficit_per_point);
    fn("risk.age_per_decade_over_18", s.risk.age_per_decade_over_18);
    fn("risk.low_sbp_per_10mmhg", s.risk.low_sbp_per_10mmhg);
    fn("risk.fall_elderly", s.risk.fall_elderly);
    fn("risk.fall_elderly_severity_attenuation", s.risk.fall_elderly_severity_attenuation);
    fn("risk.fall_elderly_noise_sd", s.risk.fall_elderly_noise_sd);
    fn("risk.ed_death_base", s.risk.ed_death_base);
    fn("risk.ed_death_z_slope", s.risk.ed_death_z_slope);
    fn("risk.ed_death_min", s.risk.ed_death_min);
    fn("risk.ed_death_max", s.risk.ed_death_max);
}

} // namespace

void apply_spec_override(CohortSpec& spec, const std::string& key, const std::string& value) {
    auto parse_num = [&]() {
        try {
            std::size_t pos = 0;
            const double v = std::stod(value, &pos);
            if (pos != value.size()) throw std::invalid_argument("trailing chars");
            return v;
        } catch (const std::exception&) {
            throw ValidationError("spec key '" + key + "': bad numeric value '" + value + "'");
        }
    };
    if (key == "n_records") {
        const double v = parse_num();
        if (v < 0 || v != std::floor(v)) {
            throw ValidationError("spec key 'n_records': expected a non-negative integer");
        }
        spec.n_records = static_cast<std::size_t>(v);
        return;
    }
    if (key == "seed") {
        try {
            spec.seed = std::stoull(value);
        } catch (const std::exception&) {
            throw ValidationError("spec key 'seed': bad integer value '" + value + "'");
        }
        return;
    }
    if (key == "age_group") {
        const auto g = age_group_from_token(value);
        if (!g) throw ValidationError("spec key 'age_group': unknown group '" + value + "'");
        spec.age_group = *g;
        return;
    }
    bool found = false;
    for_each_double_key(spec, [&](const std::string& k, double& field) {
        if (k == key) {
            field = parse_num();
            found = true;
        }
    });
    if (!found) throw ValidationError("unknown spec key '" + key + "'");
}

CohortSpec load_spec_file(const std::string& path, const CohortSpec& base) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open spec file: " + path);
    CohortSpec spec = base;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto notspace = line.find_first_not_of(" \t\r");
        if (notspace == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ValidationError("spec file line " + std::to_string(line_no) +
                                  ": expected key=value");
        }
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        apply_spec_override(spec, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return spec;
}

std::map<std::string, std::string> spec_to_key_values(const CohortSpec& spec) {
    std::map<std::string, std::string> out;
    out["n_records"] = std::to_string(spec.n_records);
    out["age_group"] = std::string(to_token(spec.age_group));
    out["seed"] = std::to_string(spec.seed);
    CohortSpec& mutable_spec = const_cast<CohortSpec&>(spec);
    for_each_double_key(mutable_spec, [&](const std::string& k, double& field) {
        out[k] = format_double(field);
    });
    return out;
}

std::string spec_to_json(const CohortSpec& spec) {
    nlohmann::json j;
    j["n_records"] = spec.n_records;
    j["age_group"] = std::string(to_token(spec.age_group));
    j["seed"] = spec.seed;
    CohortSpec& mutable_spec = const_cast<CohortSpec&>(spec);
    for_each_double_key(mutable_spec, [&](const std::string& k, double& field) {
        j[k] = field;
    });
    return j.dump(2) + "\n";
}

} // namespace triagenet
