#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "triagenet/record.hpp"

namespace triagenet {

/// Target moments and physiologic clamp bounds for one sampled field.
/// Values are drawn from a normal, clamped (censored) into [lo, hi] and, for
/// integral fields, rounded to the nearest integer first.
struct VitalParams {
    double mean = 0;
    double sd = 1;
    double lo = 0;
    double hi = 1;
    bool integral = false;
};

/// Weights of the latent logistic mortality model that drives disposition
/// sampling. The observable part uses only fields a triage model can see;
/// fall_elderly_noise_sd injects per-record risk that no predictor carries,
/// and the ed_death knobs skew which deaths are recorded in the ED. All of
/// these are synthetic calibration knobs, not published quantities.
struct RiskCoefficients {
    double iss_per_point = 0.20;
    double gcs_deficit_per_point = 0.60;
    double age_per_decade_over_18 = 0.20;
    double low_sbp_per_10mmhg = 1.00;
    double fall_elderly = 1.20;
    // Recorded severity scores under-state the risk of elderly falls: their
    // severity terms are scaled down by this factor while the flat bump above
    // keeps the group's mortality elevated, which is what makes the
    // fall-ablation comparison move the way the published one does.
    double fall_elderly_severity_attenuation = 0.35;
    double fall_elderly_noise_sd = 1.20;
    // P(died_in_ed | death) = clamp(base - z_slope * z, min, max) where z is
    // the death's risk score standardized over all deaths in the cohort.
    double ed_death_base = 0.17;
    double ed_death_z_slope = 0.05;
    double ed_death_min = 0.02;
    double ed_death_max = 0.90;
};

/// Generator calibration: marginal frequencies, vital moments, latent risk
/// weights and the target mortality rate for one age group.
struct CohortSpec {
    std::size_t n_records = 0;
    AgeGroup age_group = AgeGroup::adults;
    std::uint64_t seed = 0;

    double mortality_rate = 0;
    double missingness_rate = 0.1;

    // Frequency tables over the category enum order; each sums to 1.
    std::array<double, kNumSex> sex_freq{};
    std::array<double, kNumRace> race_freq{};
    std::array<double, kNumInjuryIntent> intent_freq{};
    std::array<double, kNumInjuryType> type_freq{};
    std::array<double, kNumInjuryMechanism> mechanism_freq{};
    // Survivor dispositions: admitted_general, admitted_icu, admitted_stepdown,
    // transferred_out, discharged.
    std::array<double, 5> survivor_disposition_freq{};
    // Death dispositions: deceased_expired, expired, hospice.
    std::array<double, 3> death_disposition_freq{};
    // Outcome validity overlay: valid, not_applicable, not_known, left_ama.
    std::array<double, 4> disposition_validity_freq{};

    // Independent Bernoulli marginals; a record with no flags set carries the
    // "no comorbidities" label.
    std::array<double, kNumComorbidity> comorbidity_prob{};
    double ambulance_prob = 0;
    double transferred_prob = 0;

    VitalParams age;
    VitalParams oxygen_saturation, systolic_bp, pulse, respiratory_rate, temperature;
    VitalParams gcs_eye, gcs_verbal, gcs_motor;
    VitalParams iss;
    std::array<VitalParams, 9> ais;

    RiskCoefficients risk;

    /// Throws ValidationError on malformed specs (frequency tables off 1 by
    /// more than 1e-9, mortality_rate outside (0,1), n_records = 0).
    void validate() const;
};

/// Built-in spec whose marginals and vital moments match the published
/// children / adult cohort tables; `all` is the size-weighted pool of the two.
CohortSpec default_spec(AgeGroup group);

/// Observable part of the latent log-odds (no intercept, no hidden noise).
/// Requires complete vitals/GCS; generated records always qualify.
double latent_risk_score(const PatientRecord& r, const RiskCoefficients& risk);

/// Intercept b such that the cohort mean of sigmoid(score + b) equals
/// spec.mortality_rate, found by bisection on [-30, 30] over the exact score
/// sample generate() would draw. Throws NumericError if the bracket does not
/// straddle the target.
double calibrate_intercept(const CohortSpec& spec);

/// Deterministic synthetic cohort: exactly n_records records sampled from the
/// spec's marginals and clamped normals, with dispositions driven by the
/// latent risk model and missingness injected uniformly at random.
std::vector<PatientRecord> generate(const CohortSpec& spec);

// --- clamped-normal moment calibration (exposed for tests) ---

struct ClampedNormalParams {
    double mu = 0;
    double sigma = 1;
};

/// Moments of clamp(N(mu, sigma), lo, hi), continuous case.
double clamped_normal_mean(double mu, double sigma, double lo, double hi);
double clamped_normal_sd(double mu, double sigma, double lo, double hi);
/// Moments of clamp(lround(N(mu, sigma)), lo, hi), integer case.
double discrete_clamped_mean(double mu, double sigma, int lo, int hi);
double discrete_clamped_sd(double mu, double sigma, int lo, int hi);

/// Pre-clamp (mu, sigma) whose clamped distribution matches target.mean and
/// target.sd. Throws NumericError when the targets are unreachable.
ClampedNormalParams solve_clamped_normal(const VitalParams& target);

// --- spec file I/O ---

/// Flat key=value text ('#' comments allowed). Unknown keys are rejected.
/// Values override the given base spec.
CohortSpec load_spec_file(const std::string& path, const CohortSpec& base);

/// Apply one documented key ("mortality_rate", "risk.iss_per_point",
/// "mechanism.fall", "vital.systolic_bp.mean", ...). Throws ValidationError
/// on unknown keys or unparsable values.
void apply_spec_override(CohortSpec& spec, const std::string& key, const std::string& value);

/// All documented keys with current values, in canonical order.
std::map<std::string, std::string> spec_to_key_values(const CohortSpec& spec);

/// Sidecar JSON of the exact spec used for a generation run.
std::string spec_to_json(const CohortSpec& spec);

} // namespace triagenet
