#include "triagenet/record.hpp"

#include <algorithm>
#include <cctype>
#include <string>

#include "triagenet/errors.hpp"

namespace triagenet {

namespace {

constexpr std::string_view kSexTokens[kNumSex] = {"female", "male"};

constexpr std::string_view kRaceTokens[kNumRace] = {
    "white",
    "black_or_african_american",
    "other_race",
    "asian",
    "american_indian",
    "race_na",
    "native_hawaiian_or_other_pacific_islander",
};

constexpr std::string_view kIntentTokens[kNumInjuryIntent] = {
    "assault", "other", "self_inflicted", "undetermined", "unintentional",
};

constexpr std::string_view kTypeTokens[kNumInjuryType] = {
    "blunt", "burn", "other_unspecified", "penetrating",
};

constexpr std::string_view kMechanismTokens[kNumInjuryMechanism] = {
    "adverse_effects_drugs",
    "adverse_effects_medical_care",
    "cut_pierce",
    "drowning_submersion",
    "fall",
    "fire_flame",
    "firearm",
    "hot_object_substance",
    "mvt_motorcyclist",
    "mvt_occupant",
    "mvt_other",
    "mvt_pedal_cyclist",
    "mvt_pedestrian",
    "mvt_unspecified",
    "machinery",
    "natural_environmental_bites_and_stings",
    "natural_environmental_other",
    "other_specified_and_classifiable",
    "other_specified_not_elsewhere_classifiable",
    "overexertion",
    "pedal_cyclist_other",
    "pedestrian_other",
    "poisoning",
    "struck_by_against",
    "suffocation",
    "transport_other",
    "unspecified",
};

constexpr std::string_view kMechanismDisplay[kNumInjuryMechanism] = {
    "Adverse effects, drugs",
    "Adverse effects, medical care",
    "Cut/pierce",
    "Drowning/submersion",
    "Fall",
    "Fire/flame",
    "Firearm",
    "Hot object/substance",
    "MVT Motorcyclist",
    "MVT Occupant",
    "MVT Other",
    "MVT Pedal cyclist",
    "MVT Pedestrian",
    "MVT Unspecified",
    "Machinery",
    "Natural/environmental, Bites and stings",
    "Natural/environmental, Other",
    "Other specified and classifiable",
    "Other specified, not elsewhere classifiable",
    "Overexertion",
    "Pedal cyclist, other",
    "Pedestrian, other",
    "Poisoning",
    "Struck by, against",
    "Suffocation",
    "Transport, other",
    "Unspecified",
};

constexpr std::string_view kComorbidityTokens[kNumComorbidity] = {
    "alcoholism",
    "angina",
    "ascites_within_30_days",
    "bleeding_disorder",
    "chemotherapy",
    "congenital_anomalies",
    "congestive_heart_failure",
    "current_smoker",
    "cva_residual_neurological_deficit",
    "diabetes_mellitus",
    "disseminated_cancer",
    "esophageal_varices",
    "functionally_dependent_health_status",
    "hypertension_requiring_medication",
    "myocardial_infarction",
    "obesity",
    "prematurity",
    "pvd",
    "respiratory_disease",
    "steroid_use",
};

constexpr std::string_view kDispositionTokens[kNumDisposition] = {
    "deceased_expired",
    "expired",
    "hospice",
    "admitted_general",
    "admitted_icu",
    "admitted_stepdown",
    "transferred_out",
    "discharged",
    "not_applicable",
    "not_known",
    "left_ama",
};

constexpr std::string_view kScopeTokens[2] = {"ed_only", "hospital_and_ed"};
constexpr std::string_view kAgeGroupTokens[3] = {"children", "adults", "all"};

template <typename Enum, std::size_t N>
std::optional<Enum> from_token(const std::string_view (&table)[N], std::string_view token) {
    for (std::size_t i = 0; i < N; ++i) {
        if (table[i] == token) return static_cast<Enum>(i);
    }
    return std::nullopt;
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

} // namespace

std::string_view to_token(Sex v) { return kSexTokens[static_cast<int>(v)]; }
std::string_view to_token(Race v) { return kRaceTokens[static_cast<int>(v)]; }
std::string_view to_token(InjuryIntent v) { return kIntentTokens[static_cast<int>(v)]; }
std::string_view to_token(InjuryType v) { return kTypeTokens[static_cast<int>(v)]; }
std::string_view to_token(InjuryMechanism v) { return kMechanismTokens[static_cast<int>(v)]; }
std::string_view to_token(Comorbidity v) { return kComorbidityTokens[static_cast<int>(v)]; }
std::string_view to_token(Disposition v) { return kDispositionTokens[static_cast<int>(v)]; }
std::string_view to_token(OutcomeScope v) { return kScopeTokens[static_cast<int>(v)]; }
std::string_view to_token(AgeGroup v) { return kAgeGroupTokens[static_cast<int>(v)]; }
std::string_view display_name(InjuryMechanism v) { return kMechanismDisplay[static_cast<int>(v)]; }

std::optional<Sex> sex_from_token(std::string_view t) { return from_token<Sex>(kSexTokens, t); }
std::optional<Race> race_from_token(std::string_view t) { return from_token<Race>(kRaceTokens, t); }
std::optional<InjuryIntent> intent_from_token(std::string_view t) { return from_token<InjuryIntent>(kIntentTokens, t); }
std::optional<InjuryType> type_from_token(std::string_view t) { return from_token<InjuryType>(kTypeTokens, t); }
std::optional<InjuryMechanism> mechanism_from_token(std::string_view t) { return from_token<InjuryMechanism>(kMechanismTokens, t); }
std::optional<Comorbidity> comorbidity_from_token(std::string_view t) { return from_token<Comorbidity>(kComorbidityTokens, t); }
std::optional<Disposition> disposition_from_token(std::string_view t) { return from_token<Disposition>(kDispositionTokens, t); }
std::optional<OutcomeScope> scope_from_token(std::string_view t) { return from_token<OutcomeScope>(kScopeTokens, t); }
std::optional<AgeGroup> age_group_from_token(std::string_view t) { return from_token<AgeGroup>(kAgeGroupTokens, t); }

std::optional<InjuryMechanism> mechanism_from_name(std::string_view name) {
    if (auto m = mechanism_from_token(name)) return m;
    const std::string needle = lower(name);
    for (int i = 0; i < kNumInjuryMechanism; ++i) {
        if (lower(kMechanismDisplay[i]) == needle) return static_cast<InjuryMechanism>(i);
    }
    return std::nullopt;
}

int PatientRecord::gcs_total() const {
    if (!gcs_eye || !gcs_verbal || !gcs_motor) {
        throw ValidationError("gcs_total requires all three GCS components");
    }
    return *gcs_eye + *gcs_verbal + *gcs_motor;
}

void validate_record(const PatientRecord& r) {
    auto check = [](bool ok, const char* what) {
        if (!ok) throw ValidationError(std::string("invalid record field: ") + what);
    };
    check(r.age >= 0, "age");
    check(!r.gcs_eye || (*r.gcs_eye >= 1 && *r.gcs_eye <= 4), "gcs_eye");
    check(!r.gcs_verbal || (*r.gcs_verbal >= 1 && *r.gcs_verbal <= 5), "gcs_verbal");
    check(!r.gcs_motor || (*r.gcs_motor >= 1 && *r.gcs_motor <= 6), "gcs_motor");
    check(r.iss >= 0 && r.iss <= 75, "iss");
    for (const int a : r.ais) check(a >= 0 && a <= 6, "ais");
    check(!r.oxygen_saturation || (*r.oxygen_saturation >= 0 && *r.oxygen_saturation <= 100),
          "oxygen_saturation");
}

bool is_valid_outcome(Disposition d) {
    return d != Disposition::not_applicable && d != Disposition::not_known &&
           d != Disposition::left_ama;
}

bool passes_inclusion(const PatientRecord& r) {
    return r.oxygen_saturation && r.systolic_bp && r.pulse && r.respiratory_rate &&
           r.temperature && r.gcs_eye && r.gcs_verbal && r.gcs_motor &&
           r.arrived_by_ambulance && r.transferred_in && is_valid_outcome(r.disposition);
}

bool label_mortality(Disposition d) {
    if (!is_valid_outcome(d)) {
        throw ValidationError(std::string("label_mortality on excluded disposition: ") +
                              std::string(to_token(d)));
    }
    return d == Disposition::deceased_expired || d == Disposition::expired ||
           d == Disposition::hospice;
}

OutcomeScope assign_scope(const PatientRecord& r) {
    if (label_mortality(r.disposition)) {
        return r.died_in_ed ? OutcomeScope::ed_only : OutcomeScope::hospital_and_ed;
    }
    switch (r.disposition) {
        case Disposition::discharged:
        case Disposition::transferred_out:
            return OutcomeScope::ed_only;
        default:
            return OutcomeScope::hospital_and_ed;
    }
}

std::vector<PatientRecord> filter_included(std::span<const PatientRecord> records) {
    std::vector<PatientRecord> out;
    out.reserve(records.size());
    for (const auto& r : records) {
        if (passes_inclusion(r)) out.push_back(r);
    }
    return out;
}

std::vector<PatientRecord> filter_excluded(std::span<const PatientRecord> records) {
    std::vector<PatientRecord> out;
    for (const auto& r : records) {
        if (!passes_inclusion(r)) out.push_back(r);
    }
    return out;
}

std::vector<std::string_view> inclusion_failures(const PatientRecord& r) {
    std::vector<std::string_view> reasons;
    if (!r.oxygen_saturation) reasons.push_back("missing oxygen_saturation");
    if (!r.systolic_bp) reasons.push_back("missing systolic_bp");
    if (!r.pulse) reasons.push_back("missing pulse");
    if (!r.respiratory_rate) reasons.push_back("missing respiratory_rate");
    if (!r.temperature) reasons.push_back("missing temperature");
    if (!r.gcs_eye) reasons.push_back("missing gcs_eye");
    if (!r.gcs_verbal) reasons.push_back("missing gcs_verbal");
    if (!r.gcs_motor) reasons.push_back("missing gcs_motor");
    if (!r.arrived_by_ambulance) reasons.push_back("missing arrived_by_ambulance");
    if (!r.transferred_in) reasons.push_back("missing transferred_in");
    if (!is_valid_outcome(r.disposition)) reasons.push_back("excluded disposition");
    return reasons;
}

bool in_age_group(const PatientRecord& r, AgeGroup g) {
    switch (g) {
        case AgeGroup::children: return r.age < 18;
        case AgeGroup::adults: return r.age >= 18;
        case AgeGroup::all: return true;
    }
    return true;
}

} // namespace triagenet
