#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace triagenet {

enum class Sex : std::uint8_t { female, male };
inline constexpr int kNumSex = 2;

enum class Race : std::uint8_t {
    white,
    black_or_african_american,
    other_race,
    asian,
    american_indian,
    race_na,
    native_hawaiian_or_other_pacific_islander,
};
inline constexpr int kNumRace = 7;

enum class InjuryIntent : std::uint8_t {
    assault,
    other,
    self_inflicted,
    undetermined,
    unintentional,
};
inline constexpr int kNumInjuryIntent = 5;

enum class InjuryType : std::uint8_t {
    blunt,
    burn,
    other_unspecified,
    penetrating,
};
inline constexpr int kNumInjuryType = 4;

enum class InjuryMechanism : std::uint8_t {
    adverse_effects_drugs,
    adverse_effects_medical_care,
    cut_pierce,
    drowning_submersion,
    fall,
    fire_flame,
    firearm,
    hot_object_substance,
    mvt_motorcyclist,
    mvt_occupant,
    mvt_other,
    mvt_pedal_cyclist,
    mvt_pedestrian,
    mvt_unspecified,
    machinery,
    natural_environmental_bites_and_stings,
    natural_environmental_other,
    other_specified_and_classifiable,
    other_specified_not_elsewhere_classifiable,
    overexertion,
    pedal_cyclist_other,
    pedestrian_other,
    poisoning,
    struck_by_against,
    suffocation,
    transport_other,
    unspecified,
};
inline constexpr int kNumInjuryMechanism = 27;

enum class Comorbidity : std::uint8_t {
    alcoholism,
    angina,
    ascites_within_30_days,
    bleeding_disorder,
    chemotherapy,
    congenital_anomalies,
    congestive_heart_failure,
    current_smoker,
    cva_residual_neurological_deficit,
    diabetes_mellitus,
    disseminated_cancer,
    esophageal_varices,
    functionally_dependent_health_status,
    hypertension_requiring_medication,
    myocardial_infarction,
    obesity,
    prematurity,
    pvd,
    respiratory_disease,
    steroid_use,
};
inline constexpr int kNumComorbidity = 20;

enum class Disposition : std::uint8_t {
    deceased_expired,
    expired,
    hospice,
    admitted_general,
    admitted_icu,
    admitted_stepdown,
    transferred_out,
    discharged,
    not_applicable,
    not_known,
    left_ama,
};
inline constexpr int kNumDisposition = 11;

enum class OutcomeScope : std::uint8_t { ed_only, hospital_and_ed };

enum class AgeGroup : std::uint8_t { children, adults, all };

// Canonical snake_case tokens (the CSV interchange vocabulary) and the
// human-readable display names used in report tables.
std::string_view to_token(Sex v);
std::string_view to_token(Race v);
std::string_view to_token(InjuryIntent v);
std::string_view to_token(InjuryType v);
std::string_view to_token(InjuryMechanism v);
std::string_view to_token(Comorbidity v);
std::string_view to_token(Disposition v);
std::string_view to_token(OutcomeScope v);
std::string_view to_token(AgeGroup v);
std::string_view display_name(InjuryMechanism v);

std::optional<Sex> sex_from_token(std::string_view token);
std::optional<Race> race_from_token(std::string_view token);
std::optional<InjuryIntent> intent_from_token(std::string_view token);
std::optional<InjuryType> type_from_token(std::string_view token);
std::optional<InjuryMechanism> mechanism_from_token(std::string_view token);
std::optional<Comorbidity> comorbidity_from_token(std::string_view token);
std::optional<Disposition> disposition_from_token(std::string_view token);
std::optional<OutcomeScope> scope_from_token(std::string_view token);
std::optional<AgeGroup> age_group_from_token(std::string_view token);

/// Mechanism lookup that accepts either the canonical token or the display
/// name ("Fall", "MVT Occupant"), case-insensitively.
std::optional<InjuryMechanism> mechanism_from_name(std::string_view name);

/// Comorbidity flags as a bitmask; empty set means "no comorbidities".
class ComorbiditySet {
public:
    ComorbiditySet() = default;

    void set(Comorbidity c) { bits_ |= 1u << static_cast<unsigned>(c); }
    void clear(Comorbidity c) { bits_ &= ~(1u << static_cast<unsigned>(c)); }
    bool test(Comorbidity c) const { return (bits_ >> static_cast<unsigned>(c)) & 1u; }
    bool none() const { return bits_ == 0; }
    std::uint32_t bits() const { return bits_; }

    friend bool operator==(const ComorbiditySet&, const ComorbiditySet&) = default;

private:
    std::uint32_t bits_ = 0;
};

/// One ED visit. Vitals, GCS components and the two arrival flags may be
/// missing; everything else is always populated.
struct PatientRecord {
    int age = 0;
    Sex sex = Sex::female;
    Race race = Race::white;
    std::optional<double> oxygen_saturation;
    std::optional<double> systolic_bp;
    std::optional<double> pulse;
    std::optional<double> respiratory_rate;
    std::optional<double> temperature;
    std::optional<int> gcs_eye;
    std::optional<int> gcs_verbal;
    std::optional<int> gcs_motor;
    int iss = 0;
    std::array<int, 9> ais{};
    ComorbiditySet comorbidities;
    InjuryIntent injury_intent = InjuryIntent::unintentional;
    InjuryType injury_type = InjuryType::blunt;
    InjuryMechanism injury_mechanism = InjuryMechanism::fall;
    std::optional<bool> arrived_by_ambulance;
    std::optional<bool> transferred_in;
    Disposition disposition = Disposition::discharged;
    // Provenance flag: true when the recorded outcome was reached in the ED
    // itself rather than after admission. Drives assign_scope for deaths.
    bool died_in_ed = false;

    /// Sum of the three GCS components; all three must be present.
    int gcs_total() const;

    friend bool operator==(const PatientRecord&, const PatientRecord&) = default;
};

/// Throws ValidationError if any populated field is outside its legal range
/// (GCS component ranges, ISS 0-75, AIS 0-6, age >= 0).
void validate_record(const PatientRecord& r);

/// A disposition usable as an outcome (not excluded by the study filter).
bool is_valid_outcome(Disposition d);

/// Study inclusion filter: all five vitals, all three GCS components and both
/// arrival flags present, and a valid outcome disposition. Total function.
bool passes_inclusion(const PatientRecord& r);

/// Mortality label. Throws ValidationError for dispositions that should have
/// been removed by the inclusion filter.
bool label_mortality(Disposition d);

/// Partition of included records into the ED-outcome and hospital-outcome
/// data sets. Deaths follow the died_in_ed provenance flag; survivors are
/// ED-scope when the visit ended without admission here (discharged or
/// transferred out) and hospital-scope when admitted.
OutcomeScope assign_scope(const PatientRecord& r);

/// Records passing the inclusion filter, order preserved.
std::vector<PatientRecord> filter_included(std::span<const PatientRecord> records);

/// Complement of filter_included.
std::vector<PatientRecord> filter_excluded(std::span<const PatientRecord> records);

/// Human-readable reasons a record fails inclusion; empty if it passes.
std::vector<std::string_view> inclusion_failures(const PatientRecord& r);

/// Age-group membership (children < 18 <= adults); `all` matches everything.
bool in_age_group(const PatientRecord& r, AgeGroup g);

} // namespace triagenet
