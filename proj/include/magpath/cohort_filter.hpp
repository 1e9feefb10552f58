#pragma once
// Cohort selection and condition-related event filtering.
//
// Cases are selected by code lists inside a date window. Events without a
// valid diagnosis are kept when their procedure or occupation is "typical" of
// the cohort: frequent in the cohort and over-represented relative to a
// control sample matched case-for-case on pathway length.

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "magpath/eventlog.hpp"

namespace magpath {

using CodeSet = std::set<std::string>;

/// One code per line; blank lines and lines starting with '#' are ignored.
CodeSet load_code_list(const std::string& path);
CodeSet parse_code_list(std::istream& in);

struct DateWindow {
    Timestamp from = 0;
    Timestamp to = 0;  // inclusive
};

/// Cases with at least one in-window event whose value for a listed
/// perspective belongs to that perspective's code set.
std::set<std::string> select_cohort(const EventLog& log, const std::map<std::string, CodeSet>& code_lists,
                                    const DateWindow& window);

/// Cases to drop: any case whose extras match a listed value (e.g. sex = M) or
/// that has an event carrying an excluded code.
struct ExclusionRules {
    std::map<std::string, CodeSet> extra_values;
    std::map<std::string, CodeSet> perspective_codes;

    static ExclusionRules from_json(const nlohmann::json& j);
};

struct ExclusionResult {
    EventLog log;
    std::vector<std::string> excluded;
};

ExclusionResult exclude_cases(const EventLog& log, const ExclusionRules& rules);

struct ControlSample {
    EventLog control;
    /// Cohort cases left unmatched because the pool lacked pathways of their length.
    std::vector<std::string> skipped;
};

/// Control cases drawn from the pool with the same multiset of pathway
/// lengths as the cohort. Pool cases that also appear in the cohort are never drawn.
ControlSample matched_control_sample(const EventLog& cohort, const EventLog& pool, std::uint64_t seed);

struct FrequencyEntry {
    std::size_t cohort = 0;
    std::size_t control = 0;
    /// cohort / control; +inf when the code never occurs in the control sample.
    double ratio() const;
};

/// Event-count frequencies of one perspective's codes.
struct FrequencyTable {
    std::string perspective;
    std::map<std::string, FrequencyEntry> entries;

    nlohmann::json to_json() const;
};

FrequencyTable build_frequency_table(const EventLog& cohort, const EventLog& control,
                                     const std::string& perspective);

inline constexpr double kUnbounded = std::numeric_limits<double>::infinity();

/// Codes with ratio >= theta and cohort frequency within [min_f, max_f].
CodeSet select_typical_codes(const FrequencyTable& table, double theta, double min_f, double max_f = kUnbounded);

struct FilterThresholds {
    double theta_p = 6;
    double theta_o = 10;
    double min_p = 10;
    double max_p = kUnbounded;
    double min_o = 50;
    double max_o = kUnbounded;

    void validate() const;
    static FilterThresholds from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

/// Diagnosis validity: an ICD-10-like code (letter, two digits, optional
/// fourth character) that is not one of the configured invalid sentinels.
struct DiagnosisRule {
    std::regex pattern{"^[A-Z][0-9]{2}[0-9A-Z]?$"};
    CodeSet invalid_codes;

    bool valid(const std::string& code) const;
};

/// Names of the perspectives the filter looks at.
struct FilterPerspectives {
    std::string diagnosis = "diagnosis";
    std::string procedure = "intervention";
    std::string occupation = "occupation";
};

struct FilterResult {
    EventLog log;
    /// Cases that lost every event.
    std::vector<std::string> emptied;
    std::size_t kept_by_diagnosis = 0;
    std::size_t kept_by_codes = 0;
};

/// Keeps events with a valid whitelisted diagnosis, plus events without a
/// valid diagnosis whose procedure or occupation is typical. Events with a
/// valid diagnosis outside the whitelist are dropped.
FilterResult filter_events(const EventLog& log, const CodeSet& diagnosis_whitelist, const CodeSet& typical_procedures,
                           const CodeSet& typical_occupations, const FilterPerspectives& names = {},
                           const DiagnosisRule& rule = {});

struct PreviewReport {
    struct CodeRow {
        std::string code;
        std::size_t cohort;
        std::size_t control;
        double ratio;
    };
    std::vector<CodeRow> procedures;
    std::vector<CodeRow> occupations;
    std::size_t passing_events = 0;
    std::size_t passing_without_diagnosis = 0;
    std::size_t total_events = 0;
    /// Procedure codes among passing events, by descending count.
    std::vector<std::pair<std::string, std::size_t>> passing_procedures;

    nlohmann::json to_json() const;
};

/// What filter_events would do under the given thresholds, without building the log.
PreviewReport preview_filter(const FilterThresholds& thresholds, const FrequencyTable& procedures,
                             const FrequencyTable& occupations, const EventLog& log,
                             const CodeSet& diagnosis_whitelist, std::size_t sample_size = 20,
                             const FilterPerspectives& names = {}, const DiagnosisRule& rule = {});

struct MergeReport {
    /// Number of (case, date, unit, occupation) groups by (procedures, diagnoses) shape.
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> group_shapes;
    std::size_t merged_groups = 0;
    std::size_t merged_events = 0;
};

struct MergeResult {
    EventLog log;
    MergeReport report;
};

/// Attaches diagnoses to procedure records sharing (case, date, unit,
/// occupation). Groups holding exactly one diagnosis copy it to every
/// procedure; procedures of other groups are dropped unless keep_unmatched,
/// in which case they carry the missing sentinel.
/// `diagnoses` must have a perspective named `names.diagnosis`; the result
/// schema is the procedure schema with the diagnosis perspective appended
/// (or overwritten if already present).
MergeResult merge_procedure_diagnoses(const EventLog& procedures, const EventLog& diagnoses,
                                      const std::string& unit_perspective = "unit",
                                      const FilterPerspectives& names = {}, bool keep_unmatched = false);

}  // namespace magpath
