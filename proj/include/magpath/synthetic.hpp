#pragma once
// Synthetic event logs with known ground truth, used by tests, the acceptance
// suite and the CLI's demo data command.

#include <cstdint>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "magpath/eventlog.hpp"

namespace magpath {

/// Pregnancy-like follow-up: a backbone of monthly antenatal visits in primary
/// care, routine exams, specialist care in a maternity hospital for a share of
/// patients, delivery at the end and scattered unrelated events.
struct PregnancyOptions {
    std::size_t cases = 200;
    std::uint64_t seed = 7;
    std::size_t min_visits = 4;
    std::size_t max_visits = 9;
    double high_risk_share = 0.3;
    double noise_rate = 0.15;
    bool with_diagnosis = false;
};

EventLog synthetic_pregnancy_log(const PregnancyOptions& options = {});

/// Activity values used by the pregnancy generator.
namespace synth {
inline const std::string kAntenatal = "antenatal_visit";
inline const std::string kBloodTest = "blood_test";
inline const std::string kUltrasound = "ultrasound";
inline const std::string kHighRisk = "high_risk_consult";
inline const std::string kDelivery = "delivery";
inline const std::string kDental = "dental_check";
inline const std::string kFlu = "flu_shot";
inline const std::string kMaternity = "maternity_hospital";
}  // namespace synth

/// Cohort and control logs with identical length multisets and exact code counts.
/// Planted procedures have ratio >= 6 with cohort count >= 10, planted
/// occupations ratio >= 10 with cohort count >= 50. Decoys sit just below a
/// ratio or a frequency bound.
struct CohortFixture {
    EventLog cohort;
    EventLog control;
    std::set<std::string> planted_procedures;
    std::set<std::string> planted_occupations;
    std::set<std::string> decoy_procedures;
    std::set<std::string> decoy_occupations;
};

CohortFixture synthetic_cohort_fixture(std::uint64_t seed = 11);

/// Two groups of patients, each dominated by one (intervention, occupation) pair.
struct TwoGroupFixture {
    EventLog log;
    std::vector<std::string> group_a;
    std::vector<std::string> group_b;
    std::pair<std::string, std::string> dominant_a;
    std::pair<std::string, std::string> dominant_b;
};

TwoGroupFixture synthetic_two_group_log(std::size_t per_group = 15, std::uint64_t seed = 3);

/// Small random log over tiny alphabets (intervention, occupation, unit).
EventLog random_log(std::uint64_t seed, std::size_t cases, std::size_t max_length, std::size_t alphabet = 3,
                    std::size_t max_gap_days = 10);

/// Delimited text with a header: case_id,date,<perspectives...>
void write_csv(const EventLog& log, std::ostream& out);

}  // namespace magpath
