#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "magpath/cohort_filter.hpp"
#include "magpath/synthetic.hpp"

using namespace magpath;

namespace {

constexpr Timestamp kDay = 86400;

Event ev(const std::string& c, int day, std::vector<std::string> p, std::size_t row = 0) {
    return Event{c, static_cast<Timestamp>(day) * kDay, std::move(p), {}, row};
}

// Count occurrences of a code by hand.
std::size_t count(const EventLog& log, std::size_t idx, const std::string& code) {
    return static_cast<std::size_t>(std::count_if(log.events().begin(), log.events().end(),
                                                  [&](const Event& e) { return e.perspectives[idx] == code; }));
}

}  // namespace

TEST_CASE("code lists") {
    std::istringstream in("# pregnancy\nO24\n  Z34 \n\nO80\r\n");
    CHECK(parse_code_list(in) == CodeSet{"O24", "O80", "Z34"});
    CHECK_THROWS(load_code_list("/nonexistent/codes.txt"));
}

TEST_CASE("cohort selection inside a date window") {
    const EventLog log({"diagnosis", "intervention"}, {ev("a", 1, {"O24", "x"}), ev("a", 50, {"Z34", "x"}),
                                                       ev("b", 60, {"O24", "x"}), ev("c", 5, {"J10", "preg_test"})});
    const DateWindow w{0, 30 * kDay};
    CHECK(select_cohort(log, {{"diagnosis", {"O24"}}}, w) == std::set<std::string>{"a"});
    CHECK(select_cohort(log, {{"diagnosis", {"O24"}}, {"intervention", {"preg_test"}}}, w) ==
          std::set<std::string>{"a", "c"});
    CHECK(select_cohort(log, {{"diagnosis", {"O24"}}}, {0, 60 * kDay}) == std::set<std::string>{"a", "b"});
    CHECK_THROWS_AS(select_cohort(log, {{"diagnosis", {}}}, w), std::invalid_argument);
    CHECK_THROWS_AS(select_cohort(log, {{"diagnosis", {"O24"}}}, {10, 0}), std::invalid_argument);
    CHECK_THROWS_AS(select_cohort(log, {{"nope", {"O24"}}}, w), SchemaError);
}

TEST_CASE("exclusions by extra value and by code") {
    Event male = ev("m", 1, {"x"});
    male.extras["sex"] = "M";
    Event fem = ev("f", 1, {"x"});
    fem.extras["sex"] = "F";
    const EventLog log({"intervention"}, {male, fem, ev("g", 1, {"hysterectomy"})});
    const auto rules = ExclusionRules::from_json({{"extras", {{"sex", {"M"}}}}, {"codes", {{"intervention", {"hysterectomy"}}}}});
    const auto r = exclude_cases(log, rules);
    CHECK(r.log.case_ids() == std::vector<std::string>{"f"});
    CHECK(r.excluded == std::vector<std::string>{"g", "m"});
}

TEST_CASE("matched control has the cohort's length multiset") {
    const auto cohort = random_log(1, 40, 6);
    const auto pool = random_log(2, 400, 6);
    // cohort ids c000.. overlap pool ids; those are never drawn
    const auto s = matched_control_sample(cohort, pool, 99);
    std::multiset<std::size_t> want, got;
    for (const auto& id : cohort.case_ids()) want.insert(cohort.case_length(id));
    for (const auto& id : s.control.case_ids()) {
        got.insert(s.control.case_length(id));
        CHECK_FALSE(cohort.has_case(id));
    }
    CHECK(s.skipped.empty());
    CHECK(got == want);
    CHECK(matched_control_sample(cohort, pool, 99).control.case_ids() == s.control.case_ids());

    // a pool without long pathways leaves cohort cases unmatched
    const auto short_pool = random_log(3, 50, 1);
    const auto partial = matched_control_sample(cohort, short_pool, 1);
    std::size_t long_cases = 0;
    for (const auto& id : cohort.case_ids()) long_cases += cohort.case_length(id) > 1;
    CHECK(partial.skipped.size() >= long_cases);
}

TEST_CASE("frequency ratios") {
    CHECK(FrequencyEntry{12, 2}.ratio() == 6.0);
    CHECK(std::isinf(FrequencyEntry{3, 0}.ratio()));
    CHECK(FrequencyEntry{0, 0}.ratio() == 0.0);

    const auto f = synthetic_cohort_fixture();
    const auto t = build_frequency_table(f.cohort, f.control, "intervention");
    const auto idx = f.cohort.perspective_index("intervention");
    for (const auto& [code, e] : t.entries) {
        CHECK(e.cohort == count(f.cohort, idx, code));
        CHECK(e.control == count(f.control, idx, code));
    }
    CHECK(t.entries.at("proc_r6").ratio() == 6.0);
}

TEST_CASE("thresholds select the planted codes and loosening only adds") {
    const auto f = synthetic_cohort_fixture();
    const auto procs = build_frequency_table(f.cohort, f.control, "intervention");
    const auto occs = build_frequency_table(f.cohort, f.control, "occupation");
    const FilterThresholds base;
    CHECK(select_typical_codes(procs, base.theta_p, base.min_p) == f.planted_procedures);
    CHECK(select_typical_codes(occs, base.theta_o, base.min_o) == f.planted_occupations);

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0, 1);
    for (int k = 0; k < 200; ++k) {
        const double theta = 1 + 10 * u(rng), min_f = 100 * u(rng), max_f = 200 + 1000 * u(rng);
        const auto tight = select_typical_codes(procs, theta, min_f, max_f);
        const auto loose = select_typical_codes(procs, theta * u(rng), min_f * u(rng), max_f * (1 + u(rng)));
        CHECK(std::includes(loose.begin(), loose.end(), tight.begin(), tight.end()));
    }
}

TEST_CASE("threshold parsing") {
    const auto t = FilterThresholds::from_json({{"theta_p", 3}, {"max_o", "inf"}, {"max_p", 500}});
    CHECK(t.theta_p == 3);
    CHECK(std::isinf(t.max_o));
    CHECK(t.max_p == 500);
    CHECK(FilterThresholds::from_json(t.to_json()).to_json() == t.to_json());
    CHECK_THROWS_AS(FilterThresholds::from_json({{"min_p", 20}, {"max_p", 10}}), std::invalid_argument);
    CHECK_THROWS_AS(FilterThresholds::from_json({{"theta_o", -1}}), std::invalid_argument);
}

TEST_CASE("diagnosis validity") {
    DiagnosisRule r;
    r.invalid_codes = {"Z000"};
    CHECK(r.valid("O244"));
    CHECK(r.valid("O24"));
    CHECK_FALSE(r.valid("Z000"));
    CHECK_FALSE(r.valid("o244"));
    CHECK_FALSE(r.valid("O2"));
    CHECK_FALSE(r.valid(std::string(kMissing)));
}

TEST_CASE("event filtering keeps whitelisted diagnoses and typical codes") {
    const std::string none(kMissing);
    const EventLog log({"diagnosis", "intervention", "occupation"},
                       {ev("a", 1, {"O244", "x", "n"}, 0), ev("a", 2, {"J100", "typ", "n"}, 1),
                        ev("a", 3, {none, "typ", "n"}, 2), ev("a", 4, {none, "x", "obst"}, 3),
                        ev("a", 5, {"bad", "x", "n"}, 4), ev("b", 1, {"J100", "x", "n"}, 5)});
    const auto r = filter_events(log, {"O244"}, {"typ"}, {"obst"});
    CHECK(r.kept_by_diagnosis == 1);
    CHECK(r.kept_by_codes == 2);
    CHECK(r.log.events().size() == 3);
    CHECK(r.emptied == std::vector<std::string>{"b"});
    // J100 is a valid diagnosis outside the whitelist: dropped despite its typical procedure
    for (const auto& e : r.log.events()) CHECK(e.perspectives[0] != "J100");

    const auto p = preview_filter({}, build_frequency_table(log, log, "intervention"),
                                  build_frequency_table(log, log, "occupation"), log, {"O244"});
    CHECK(p.total_events == 6);
}

TEST_CASE("preview agrees with the filter") {
    PregnancyOptions o;
    o.cases = 80;
    o.with_diagnosis = true;
    const auto cohort = synthetic_pregnancy_log(o);
    PregnancyOptions po;
    po.cases = 150;
    po.seed = 99;
    po.high_risk_share = 0;
    po.with_diagnosis = true;
    auto control_log = synthetic_pregnancy_log(po);
    const auto control = matched_control_sample(cohort, control_log, 3).control;
    const auto procs = build_frequency_table(cohort, control, "intervention");
    const auto occs = build_frequency_table(cohort, control, "occupation");
    FilterThresholds t;
    t.theta_p = 2;
    t.theta_o = 2;
    t.min_p = 1;
    t.min_o = 1;
    const CodeSet whitelist{"Z348", "O800"};
    const auto report = preview_filter(t, procs, occs, cohort, whitelist, 5);
    const auto result = filter_events(cohort, whitelist, select_typical_codes(procs, 2, 1),
                                      select_typical_codes(occs, 2, 1));
    CHECK(report.passing_events == result.log.events().size());
    CHECK(report.passing_without_diagnosis == result.kept_by_codes);
    CHECK(report.passing_procedures.size() <= 5);
    // high-risk consults (O244 outside the whitelist) are dropped even though obstetrician is typical
    for (const auto& e : result.log.events()) CHECK(e.perspectives[0] != synth::kHighRisk);
}

TEST_CASE("merging diagnoses onto procedures") {
    const EventLog procs({"intervention", "occupation", "unit"},
                         {ev("a", 1, {"p1", "gp", "u"}, 0), ev("a", 1, {"p2", "gp", "u"}, 1),
                          ev("a", 2, {"p3", "gp", "u"}, 2), ev("b", 1, {"p4", "gp", "u"}, 3)});
    const EventLog diags({"diagnosis", "occupation", "unit"},
                         {ev("a", 1, {"O244", "gp", "u"}, 0), ev("a", 2, {"Z348", "gp", "u"}, 1),
                          ev("a", 2, {"Z349", "gp", "u"}, 2), ev("c", 9, {"O80", "gp", "u"}, 3)});
    const auto m = merge_procedure_diagnoses(procs, diags);
    CHECK(m.log.schema().back() == "diagnosis");
    REQUIRE(m.log.events().size() == 2);
    CHECK(m.log.events()[0].perspectives[3] == "O244");
    CHECK(m.report.merged_groups == 1);
    CHECK(m.report.merged_events == 2);
    CHECK(m.report.group_shapes.at({2, 1}) == 1);
    CHECK(m.report.group_shapes.at({1, 2}) == 1);
    CHECK(m.report.group_shapes.at({1, 0}) == 1);
    CHECK(m.report.group_shapes.at({0, 1}) == 1);

    const auto kept = merge_procedure_diagnoses(procs, diags, "unit", {}, true);
    CHECK(kept.log.events().size() == 4);
}
