#include "magpath/synthetic.hpp"

#include <algorithm>
#include <cstdio>
#include <random>
#include <stdexcept>

namespace magpath {

namespace {

constexpr Timestamp kDay = 86400;

std::string case_name(const char* prefix, std::size_t k, int width = 4) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, k);
    return buf;
}

std::size_t uniform(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

bool chance(std::mt19937_64& rng, double p) { return std::uniform_real_distribution<double>(0, 1)(rng) < p; }

}  // namespace

EventLog synthetic_pregnancy_log(const PregnancyOptions& o) {
    if (o.min_visits < 1 || o.min_visits > o.max_visits) throw std::invalid_argument("bad visit range");
    std::mt19937_64 rng(o.seed);
    const Timestamp base = parse_timestamp("2019-01-01", "%Y-%m-%d");
    std::vector<std::string> schema{"intervention", "occupation", "unit"};
    if (o.with_diagnosis) schema.push_back("diagnosis");
    std::vector<Event> events;
    std::size_t row = 0;

    for (std::size_t c = 0; c < o.cases; ++c) {
        const auto id = case_name("P", c + 1);
        Timestamp t = base + static_cast<Timestamp>(uniform(rng, 0, 364)) * kDay;
        const std::string unit = "ubs_" + std::to_string(uniform(rng, 1, 3));
        const bool high = chance(rng, o.high_risk_share);
        const std::size_t visits = uniform(rng, o.min_visits, o.max_visits);

        auto emit = [&](const std::string& i, const std::string& occ, const std::string& u, const std::string& dx) {
            Event e;
            e.case_id = id;
            e.timestamp = t;
            e.perspectives = {i, occ, u};
            if (o.with_diagnosis) e.perspectives.push_back(dx);
            e.row = row++;
            events.push_back(std::move(e));
        };
        auto wait = [&](std::size_t lo, std::size_t hi) { t += static_cast<Timestamp>(uniform(rng, lo, hi)) * kDay; };

        for (std::size_t v = 0; v < visits; ++v) {
            emit(synth::kAntenatal, v % 2 ? "nurse" : "gp", unit, "Z348");
            if (v == 1) {
                wait(1, 5);
                emit(synth::kBloodTest, "lab_technician", "lab", "Z348");
            }
            if (v == 2) {
                wait(1, 7);
                emit(synth::kUltrasound, "sonographer", "imaging_center", "Z348");
            }
            if (high && v >= 2 && v % 2 == 0) {
                wait(2, 10);
                emit(synth::kHighRisk, "obstetrician", synth::kMaternity, "O244");
            }
            if (chance(rng, o.noise_rate)) {
                wait(1, 10);
                if (chance(rng, 0.5))
                    emit(synth::kDental, "dentist", "dental_clinic", std::string(kMissing));
                else
                    emit(synth::kFlu, "nurse", "vaccination_room", std::string(kMissing));
            }
            wait(25, 35);
        }
        emit(synth::kDelivery, "obstetrician", synth::kMaternity, "O800");
    }
    return EventLog(schema, std::move(events));
}

namespace {

// Token list with exact counts: listed codes first, filler codes share the rest.
std::vector<std::string> tokens(const std::vector<std::pair<std::string, std::size_t>>& fixed,
                                const std::vector<std::string>& fillers, std::size_t total) {
    std::vector<std::string> out;
    for (const auto& [code, n] : fixed) out.insert(out.end(), n, code);
    if (out.size() > total) throw std::logic_error("fixture counts exceed the event total");
    const std::size_t rest = total - out.size();
    for (std::size_t k = 0; k < fillers.size(); ++k) {
        const std::size_t n = rest / fillers.size() + (k < rest % fillers.size() ? 1 : 0);
        out.insert(out.end(), n, fillers[k]);
    }
    return out;
}

EventLog assemble(const char* prefix, const std::vector<std::size_t>& lengths, std::vector<std::string> procs,
                  std::vector<std::string> occs, std::mt19937_64& rng) {
    std::shuffle(procs.begin(), procs.end(), rng);
    std::shuffle(occs.begin(), occs.end(), rng);
    const Timestamp base = parse_timestamp("2020-01-01", "%Y-%m-%d");
    std::vector<Event> events;
    std::size_t k = 0;
    for (std::size_t c = 0; c < lengths.size(); ++c) {
        Timestamp t = base + static_cast<Timestamp>(uniform(rng, 0, 200)) * kDay;
        for (std::size_t e = 0; e < lengths[c]; ++e, ++k) {
            Event ev;
            ev.case_id = case_name(prefix, c + 1);
            ev.timestamp = t;
            ev.perspectives = {procs[k], occs[k], "unit_" + std::to_string(uniform(rng, 1, 4))};
            ev.row = k;
            events.push_back(std::move(ev));
            t += static_cast<Timestamp>(uniform(rng, 1, 20)) * kDay;
        }
    }
    return EventLog({"intervention", "occupation", "unit"}, std::move(events));
}

}  // namespace

CohortFixture synthetic_cohort_fixture(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    constexpr std::size_t total = 1500;
    std::vector<std::size_t> lengths;
    std::size_t sum = 0;
    while (sum < total) {
        std::size_t l = std::min(uniform(rng, 3, 12), total - sum);
        lengths.push_back(l);
        sum += l;
    }
    std::vector<std::string> proc_fill, occ_fill;
    for (int k = 0; k < 10; ++k) proc_fill.push_back("proc_common_" + std::to_string(k));
    for (int k = 0; k < 6; ++k) occ_fill.push_back("occ_common_" + std::to_string(k));

    // ratio 6 exactly, ratio 10, absent from control, ratio 5.9, too rare
    const auto cohort_procs = tokens(
        {{"proc_r6", 60}, {"proc_r10", 100}, {"proc_new", 12}, {"proc_r5_9", 59}, {"proc_rare", 9}}, proc_fill, total);
    const auto control_procs =
        tokens({{"proc_r6", 10}, {"proc_r10", 10}, {"proc_r5_9", 10}, {"proc_rare", 1}}, proc_fill, total);
    // ratio 10 exactly, ratio 12, ratio 9.9, too rare
    const auto cohort_occs =
        tokens({{"occ_r10", 500}, {"occ_r12", 120}, {"occ_r9_9", 99}, {"occ_rare", 49}}, occ_fill, total);
    const auto control_occs =
        tokens({{"occ_r10", 50}, {"occ_r12", 10}, {"occ_r9_9", 10}, {"occ_rare", 1}}, occ_fill, total);

    CohortFixture f;
    f.cohort = assemble("C", lengths, cohort_procs, cohort_occs, rng);
    f.control = assemble("K", lengths, control_procs, control_occs, rng);
    f.planted_procedures = {"proc_r6", "proc_r10", "proc_new"};
    f.planted_occupations = {"occ_r10", "occ_r12"};
    f.decoy_procedures = {"proc_r5_9", "proc_rare"};
    f.decoy_occupations = {"occ_r9_9", "occ_rare"};
    return f;
}

TwoGroupFixture synthetic_two_group_log(std::size_t per_group, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const Timestamp base = parse_timestamp("2021-03-01", "%Y-%m-%d");
    TwoGroupFixture f;
    f.dominant_a = {"injection", "nurse"};
    f.dominant_b = {"surgery", "surgeon"};
    const std::vector<std::pair<std::string, std::string>> others{
        {"consult", "gp"}, {"xray", "radiologist"}, {"blood_test", "lab_technician"}};
    std::vector<Event> events;
    std::size_t row = 0;
    for (int g = 0; g < 2; ++g) {
        for (std::size_t c = 0; c < per_group; ++c) {
            const auto id = case_name(g == 0 ? "A" : "B", c + 1, 2);
            (g == 0 ? f.group_a : f.group_b).push_back(id);
            const auto& dom = g == 0 ? f.dominant_a : f.dominant_b;
            Timestamp t = base;
            const std::size_t len = uniform(rng, 4, 8);
            for (std::size_t e = 0; e < len; ++e) {
                const auto& pair = chance(rng, 0.7) ? dom : others[uniform(rng, 0, others.size() - 1)];
                Event ev;
                ev.case_id = id;
                ev.timestamp = t;
                ev.perspectives = {pair.first, pair.second, "unit_1"};
                ev.row = row++;
                events.push_back(std::move(ev));
                t += static_cast<Timestamp>(uniform(rng, 1, 6)) * kDay;
            }
        }
    }
    f.log = EventLog({"intervention", "occupation", "unit"}, std::move(events));
    return f;
}

EventLog random_log(std::uint64_t seed, std::size_t cases, std::size_t max_length, std::size_t alphabet,
                    std::size_t max_gap_days) {
    if (max_length == 0 || alphabet == 0) throw std::invalid_argument("random_log needs positive sizes");
    std::mt19937_64 rng(seed);
    const Timestamp base = parse_timestamp("2022-01-01", "%Y-%m-%d");
    std::vector<Event> events;
    std::size_t row = 0;
    for (std::size_t c = 0; c < cases; ++c) {
        Timestamp t = base;
        const std::size_t len = uniform(rng, 1, max_length);
        for (std::size_t e = 0; e < len; ++e) {
            Event ev;
            ev.case_id = case_name("c", c, 3);
            ev.timestamp = t;
            ev.perspectives = {"i" + std::to_string(uniform(rng, 0, alphabet - 1)),
                               "o" + std::to_string(uniform(rng, 0, alphabet - 1)),
                               "u" + std::to_string(uniform(rng, 0, alphabet - 1))};
            ev.row = row++;
            events.push_back(std::move(ev));
            t += static_cast<Timestamp>(uniform(rng, 0, max_gap_days)) * kDay;
        }
    }
    return EventLog({"intervention", "occupation", "unit"}, std::move(events));
}

void write_csv(const EventLog& log, std::ostream& out) {
    auto field = [](const std::string& s) {
        if (s.find_first_of(",\"\n") == std::string::npos) return s;
        std::string q = "\"";
        for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
        return q + "\"";
    };
    out << "case_id,date";
    for (const auto& p : log.schema()) out << ',' << field(p);
    out << '\n';
    for (const auto& e : log.events()) {
        out << field(e.case_id) << ',' << format_timestamp(e.timestamp);
        for (const auto& v : e.perspectives) out << ',' << (v == kMissing ? std::string() : field(v));
        out << '\n';
    }
}

}  // namespace magpath
