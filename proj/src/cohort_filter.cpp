#include "magpath/cohort_filter.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <tuple>

namespace magpath {

using nlohmann::json;

CodeSet parse_code_list(std::istream& in) {
    CodeSet codes;
    std::string line;
    while (std::getline(in, line)) {
        auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos || line[b] == '#') continue;
        auto e = line.find_last_not_of(" \t\r");
        codes.insert(line.substr(b, e - b + 1));
    }
    return codes;
}

CodeSet load_code_list(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open code list '" + path + "'");
    return parse_code_list(in);
}

std::set<std::string> select_cohort(const EventLog& log, const std::map<std::string, CodeSet>& code_lists,
                                    const DateWindow& window) {
    if (window.from > window.to) throw std::invalid_argument("empty date window");
    if (code_lists.empty()) throw std::invalid_argument("no code lists given");
    std::vector<std::pair<std::size_t, const CodeSet*>> lists;
    for (const auto& [name, codes] : code_lists) {
        if (codes.empty()) throw std::invalid_argument("code list for '" + name + "' is empty");
        lists.emplace_back(log.perspective_index(name), &codes);
    }
    std::set<std::string> selected;
    for (const auto& e : log.events()) {
        if (e.timestamp < window.from || e.timestamp > window.to) continue;
        for (const auto& [idx, codes] : lists) {
            if (codes->count(e.perspectives[idx])) {
                selected.insert(e.case_id);
                break;
            }
        }
    }
    return selected;
}

ExclusionRules ExclusionRules::from_json(const json& j) {
    ExclusionRules r;
    if (j.contains("extras"))
        for (const auto& [k, v] : j.at("extras").items()) r.extra_values[k] = v.get<CodeSet>();
    if (j.contains("codes"))
        for (const auto& [k, v] : j.at("codes").items()) r.perspective_codes[k] = v.get<CodeSet>();
    return r;
}

ExclusionResult exclude_cases(const EventLog& log, const ExclusionRules& rules) {
    std::vector<std::pair<std::size_t, const CodeSet*>> codes;
    for (const auto& [name, set] : rules.perspective_codes) codes.emplace_back(log.perspective_index(name), &set);
    std::set<std::string> dropped;
    for (const auto& e : log.events()) {
        bool hit = false;
        for (const auto& [key, values] : rules.extra_values) {
            auto it = e.extras.find(key);
            if (it != e.extras.end() && values.count(it->second)) hit = true;
        }
        for (const auto& [idx, set] : codes)
            if (set->count(e.perspectives[idx])) hit = true;
        if (hit) dropped.insert(e.case_id);
    }
    std::vector<std::string> kept;
    for (const auto& id : log.case_ids())
        if (!dropped.count(id)) kept.push_back(id);
    return {log.subset(kept), {dropped.begin(), dropped.end()}};
}

ControlSample matched_control_sample(const EventLog& cohort, const EventLog& pool, std::uint64_t seed) {
    std::map<std::size_t, std::vector<std::string>> cohort_by_length;
    for (const auto& id : cohort.case_ids()) cohort_by_length[cohort.case_length(id)].push_back(id);
    std::map<std::size_t, std::vector<std::string>> pool_by_length;
    for (const auto& id : pool.case_ids())
        if (!cohort.has_case(id)) pool_by_length[pool.case_length(id)].push_back(id);

    std::mt19937_64 rng(seed);
    ControlSample out;
    std::vector<std::string> chosen;
    for (const auto& [length, cases] : cohort_by_length) {
        auto& candidates = pool_by_length[length];
        const std::size_t take = std::min(cases.size(), candidates.size());
        for (std::size_t i = 0; i < take; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, candidates.size() - 1);
            std::swap(candidates[i], candidates[pick(rng)]);
            chosen.push_back(candidates[i]);
        }
        for (std::size_t i = take; i < cases.size(); ++i) out.skipped.push_back(cases[i]);
    }
    std::sort(chosen.begin(), chosen.end());
    out.control = pool.subset(chosen);
    return out;
}

double FrequencyEntry::ratio() const {
    if (control == 0) return cohort > 0 ? kUnbounded : 0.0;
    return static_cast<double>(cohort) / static_cast<double>(control);
}

json FrequencyTable::to_json() const {
    json rows = json::array();
    for (const auto& [code, e] : entries) {
        const double r = e.ratio();
        rows.push_back({{"code", code},
                        {"cohort", e.cohort},
                        {"control", e.control},
                        {"ratio", std::isinf(r) ? json("inf") : json(r)}});
    }
    return {{"perspective", perspective}, {"codes", rows}};
}

FrequencyTable build_frequency_table(const EventLog& cohort, const EventLog& control, const std::string& perspective) {
    FrequencyTable t;
    t.perspective = perspective;
    const auto ci = cohort.perspective_index(perspective);
    const auto pi = control.perspective_index(perspective);
    for (const auto& e : cohort.events()) ++t.entries[e.perspectives[ci]].cohort;
    for (const auto& e : control.events()) ++t.entries[e.perspectives[pi]].control;
    return t;
}

CodeSet select_typical_codes(const FrequencyTable& table, double theta, double min_f, double max_f) {
    CodeSet out;
    for (const auto& [code, e] : table.entries) {
        const auto f = static_cast<double>(e.cohort);
        if (e.cohort > 0 && e.ratio() >= theta && f >= min_f && f <= max_f) out.insert(code);
    }
    return out;
}

void FilterThresholds::validate() const {
    auto ratio_ok = [](double r) { return std::isfinite(r) && r >= 0; };
    if (!ratio_ok(theta_p) || !ratio_ok(theta_o)) throw std::invalid_argument("ratio thresholds must be finite and >= 0");
    if (min_p > max_p) throw std::invalid_argument("min_p exceeds max_p");
    if (min_o > max_o) throw std::invalid_argument("min_o exceeds max_o");
}

FilterThresholds FilterThresholds::from_json(const json& j) {
    auto bound = [&](const char* key, double def) {
        if (!j.contains(key) || j.at(key).is_null()) return def;
        if (j.at(key).is_string() && j.at(key).get<std::string>() == "inf") return kUnbounded;
        return j.at(key).get<double>();
    };
    FilterThresholds t;
    t.theta_p = bound("theta_p", t.theta_p);
    t.theta_o = bound("theta_o", t.theta_o);
    t.min_p = bound("min_p", t.min_p);
    t.max_p = bound("max_p", t.max_p);
    t.min_o = bound("min_o", t.min_o);
    t.max_o = bound("max_o", t.max_o);
    t.validate();
    return t;
}

json FilterThresholds::to_json() const {
    auto bound = [](double v) { return std::isinf(v) ? json(nullptr) : json(v); };
    return {{"theta_p", theta_p}, {"theta_o", theta_o}, {"min_p", min_p},
            {"max_p", bound(max_p)}, {"min_o", min_o},  {"max_o", bound(max_o)}};
}

bool DiagnosisRule::valid(const std::string& code) const {
    if (code == kMissing || invalid_codes.count(code)) return false;
    return std::regex_match(code, pattern);
}

namespace {

enum class Verdict { DiagnosisKept, CodeKept, Dropped };

struct Classifier {
    const CodeSet& whitelist;
    const CodeSet& procedures;
    const CodeSet& occupations;
    const DiagnosisRule& rule;
    std::optional<std::size_t> diag;
    std::size_t proc;
    std::size_t occ;

    Verdict operator()(const Event& e) const {
        if (diag && rule.valid(e.perspectives[*diag]))
            return whitelist.count(e.perspectives[*diag]) ? Verdict::DiagnosisKept : Verdict::Dropped;
        if (procedures.count(e.perspectives[proc]) || occupations.count(e.perspectives[occ])) return Verdict::CodeKept;
        return Verdict::Dropped;
    }
};

Classifier make_classifier(const EventLog& log, const CodeSet& whitelist, const CodeSet& procs, const CodeSet& occs,
                           const FilterPerspectives& names, const DiagnosisRule& rule) {
    return Classifier{whitelist,
                      procs,
                      occs,
                      rule,
                      log.find_perspective(names.diagnosis),
                      log.perspective_index(names.procedure),
                      log.perspective_index(names.occupation)};
}

}  // namespace

FilterResult filter_events(const EventLog& log, const CodeSet& diagnosis_whitelist, const CodeSet& typical_procedures,
                           const CodeSet& typical_occupations, const FilterPerspectives& names,
                           const DiagnosisRule& rule) {
    const auto classify = make_classifier(log, diagnosis_whitelist, typical_procedures, typical_occupations, names, rule);
    FilterResult out;
    std::vector<Event> kept;
    for (const auto& id : log.case_ids()) {
        auto [b, e] = log.case_range(id);
        std::size_t before = kept.size();
        for (std::size_t i = b; i < e; ++i) {
            switch (classify(log.events()[i])) {
                case Verdict::DiagnosisKept:
                    ++out.kept_by_diagnosis;
                    kept.push_back(log.events()[i]);
                    break;
                case Verdict::CodeKept:
                    ++out.kept_by_codes;
                    kept.push_back(log.events()[i]);
                    break;
                case Verdict::Dropped: break;
            }
        }
        if (kept.size() == before) out.emptied.push_back(id);
    }
    out.log = EventLog(log.schema(), std::move(kept), log.time_unit());
    return out;
}

json PreviewReport::to_json() const {
    auto rows = [](const std::vector<CodeRow>& v) {
        json a = json::array();
        for (const auto& r : v)
            a.push_back({{"code", r.code},
                         {"cohort", r.cohort},
                         {"control", r.control},
                         {"ratio", std::isinf(r.ratio) ? json("inf") : json(r.ratio)}});
        return a;
    };
    json sample = json::array();
    for (const auto& [code, n] : passing_procedures) sample.push_back({{"code", code}, {"count", n}});
    return {{"procedures", rows(procedures)},
            {"occupations", rows(occupations)},
            {"passing_events", passing_events},
            {"passing_without_diagnosis", passing_without_diagnosis},
            {"total_events", total_events},
            {"passing_procedures", sample}};
}

PreviewReport preview_filter(const FilterThresholds& thresholds, const FrequencyTable& procedures,
                             const FrequencyTable& occupations, const EventLog& log, const CodeSet& diagnosis_whitelist,
                             std::size_t sample_size, const FilterPerspectives& names, const DiagnosisRule& rule) {
    thresholds.validate();
    const auto procs = select_typical_codes(procedures, thresholds.theta_p, thresholds.min_p, thresholds.max_p);
    const auto occs = select_typical_codes(occupations, thresholds.theta_o, thresholds.min_o, thresholds.max_o);
    PreviewReport r;
    auto rows = [](const FrequencyTable& t, const CodeSet& codes) {
        std::vector<PreviewReport::CodeRow> v;
        for (const auto& c : codes) {
            const auto& e = t.entries.at(c);
            v.push_back({c, e.cohort, e.control, e.ratio()});
        }
        std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.cohort > b.cohort; });
        return v;
    };
    r.procedures = rows(procedures, procs);
    r.occupations = rows(occupations, occs);

    const auto classify = make_classifier(log, diagnosis_whitelist, procs, occs, names, rule);
    std::map<std::string, std::size_t> counts;
    for (const auto& e : log.events()) {
        ++r.total_events;
        auto v = classify(e);
        if (v == Verdict::Dropped) continue;
        ++r.passing_events;
        if (v == Verdict::CodeKept) ++r.passing_without_diagnosis;
        ++counts[e.perspectives[classify.proc]];
    }
    r.passing_procedures.assign(counts.begin(), counts.end());
    std::stable_sort(r.passing_procedures.begin(), r.passing_procedures.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    if (r.passing_procedures.size() > sample_size) r.passing_procedures.resize(sample_size);
    return r;
}

MergeResult merge_procedure_diagnoses(const EventLog& procedures, const EventLog& diagnoses,
                                      const std::string& unit_perspective, const FilterPerspectives& names,
                                      bool keep_unmatched) {
    using Key = std::tuple<std::string, Timestamp, std::string, std::string>;
    const auto pu = procedures.perspective_index(unit_perspective);
    const auto po = procedures.perspective_index(names.occupation);
    const auto du = diagnoses.perspective_index(unit_perspective);
    const auto dox = diagnoses.perspective_index(names.occupation);
    const auto dd = diagnoses.perspective_index(names.diagnosis);
    auto day = [](Timestamp t) { return t - ((t % 86400) + 86400) % 86400; };

    std::map<Key, std::vector<std::string>> diag_groups;
    for (const auto& e : diagnoses.events())
        diag_groups[{e.case_id, day(e.timestamp), e.perspectives[du], e.perspectives[dox]}].push_back(
            e.perspectives[dd]);
    std::map<Key, std::vector<std::size_t>> proc_groups;
    for (std::size_t i = 0; i < procedures.events().size(); ++i) {
        const auto& e = procedures.events()[i];
        proc_groups[{e.case_id, day(e.timestamp), e.perspectives[pu], e.perspectives[po]}].push_back(i);
    }

    auto schema = procedures.schema();
    auto existing = procedures.find_perspective(names.diagnosis);
    std::size_t slot = existing ? *existing : schema.size();
    if (!existing) schema.push_back(names.diagnosis);

    MergeResult out;
    std::vector<Event> events;
    for (const auto& [key, idxs] : proc_groups) {
        auto it = diag_groups.find(key);
        const std::size_t nd = it == diag_groups.end() ? 0 : it->second.size();
        ++out.report.group_shapes[{idxs.size(), nd}];
        const bool matched = nd == 1;
        if (!matched && !keep_unmatched) continue;
        if (matched) {
            ++out.report.merged_groups;
            out.report.merged_events += idxs.size();
        }
        for (auto i : idxs) {
            Event e = procedures.events()[i];
            if (!existing) e.perspectives.emplace_back();
            e.perspectives[slot] = matched ? it->second.front() : std::string(kMissing);
            events.push_back(std::move(e));
        }
    }
    for (const auto& [key, diags] : diag_groups)
        if (!proc_groups.count(key)) ++out.report.group_shapes[{0, diags.size()}];
    out.log = EventLog(std::move(schema), std::move(events), procedures.time_unit());
    return out;
}

}  // namespace magpath
