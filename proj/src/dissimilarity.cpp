#include "magpath/dissimilarity.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace magpath {

using nlohmann::json;

double dist_a_io(const std::string& intervention1, const std::string& occupation1, const std::string& intervention2,
                 const std::string& occupation2) {
    const bool same_i = intervention1 == intervention2;
    const bool same_o = occupation1 == occupation2;
    if (same_i && same_o) return 0.0;
    if (same_i) return 0.3;
    if (same_o) return 0.7;
    return 1.0;
}

double dist_a_di(const std::string& diagnosis1, const std::string& intervention1, const std::string& diagnosis2,
                 const std::string& intervention2) {
    double diag = 1.0;
    if (diagnosis1.size() >= 3 && diagnosis2.size() >= 3) {
        if (diagnosis1.size() >= 4 && diagnosis2.size() >= 4 && diagnosis1.compare(0, 4, diagnosis2, 0, 4) == 0)
            diag = 0.0;
        else if (diagnosis1.compare(0, 3, diagnosis2, 0, 3) == 0)
            diag = 0.3;
    }
    const double interv = intervention1 == intervention2 ? 0.0 : 1.0;
    return 0.7 * diag + 0.3 * interv;
}

double dist_t(double t, double t_other, double epsilon) { return std::abs(t - t_other) / epsilon; }

// ---------------------------------------------------------------------------
// ActivityDistance
// ---------------------------------------------------------------------------

ActivityDistance ActivityDistance::intervention_occupation(std::size_t intervention, std::size_t occupation) {
    ActivityDistance d;
    d.kind_ = Kind::InterventionOccupation;
    d.first_ = intervention;
    d.second_ = occupation;
    return d;
}

ActivityDistance ActivityDistance::diagnosis_intervention(std::size_t diagnosis, std::size_t intervention) {
    ActivityDistance d;
    d.kind_ = Kind::DiagnosisIntervention;
    d.first_ = diagnosis;
    d.second_ = intervention;
    return d;
}

ActivityDistance ActivityDistance::table(std::size_t component, std::map<std::pair<std::string, std::string>, double> costs,
                                         double fallback) {
    ActivityDistance d;
    d.kind_ = Kind::Table;
    d.first_ = component;
    for (const auto& [k, v] : costs) {
        if (v < 0) throw std::invalid_argument("activity distances must be nonnegative");
        auto key = k.first <= k.second ? k : std::make_pair(k.second, k.first);
        auto [it, fresh] = d.table_.emplace(key, v);
        if (!fresh && it->second != v) throw std::invalid_argument("asymmetric activity distance table");
    }
    d.fallback_ = fallback;
    return d;
}

double ActivityDistance::operator()(const ActivityTuple& a, const ActivityTuple& b) const {
    switch (kind_) {
        case Kind::InterventionOccupation: return dist_a_io(a[first_], a[second_], b[first_], b[second_]);
        case Kind::DiagnosisIntervention: return dist_a_di(a[first_], a[second_], b[first_], b[second_]);
        case Kind::Table: {
            const auto& x = a[first_];
            const auto& y = b[first_];
            if (x == y) return 0.0;
            auto it = table_.find(x < y ? std::make_pair(x, y) : std::make_pair(y, x));
            return it == table_.end() ? fallback_ : it->second;
        }
    }
    return 1.0;
}

double ActivityDistance::max_value() const {
    if (kind_ != Kind::Table) return 1.0;
    double m = fallback_;
    for (const auto& [k, v] : table_) m = std::max(m, v);
    return m;
}

namespace {

std::size_t component_index(const std::vector<std::string>& aspects, const std::string& name) {
    auto it = std::find(aspects.begin(), aspects.end(), name);
    if (it == aspects.end()) throw std::invalid_argument("activity component '" + name + "' is not an aspect");
    return static_cast<std::size_t>(it - aspects.begin());
}

}  // namespace

ActivityDistance ActivityDistance::from_json(const json& j, const std::vector<std::string>& aspects) {
    const auto kind = j.value("kind", std::string("intervention-occupation"));
    // Components come either as aspect names or, in serialized form, as indices.
    auto index = [&](std::size_t slot, const char* key, const char* def) {
        if (j.contains("components")) {
            const auto k = j.at("components").at(slot).get<std::size_t>();
            if (k >= aspects.size()) throw std::invalid_argument("component index out of range");
            return k;
        }
        return component_index(aspects, j.value(key, std::string(def)));
    };
    if (kind == "intervention-occupation")
        return intervention_occupation(index(0, "intervention", "intervention"), index(1, "occupation", "occupation"));
    if (kind == "diagnosis-intervention")
        return diagnosis_intervention(index(0, "diagnosis", "diagnosis"), index(1, "intervention", "intervention"));
    if (kind == "table") {
        std::map<std::pair<std::string, std::string>, double> costs;
        for (const auto& row : j.at("costs")) costs[{row.at(0).get<std::string>(), row.at(1).get<std::string>()}] = row.at(2).get<double>();
        if (!j.contains("components") && !j.contains("component"))
            throw std::invalid_argument("a table distance needs a component");
        return table(index(0, "component", ""), std::move(costs), j.value("fallback", 1.0));
    }
    throw std::invalid_argument("unknown activity distance '" + kind + "'");
}

json ActivityDistance::to_json() const {
    switch (kind_) {
        case Kind::InterventionOccupation: return {{"kind", "intervention-occupation"}, {"components", {first_, second_}}};
        case Kind::DiagnosisIntervention: return {{"kind", "diagnosis-intervention"}, {"components", {first_, second_}}};
        case Kind::Table: {
            json rows = json::array();
            for (const auto& [k, v] : table_) rows.push_back({k.first, k.second, v});
            return {{"kind", "table"}, {"components", {first_}}, {"costs", rows}, {"fallback", fallback_}};
        }
    }
    return {};
}

// ---------------------------------------------------------------------------
// Params
// ---------------------------------------------------------------------------

void DissimParams::validate() const {
    if (!(omega_a >= 0.0 && omega_a <= 1.0)) throw std::invalid_argument("omega_a must lie in [0, 1]");
    if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
    if (!(delta >= 0.0)) throw std::invalid_argument("delta must be nonnegative");
    const double max_cost = omega_a * delta + (1.0 - omega_a) * 1.0;
    if (penalty < max_cost)
        throw std::invalid_argument("penalty " + std::to_string(penalty) + " is below the maximum alignment cost " +
                                    std::to_string(max_cost));
}

DissimParams DissimParams::from_json(const json& j, const std::vector<std::string>& aspects) {
    DissimParams p;
    if (j.contains("activity_distance")) {
        p.activity = ActivityDistance::from_json(j.at("activity_distance"), aspects);
        if (p.activity.kind() == ActivityDistance::Kind::DiagnosisIntervention) p.delta = 0.6;
    } else {
        p.activity = ActivityDistance::from_json(json::object(), aspects);
    }
    p.delta = j.value("delta", p.delta);
    p.epsilon = j.value("epsilon", p.epsilon);
    p.omega_a = j.value("omega_a", p.omega_a);
    p.penalty = j.value("penalty", p.penalty);
    p.validate();
    return p;
}

json DissimParams::to_json() const {
    return {{"delta", delta}, {"epsilon", epsilon}, {"omega_a", omega_a}, {"penalty", penalty}, {"activity_distance", activity.to_json()}};
}

// ---------------------------------------------------------------------------
// Dynamic program
// ---------------------------------------------------------------------------

namespace {

// Elapsed time from event p to event i (p < i), summed left to right exactly
// like the recursion accumulates it.
std::vector<double> elapsed_table(const std::vector<double>& intervals, std::size_t m) {
    std::vector<double> acc(m * (m + 1), 0.0);
    for (std::size_t p = 0; p < m; ++p) {
        double t = 0;
        bool first = true;
        for (std::size_t i = p + 1; i <= m && i - 1 < intervals.size(); ++i) {
            t = first ? intervals[i - 1] : t + intervals[i - 1];
            first = false;
            acc[p * (m + 1) + i] = t;
        }
    }
    return acc;
}

void check_pathway(const Pathway& p) {
    if (!p.activities.empty() && p.intervals.size() != p.activities.size() - 1)
        throw std::invalid_argument("pathway needs exactly |A| - 1 intervals");
    if (p.activities.empty() && !p.intervals.empty()) throw std::invalid_argument("empty pathway with intervals");
}

}  // namespace

double dissimilarity(const Pathway& a, const Pathway& b, const DissimParams& params) {
    params.validate();
    check_pathway(a);
    check_pathway(b);
    const std::size_t m = a.size();
    const std::size_t n = b.size();
    const double pen = params.penalty;
    if (m == 0 || n == 0) {
        double d = 0;
        for (std::size_t k = 0; k < m + n; ++k) d = pen + d;
        return d;
    }

    std::vector<double> dist(m * n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) dist[i * n + j] = params.activity(a.activities[i], b.activities[j]);
    const auto ta = elapsed_table(a.intervals, m);
    const auto tb = elapsed_table(b.intervals, n);

    // Only one side left: one penalty per remaining event.
    std::vector<double> tail(m + n + 1, 0.0);
    for (std::size_t k = 1; k <= m + n; ++k) tail[k] = pen + tail[k - 1];

    // after[p * n + q]: cost of the remaining suffixes right after aligning (p, q).
    std::vector<double> after(m * n, 0.0);
    const std::size_t w = n + 1;
    std::vector<double> f((m + 1) * w, 0.0);

    auto fill = [&](std::optional<std::pair<std::size_t, std::size_t>> anchor) {
        const std::size_t i0 = anchor ? anchor->first + 1 : 0;
        const std::size_t j0 = anchor ? anchor->second + 1 : 0;
        for (std::size_t i = m + 1; i-- > i0;) {
            for (std::size_t j = n + 1; j-- > j0;) {
                double& cell = f[i * w + j];
                if (i == m || j == n) {
                    cell = tail[(m - i) + (n - j)];
                    continue;
                }
                const double skip_a = pen + f[(i + 1) * w + j];
                const double skip_b = pen + f[i * w + j + 1];
                const double da = dist[i * n + j];
                bool alignable = da <= params.delta;
                double cost = params.omega_a * da;
                if (anchor && alignable) {
                    const double t = ta[anchor->first * (m + 1) + i];
                    const double t2 = tb[anchor->second * (n + 1) + j];
                    if (std::abs(t - t2) > params.epsilon)
                        alignable = false;
                    else
                        cost = params.omega_a * da + (1.0 - params.omega_a) * dist_t(t, t2, params.epsilon);
                }
                double best = std::numeric_limits<double>::infinity();
                if (alignable) best = cost + after[i * n + j];
                if (skip_a < best) best = skip_a;
                if (skip_b < best) best = skip_b;
                cell = best;
            }
        }
    };

    for (std::size_t p = m; p-- > 0;) {
        for (std::size_t q = n; q-- > 0;) {
            fill(std::make_pair(p, q));
            after[p * n + q] = f[(p + 1) * w + (q + 1)];
        }
    }
    fill(std::nullopt);
    return f[0];
}

// ---------------------------------------------------------------------------
// Literal recursion
// ---------------------------------------------------------------------------

namespace {

struct Recursion {
    const Pathway& a;
    const Pathway& b;
    const DissimParams& params;

    // Suffix starts i, j stand in for A, A', T, T'.
    double operator()(std::size_t i, std::size_t j, std::optional<double> t_ac, std::optional<double> t2_ac) const {
        const bool a_empty = i >= a.size();
        const bool b_empty = j >= b.size();
        const double pen = params.penalty;
        if (a_empty && b_empty) return 0.0;
        if (a_empty || b_empty) return pen + (*this)(i + 1, j + 1, std::nullopt, std::nullopt);

        auto head_t = [](const std::vector<double>& t, std::size_t k) -> std::optional<double> {
            if (k < t.size()) return t[k];
            return std::nullopt;
        };
        auto add = [](std::optional<double> acc, std::optional<double> h) -> std::optional<double> {
            if (!h) return acc;
            return *acc + *h;
        };
        const double da = params.activity(a.activities[i], b.activities[j]);

        if (!t_ac && !t2_ac) {
            const double skip_a = pen + (*this)(i + 1, j, std::nullopt, std::nullopt);
            const double skip_b = pen + (*this)(i, j + 1, std::nullopt, std::nullopt);
            if (da > params.delta) return std::min(skip_a, skip_b);
            const double align =
                params.omega_a * da + (*this)(i + 1, j + 1, head_t(a.intervals, i), head_t(b.intervals, j));
            return std::min({align, skip_a, skip_b});
        }
        const double skip_a = pen + (*this)(i + 1, j, add(t_ac, head_t(a.intervals, i)), t2_ac);
        const double skip_b = pen + (*this)(i, j + 1, t_ac, add(t2_ac, head_t(b.intervals, j)));
        if (da > params.delta || std::abs(*t_ac - *t2_ac) > params.epsilon) return std::min(skip_a, skip_b);
        const double align = params.omega_a * da + (1.0 - params.omega_a) * dist_t(*t_ac, *t2_ac, params.epsilon) +
                             (*this)(i + 1, j + 1, head_t(a.intervals, i), head_t(b.intervals, j));
        return std::min({align, skip_a, skip_b});
    }
};

}  // namespace

double dissimilarity_bruteforce(const Pathway& a, const Pathway& b, const DissimParams& params, std::size_t max_cells) {
    params.validate();
    check_pathway(a);
    check_pathway(b);
    if (a.size() * b.size() > max_cells)
        throw std::length_error("pathways too long for the brute-force recursion (" + std::to_string(a.size()) + " x " +
                                std::to_string(b.size()) + ")");
    return Recursion{a, b, params}(0, 0, std::nullopt, std::nullopt);
}

double normalized_dissimilarity(const Pathway& a, const Pathway& b, const DissimParams& params) {
    const auto total = a.size() + b.size();
    if (total == 0) return 0.0;
    return dissimilarity(a, b, params) / static_cast<double>(total);
}

// ---------------------------------------------------------------------------
// Matrix
// ---------------------------------------------------------------------------

DissimilarityMatrix DissimilarityMatrix::submatrix(const std::vector<std::size_t>& rows) const {
    DissimilarityMatrix out;
    for (auto r : rows) out.ids.push_back(ids.at(r));
    out.values.resize(rows.size() * rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows.size(); ++j) out.values[i * rows.size() + j] = (*this)(rows[i], rows[j]);
    return out;
}

DissimilarityMatrix pairwise_matrix(const std::vector<std::pair<std::string, Pathway>>& pathways,
                                    const DissimParams& params, unsigned workers, const ProgressFn& progress) {
    params.validate();
    const std::size_t n = pathways.size();
    if (n == 0) throw std::invalid_argument("no pathways to compare");
    DissimilarityMatrix m;
    for (const auto& [id, p] : pathways) m.ids.push_back(id);
    m.values.assign(n * n, 0.0);

    std::atomic<std::size_t> next_row{0};
    std::size_t done = 0;
    std::mutex progress_mutex;
    const std::size_t total_pairs = n * (n - 1) / 2;
    std::exception_ptr failure;

    auto work = [&] {
        try {
            for (std::size_t i = next_row++; i < n; i = next_row++) {
                for (std::size_t j = i + 1; j < n; ++j) {
                    const double d = normalized_dissimilarity(pathways[i].second, pathways[j].second, params);
                    m.values[i * n + j] = d;
                    m.values[j * n + i] = d;
                }
                std::lock_guard lock(progress_mutex);
                done += n - 1 - i;
                if (progress) progress(done, total_pairs);
            }
        } catch (...) {
            std::lock_guard lock(progress_mutex);
            if (!failure) failure = std::current_exception();
            next_row = n;
        }
    };
    workers = std::max(1u, workers);
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < workers; ++t) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);
    return m;
}

std::uint64_t matrix_checksum(const DissimilarityMatrix& m) {
    std::uint64_t h = 14695981039346656037ULL;
    const auto* bytes = reinterpret_cast<const unsigned char*>(m.values.data());
    for (std::size_t k = 0; k < m.values.size() * sizeof(double); ++k) {
        h ^= bytes[k];
        h *= 1099511628211ULL;
    }
    return h;
}

namespace {

std::string hex64(std::uint64_t v) {
    std::ostringstream s;
    s << std::hex << std::setw(16) << std::setfill('0') << v;
    return s.str();
}

}  // namespace

void save_matrix(const DissimilarityMatrix& m, const std::string& path, const json& params) {
    static_assert(std::endian::native == std::endian::little, "matrix files are little-endian");
    {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write '" + path + "'");
        out.write(reinterpret_cast<const char*>(m.values.data()),
                  static_cast<std::streamsize>(m.values.size() * sizeof(double)));
        if (!out) throw std::runtime_error("write failed for '" + path + "'");
    }
    json side = {{"n", m.size()},
                 {"dtype", "float64"},
                 {"order", "row-major"},
                 {"ids", m.ids},
                 {"params", params},
                 {"checksum", hex64(matrix_checksum(m))}};
    std::ofstream meta(path + ".json");
    if (!meta) throw std::runtime_error("cannot write '" + path + ".json'");
    meta << side.dump(2) << '\n';
}

DissimilarityMatrix load_matrix(const std::string& path, json* params) {
    std::ifstream meta(path + ".json");
    if (!meta) throw std::runtime_error("missing matrix sidecar '" + path + ".json'");
    json side = json::parse(meta);
    DissimilarityMatrix m;
    m.ids = side.at("ids").get<std::vector<std::string>>();
    const std::size_t n = side.at("n").get<std::size_t>();
    if (n != m.ids.size()) throw std::runtime_error("sidecar size does not match its id list");
    m.values.resize(n * n);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read '" + path + "'");
    in.read(reinterpret_cast<char*>(m.values.data()), static_cast<std::streamsize>(m.values.size() * sizeof(double)));
    if (in.gcount() != static_cast<std::streamsize>(m.values.size() * sizeof(double)))
        throw std::runtime_error("truncated matrix file '" + path + "'");
    if (side.at("checksum").get<std::string>() != hex64(matrix_checksum(m)))
        throw std::runtime_error("checksum mismatch for '" + path + "'");
    if (params) *params = side.value("params", json::object());
    return m;
}

void write_matrix_csv(const DissimilarityMatrix& m, std::ostream& out) {
    char buf[32];
    out << "id";
    for (const auto& id : m.ids) out << ',' << id;
    out << '\n';
    for (std::size_t i = 0; i < m.size(); ++i) {
        out << m.ids[i];
        for (std::size_t j = 0; j < m.size(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
            out << ',' << buf;
        }
        out << '\n';
    }
}

}  // namespace magpath
