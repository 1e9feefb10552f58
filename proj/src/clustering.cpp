#include "magpath/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <future>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

namespace magpath {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Average linkage
// ---------------------------------------------------------------------------

Dendrogram average_linkage_dendrogram(const DissimilarityMatrix& m) {
    const std::size_t n = m.size();
    Dendrogram out;
    out.leaves = n;
    if (n < 2) return out;

    std::vector<double> d(m.values);
    std::vector<std::size_t> size(n, 1), label(n);
    std::iota(label.begin(), label.end(), 0);
    std::vector<char> active(n, 1);
    // nearest active partner j > i
    std::vector<std::size_t> nn(n, n);
    std::vector<double> nd(n, std::numeric_limits<double>::infinity());
    const auto inf = std::numeric_limits<double>::infinity();

    auto rescan = [&](std::size_t i) {
        nn[i] = n;
        nd[i] = inf;
        for (std::size_t j = i + 1; j < n; ++j) {
            if (!active[j]) continue;
            if (d[i * n + j] < nd[i]) {
                nd[i] = d[i * n + j];
                nn[i] = j;
            }
        }
    };
    for (std::size_t i = 0; i < n; ++i) rescan(i);

    for (std::size_t step = 0; step + 1 < n; ++step) {
        std::size_t i = n;
        for (std::size_t k = 0; k < n; ++k)
            if (active[k] && nn[k] < n && (i == n || nd[k] < nd[i])) i = k;
        const std::size_t j = nn[i];
        const double h = nd[i];

        Merge mg;
        mg.a = std::min(label[i], label[j]);
        mg.b = std::max(label[i], label[j]);
        mg.height = h;
        mg.size = size[i] + size[j];
        out.merges.push_back(mg);

        const double si = static_cast<double>(size[i]);
        const double sj = static_cast<double>(size[j]);
        for (std::size_t k = 0; k < n; ++k) {
            if (!active[k] || k == i || k == j) continue;
            const double v = (si * d[i * n + k] + sj * d[j * n + k]) / (si + sj);
            d[i * n + k] = v;
            d[k * n + i] = v;
        }
        active[j] = 0;
        size[i] += size[j];
        label[i] = n + step;

        for (std::size_t k = 0; k < n; ++k) {
            if (!active[k]) continue;
            if (k == i || nn[k] == i || nn[k] == j) {
                rescan(k);
            } else if (k < i) {
                const double v = d[k * n + i];
                if (v < nd[k] || (v == nd[k] && i < nn[k])) {
                    nd[k] = v;
                    nn[k] = i;
                }
            }
        }
    }
    return out;
}

namespace {

std::size_t condensed_index(std::size_t n, std::size_t i, std::size_t j) {
    return i * n - i * (i + 1) / 2 + (j - i - 1);
}

}  // namespace

std::vector<double> cophenetic_distances(const Dendrogram& dg) {
    const std::size_t n = dg.leaves;
    std::vector<double> out(n < 2 ? 0 : n * (n - 1) / 2, 0.0);
    std::vector<std::vector<std::size_t>> members(n + dg.merges.size());
    for (std::size_t i = 0; i < n; ++i) members[i] = {i};
    for (std::size_t k = 0; k < dg.merges.size(); ++k) {
        const auto& mg = dg.merges[k];
        auto& a = members.at(mg.a);
        auto& b = members.at(mg.b);
        for (auto x : a)
            for (auto y : b) out[condensed_index(n, std::min(x, y), std::max(x, y))] = mg.height;
        auto& c = members[n + k];
        c.reserve(a.size() + b.size());
        c.insert(c.end(), a.begin(), a.end());
        c.insert(c.end(), b.begin(), b.end());
        a.clear();
        a.shrink_to_fit();
        b.clear();
        b.shrink_to_fit();
    }
    return out;
}

std::vector<double> condensed(const DissimilarityMatrix& m) {
    std::vector<double> out;
    const std::size_t n = m.size();
    out.reserve(n < 2 ? 0 : n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) out.push_back(m(i, j));
    return out;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw std::invalid_argument("pearson: size mismatch");
    if (x.size() < 2) throw std::domain_error("pearson: need at least two values");
    const double nx = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / nx;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / nx;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        sxy += (x[k] - mx) * (y[k] - my);
        sxx += (x[k] - mx) * (x[k] - mx);
        syy += (y[k] - my) * (y[k] - my);
    }
    if (sxx == 0 || syy == 0) throw std::domain_error("pearson: degenerate input with zero variance");
    return sxy / std::sqrt(sxx * syy);
}

double cophenetic_correlation(const DissimilarityMatrix& m, const Dendrogram& d) {
    if (d.leaves != m.size()) throw std::invalid_argument("dendrogram does not match the matrix");
    try {
        return pearson(condensed(m), cophenetic_distances(d));
    } catch (const std::domain_error&) {
        throw std::domain_error("cophenetic correlation undefined: distances or merge heights are constant");
    }
}

CccSample sampled_ccc(const DissimilarityMatrix& m, std::size_t sample_size, std::size_t repetitions,
                      std::uint64_t seed) {
    if (sample_size > m.size())
        throw std::invalid_argument("sample of " + std::to_string(sample_size) + " from a matrix of " +
                                    std::to_string(m.size()));
    if (repetitions == 0) throw std::invalid_argument("at least one repetition is needed");
    std::mt19937_64 rng(seed);
    CccSample out;
    std::vector<std::size_t> idx(m.size());
    for (std::size_t r = 0; r < repetitions; ++r) {
        std::iota(idx.begin(), idx.end(), 0);
        for (std::size_t k = 0; k < sample_size; ++k) {
            std::uniform_int_distribution<std::size_t> pick(k, idx.size() - 1);
            std::swap(idx[k], idx[pick(rng)]);
        }
        std::vector<std::size_t> rows(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(sample_size));
        std::sort(rows.begin(), rows.end());
        const auto sub = m.submatrix(rows);
        out.values.push_back(cophenetic_correlation(sub, average_linkage_dendrogram(sub)));
    }
    const double n = static_cast<double>(out.values.size());
    out.mean = std::accumulate(out.values.begin(), out.values.end(), 0.0) / n;
    if (out.values.size() > 1) {
        double ss = 0;
        for (double v : out.values) ss += (v - out.mean) * (v - out.mean);
        out.std = std::sqrt(ss / (n - 1));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Similarity graph
// ---------------------------------------------------------------------------

WeightedGraph::WeightedGraph(std::vector<std::string> ids)
    : ids_(std::move(ids)), adj_(ids_.size()), strength_(ids_.size(), 0.0) {}

void WeightedGraph::add_edge(std::size_t u, std::size_t v, double weight) {
    if (u >= size() || v >= size()) throw std::out_of_range("edge endpoint out of range");
    if (u == v) throw std::invalid_argument("self-loops are not allowed");
    if (!(weight > 0) || !std::isfinite(weight)) throw std::invalid_argument("edge weights must be positive");
    adj_[u].push_back({v, weight});
    adj_[v].push_back({u, weight});
    strength_[u] += weight;
    strength_[v] += weight;
    total_ += 2 * weight;
    ++edges_;
}

std::vector<UndirectedEdge> WeightedGraph::edges() const {
    std::vector<UndirectedEdge> out;
    for (std::size_t u = 0; u < size(); ++u)
        for (const auto& [v, w] : adj_[u])
            if (u < v) out.push_back({u, v, w});
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return std::tie(a.u, a.v) < std::tie(b.u, b.v); });
    return out;
}

WeightedGraph similarity_graph(const DissimilarityMatrix& m) {
    WeightedGraph g(m.ids);
    const std::size_t n = m.size();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d = m(i, j);
            if (!(d >= 0.0 && d <= 1.0))
                throw std::domain_error("matrix entry (" + m.ids[i] + ", " + m.ids[j] + ") = " + std::to_string(d) +
                                        " is outside [0, 1]; the matrix is not normalized");
            if (d < 1.0) g.add_edge(i, j, 1.0 - d);
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// Detector
// ---------------------------------------------------------------------------

namespace {

// Community under construction with incrementally maintained weights.
class Community {
public:
    explicit Community(const WeightedGraph& g) : g_(g), in_(g.size(), 0), kin_(g.size(), 0.0) {}

    bool contains(std::size_t v) const { return in_[v] != 0; }
    std::size_t size() const { return members_.size(); }
    const std::vector<std::size_t>& members() const { return members_; }
    double kin(std::size_t v) const { return kin_[v]; }

    void add(std::size_t v) {
        in_[v] = 1;
        members_.push_back(v);
        stubs_ += g_.strength(v);
        internal_ += 2 * kin_[v];
        for (const auto& [u, w] : g_.neighbors(v)) kin_[u] += w;
    }

    void remove(std::size_t v) {
        in_[v] = 0;
        members_.erase(std::find(members_.begin(), members_.end(), v));
        stubs_ -= g_.strength(v);
        internal_ -= 2 * kin_[v];
        for (const auto& [u, w] : g_.neighbors(v)) kin_[u] -= w;
    }

    // z-score of v's weight towards the community without v. +inf / -inf
    // stand for certain inclusion / exclusion when the variance vanishes.
    double zscore(std::size_t v) const {
        const double kv = g_.strength(v);
        if (kv <= 0) return -std::numeric_limits<double>::infinity();
        const bool member = contains(v);
        const double kin = kin_[v];
        const double stubs = stubs_ - (member ? kv : 0.0);
        const double internal = internal_ - (member ? 2 * kin : 0.0);
        const double external = std::max(0.0, stubs - internal);
        const double avail = g_.total_strength() - internal - kv;
        double p = avail > 0 ? external / avail : 1.0;
        p = std::clamp(p, 0.0, 1.0);
        const double mean_w = kv / static_cast<double>(g_.neighbors(v).size());
        const double mu = kv * p;
        const double var = mean_w * kv * p * (1 - p);
        constexpr double eps = 1e-12;
        if (var <= 0) return kin > mu + eps ? std::numeric_limits<double>::infinity()
                                            : -std::numeric_limits<double>::infinity();
        return (kin - mu) / std::sqrt(var);
    }

    static double upper_tail(double z) {
        if (z == std::numeric_limits<double>::infinity()) return 0.0;
        if (z == -std::numeric_limits<double>::infinity()) return 1.0;
        return 0.5 * std::erfc(z / std::sqrt(2.0));
    }

    // Probability that the best of the n outside nodes looks at least this good by chance.
    double corrected(std::size_t v) const {
        const double r = upper_tail(zscore(v));
        const std::size_t outside = g_.size() - size() + (contains(v) ? 1 : 0);
        if (r >= 1) return 1.0;
        return -std::expm1(static_cast<double>(outside) * std::log1p(-r));
    }

    // Largest corrected p-value among members.
    double score() const {
        double s = 0;
        for (auto v : members_) s = std::max(s, corrected(v));
        return s;
    }

private:
    const WeightedGraph& g_;
    std::vector<char> in_;
    std::vector<double> kin_;
    std::vector<std::size_t> members_;
    double stubs_ = 0;
    double internal_ = 0;
};

struct Found {
    std::vector<std::size_t> members;  // sorted
    double score = 1;
};

std::optional<Found> expand(const WeightedGraph& g, std::size_t seed, const DetectorOptions& o) {
    Community c(g);
    c.add(seed);
    std::vector<std::size_t> order{seed};
    std::vector<char> frontier_flag(g.size(), 0);
    std::vector<std::size_t> frontier;
    auto push_neighbors = [&](std::size_t v) {
        for (const auto& [u, w] : g.neighbors(v))
            if (!c.contains(u) && !frontier_flag[u]) {
                frontier_flag[u] = 1;
                frontier.push_back(u);
            }
    };
    push_neighbors(seed);

    double best_score = std::numeric_limits<double>::infinity();
    std::size_t best_len = 0;
    while (!frontier.empty()) {
        std::size_t pick = 0;
        double best_z = -std::numeric_limits<double>::infinity();
        bool first = true;
        for (std::size_t k = 0; k < frontier.size(); ++k) {
            const double z = c.zscore(frontier[k]);
            if (first || z > best_z || (z == best_z && frontier[k] < frontier[pick])) {
                best_z = z;
                pick = k;
                first = false;
            }
        }
        const auto v = frontier[pick];
        frontier.erase(frontier.begin() + static_cast<std::ptrdiff_t>(pick));
        c.add(v);
        order.push_back(v);
        push_neighbors(v);
        if (c.size() >= o.min_size) {
            const double s = c.score();
            if (s <= best_score) {
                best_score = s;
                best_len = c.size();
            }
        }
    }
    if (best_len == 0) return std::nullopt;

    Community clean(g);
    for (std::size_t k = 0; k < best_len; ++k) clean.add(order[k]);

    const std::size_t cap = 4 * g.size() + 50;
    for (std::size_t it = 0; it < cap; ++it) {
        std::size_t worst = g.size();
        double worst_p = o.tolerance;
        for (auto v : clean.members()) {
            const double p = clean.corrected(v);
            if (p <= o.tolerance) continue;
            if (p > worst_p || (p == worst_p && v < worst)) {
                worst_p = p;
                worst = v;
            }
        }
        if (worst < g.size() && clean.size() > 1) {
            clean.remove(worst);
            continue;
        }
        std::size_t best = g.size();
        double best_p = o.tolerance;
        for (std::size_t v = 0; v < g.size(); ++v) {
            if (clean.contains(v) || clean.kin(v) <= 0) continue;
            const double p = clean.corrected(v);
            if (p < best_p || (p == best_p && best == g.size())) {
                best_p = p;
                best = v;
            }
        }
        if (best < g.size()) {
            clean.add(best);
            continue;
        }
        break;
    }
    if (clean.size() < o.min_size) return std::nullopt;
    Found f;
    f.members = clean.members();
    std::sort(f.members.begin(), f.members.end());
    f.score = clean.score();
    return f;
}

double jaccard(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
    std::vector<std::size_t> both;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(both));
    const double inter = static_cast<double>(both.size());
    return inter / (static_cast<double>(a.size() + b.size()) - inter);
}

}  // namespace

double membership_pvalue(const WeightedGraph& g, const std::vector<std::size_t>& community, std::size_t v) {
    Community c(g);
    for (auto u : community)
        if (u != v) c.add(u);
    return Community::upper_tail(c.zscore(v));
}

ClusterSet detect_communities_once(const WeightedGraph& g, std::uint64_t seed, const DetectorOptions& o) {
    std::mt19937_64 rng(seed);
    std::vector<Found> found;
    std::vector<char> covered(g.size(), 0);
    for (std::size_t run = 0; run < o.runs; ++run) {
        std::vector<std::size_t> candidates;
        for (std::size_t v = 0; v < g.size(); ++v)
            if (!covered[v] && g.strength(v) > 0) candidates.push_back(v);
        if (candidates.empty())
            for (std::size_t v = 0; v < g.size(); ++v)
                if (g.strength(v) > 0) candidates.push_back(v);
        if (candidates.empty()) break;
        std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
        auto f = expand(g, candidates[pick(rng)], o);
        if (!f) continue;
        for (auto v : f->members) covered[v] = 1;
        found.push_back(std::move(*f));
    }

    std::stable_sort(found.begin(), found.end(), [](const Found& a, const Found& b) {
        if (a.score != b.score) return a.score < b.score;
        if (a.members.size() != b.members.size()) return a.members.size() > b.members.size();
        return a.members < b.members;
    });
    std::vector<Found> kept;
    for (auto& f : found) {
        bool dup = false;
        for (const auto& k : kept)
            if (jaccard(f.members, k.members) >= o.max_overlap) dup = true;
        if (!dup) kept.push_back(std::move(f));
    }

    ClusterSet out;
    out.seed = seed;
    std::vector<char> assigned(g.size(), 0);
    double total = 0;
    for (const auto& k : kept) {
        std::vector<std::string> ids;
        for (auto v : k.members) {
            ids.push_back(g.ids()[v]);
            assigned[v] = 1;
        }
        std::sort(ids.begin(), ids.end());
        out.clusters.push_back(std::move(ids));
        out.quality.push_back(k.score);
        total += k.score;
    }
    for (std::size_t v = 0; v < g.size(); ++v)
        if (!assigned[v]) out.singletons.push_back(g.ids()[v]);
    std::sort(out.singletons.begin(), out.singletons.end());
    out.score = kept.empty() ? 1.0 : total / static_cast<double>(kept.size());
    return out;
}

ClusterSet detect_overlapping_communities(const WeightedGraph& g, const DetectorOptions& o) {
    if (g.size() == 0) throw std::invalid_argument("cannot cluster an empty graph");
    if (o.seeds == 0) throw std::invalid_argument("at least one seed is needed");
    std::vector<ClusterSet> results(o.seeds);
    const unsigned workers = std::max(1u, std::min<unsigned>(o.workers, static_cast<unsigned>(o.seeds)));
    if (workers == 1) {
        for (std::size_t s = 0; s < o.seeds; ++s) results[s] = detect_communities_once(g, o.first_seed + s, o);
    } else {
        for (std::size_t start = 0; start < o.seeds; start += workers) {
            std::vector<std::future<ClusterSet>> batch;
            for (std::size_t s = start; s < std::min<std::size_t>(o.seeds, start + workers); ++s)
                batch.push_back(std::async(std::launch::async, [&, s] { return detect_communities_once(g, o.first_seed + s, o); }));
            for (std::size_t k = 0; k < batch.size(); ++k) results[start + k] = batch[k].get();
        }
    }
    std::size_t best = 0;
    for (std::size_t s = 1; s < results.size(); ++s)
        if (results[s].score < results[best].score) best = s;
    return results[best];
}

std::vector<std::string> ClusterSet::cases() const {
    std::set<std::string> all(singletons.begin(), singletons.end());
    for (const auto& c : clusters) all.insert(c.begin(), c.end());
    return {all.begin(), all.end()};
}

json ClusterSet::to_json() const {
    json cl = json::array();
    for (std::size_t k = 0; k < clusters.size(); ++k)
        cl.push_back({{"members", clusters[k]}, {"quality", k < quality.size() ? quality[k] : 1.0}});
    return {{"clusters", cl}, {"singletons", singletons}, {"seed", seed}, {"score", score}};
}

ClusterSet ClusterSet::from_json(const json& j) {
    ClusterSet s;
    for (const auto& c : j.at("clusters")) {
        auto members = c.at("members").get<std::vector<std::string>>();
        std::sort(members.begin(), members.end());
        s.clusters.push_back(std::move(members));
        s.quality.push_back(c.value("quality", 1.0));
    }
    s.singletons = j.value("singletons", std::vector<std::string>{});
    std::sort(s.singletons.begin(), s.singletons.end());
    s.seed = j.value("seed", std::uint64_t{0});
    s.score = j.value("score", 1.0);
    return s;
}

// ---------------------------------------------------------------------------
// OSLOM interop
// ---------------------------------------------------------------------------

void export_oslom_edgelist(const WeightedGraph& g, std::ostream& out) {
    char buf[64];
    for (const auto& e : g.edges()) {
        std::snprintf(buf, sizeof buf, "%zu %zu %.17g\n", e.u + 1, e.v + 1, e.weight);
        out << buf;
    }
    if (!out) throw std::runtime_error("failed to write the edge list");
}

json oslom_mapping(const WeightedGraph& g) { return g.ids(); }

ClusterSet import_oslom_partition(std::istream& in, const std::vector<std::string>& mapping) {
    ClusterSet s;
    std::set<std::string> seen;
    std::string line;
    std::size_t lineno = 0;
    double pending_quality = 1.0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        if (line[line.find_first_not_of(" \t")] == '#') {
            pending_quality = 1.0;
            auto pos = line.find("bs:");
            if (pos != std::string::npos) {
                std::istringstream q(line.substr(pos + 3));
                double v;
                if (q >> v) pending_quality = v;
            }
            continue;
        }
        std::istringstream ls(line);
        std::string tok;
        std::vector<std::string> members;
        while (ls >> tok) {
            std::size_t id = 0;
            std::size_t used = 0;
            try {
                id = std::stoul(tok, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != tok.size() || id == 0 || id > mapping.size())
                throw ParseError("unknown node id '" + tok + "' in module file", lineno);
            members.push_back(mapping[id - 1]);
        }
        std::sort(members.begin(), members.end());
        members.erase(std::unique(members.begin(), members.end()), members.end());
        seen.insert(members.begin(), members.end());
        if (members.size() == 1) {
            s.singletons.push_back(members.front());
        } else {
            s.clusters.push_back(std::move(members));
            s.quality.push_back(pending_quality);
        }
        pending_quality = 1.0;
    }
    for (const auto& id : mapping)
        if (!seen.count(id)) s.singletons.push_back(id);
    std::sort(s.singletons.begin(), s.singletons.end());
    s.singletons.erase(std::unique(s.singletons.begin(), s.singletons.end()), s.singletons.end());
    // a homeless node that also belongs to a module is not a singleton
    std::set<std::string> in_cluster;
    for (const auto& c : s.clusters) in_cluster.insert(c.begin(), c.end());
    std::erase_if(s.singletons, [&](const std::string& id) { return in_cluster.count(id) != 0; });
    if (!s.quality.empty())
        s.score = std::accumulate(s.quality.begin(), s.quality.end(), 0.0) / static_cast<double>(s.quality.size());
    return s;
}

void write_oslom_partition(const ClusterSet& set, const std::vector<std::string>& mapping, std::ostream& out) {
    std::map<std::string, std::size_t> index;
    for (std::size_t k = 0; k < mapping.size(); ++k) index.emplace(mapping[k], k + 1);
    auto id_of = [&](const std::string& c) {
        auto it = index.find(c);
        if (it == index.end()) throw std::invalid_argument("case '" + c + "' is not in the mapping");
        return it->second;
    };
    char buf[64];
    for (std::size_t k = 0; k < set.clusters.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.17g", k < set.quality.size() ? set.quality[k] : 1.0);
        out << "#module " << k << " size: " << set.clusters[k].size() << " bs: " << buf << '\n';
        std::vector<std::size_t> ids;
        for (const auto& c : set.clusters[k]) ids.push_back(id_of(c));
        std::sort(ids.begin(), ids.end());
        for (std::size_t i = 0; i < ids.size(); ++i) out << (i ? " " : "") << ids[i];
        out << '\n';
    }
    for (std::size_t k = 0; k < set.singletons.size(); ++k) {
        out << "#module " << set.clusters.size() + k << " size: 1 bs: 1\n" << id_of(set.singletons[k]) << '\n';
    }
}

// ---------------------------------------------------------------------------
// Profiles
// ---------------------------------------------------------------------------

std::vector<PairFrequency> ClusterProfile::top(std::size_t k) const {
    return {pairs.begin(), pairs.begin() + static_cast<std::ptrdiff_t>(std::min(k, pairs.size()))};
}

ProfileTable cluster_frequency_profile(const ClusterSet& clusters, const EventLog& log,
                                       const std::pair<std::string, std::string>& perspectives) {
    const auto a = log.perspective_index(perspectives.first);
    const auto b = log.perspective_index(perspectives.second);
    ProfileTable t;
    t.first = perspectives.first;
    t.second = perspectives.second;
    for (std::size_t k = 0; k < clusters.clusters.size(); ++k) {
        ClusterProfile p;
        p.cluster = k;
        std::map<std::pair<std::string, std::string>, std::size_t> counts;
        std::vector<double> lengths;
        std::size_t events = 0;
        for (const auto& id : clusters.clusters[k]) {
            if (!log.has_case(id)) throw std::invalid_argument("case '" + id + "' of cluster " + std::to_string(k) +
                                                               " is not in the log");
            const auto [lo, hi] = log.case_range(id);
            lengths.push_back(static_cast<double>(hi - lo));
            for (std::size_t e = lo; e < hi; ++e) {
                const auto& ev = log.events()[e];
                ++counts[{ev.perspectives[a], ev.perspectives[b]}];
                ++events;
            }
        }
        p.patients = lengths.size();
        if (!lengths.empty()) {
            const double n = static_cast<double>(lengths.size());
            p.mean_length = std::accumulate(lengths.begin(), lengths.end(), 0.0) / n;
            if (lengths.size() > 1) {
                double ss = 0;
                for (double l : lengths) ss += (l - p.mean_length) * (l - p.mean_length);
                p.std_length = std::sqrt(ss / (n - 1));
            }
        }
        for (const auto& [key, c] : counts)
            p.pairs.push_back({key.first, key.second, c, 100.0 * static_cast<double>(c) / static_cast<double>(events)});
        std::stable_sort(p.pairs.begin(), p.pairs.end(),
                         [](const PairFrequency& x, const PairFrequency& y) { return x.count > y.count; });
        t.clusters.push_back(std::move(p));
    }
    return t;
}

json ProfileTable::to_json(std::size_t top_k) const {
    json cl = json::array();
    for (const auto& c : clusters) {
        json pairs = json::array();
        for (const auto& p : top_k ? c.top(top_k) : c.pairs)
            pairs.push_back({{first, p.first}, {second, p.second}, {"count", p.count}, {"percent", p.percent}});
        cl.push_back({{"cluster", c.cluster},
                      {"patients", c.patients},
                      {"mean_length", c.mean_length},
                      {"std_length", c.std_length},
                      {"pairs", pairs}});
    }
    return {{"perspectives", {first, second}}, {"clusters", cl}};
}

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return q + "\"";
}

}  // namespace

void ProfileTable::write_csv(std::ostream& out) const {
    out << "cluster,patients,mean_length,std_length," << csv_field(first) << ',' << csv_field(second) << ",count,percent\n";
    char buf[128];
    for (const auto& c : clusters) {
        for (const auto& p : c.pairs) {
            out << c.cluster << ',' << c.patients;
            std::snprintf(buf, sizeof buf, ",%.6f,%.6f,", c.mean_length, c.std_length);
            out << buf << csv_field(p.first) << ',' << csv_field(p.second) << ',' << p.count;
            std::snprintf(buf, sizeof buf, ",%.6f\n", p.percent);
            out << buf;
        }
    }
}

}  // namespace magpath
