#include "magpath/relevance.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>

namespace magpath {

using nlohmann::json;

RelevanceAspects RelevanceAspects::from_json(const json& j) {
    RelevanceAspects a;
    a.intervention = j.value("intervention", a.intervention);
    a.occupation = j.value("occupation", a.occupation);
    a.unit = j.value("unit", a.unit);
    return a;
}

void RelevanceParams::validate() const {
    if (!(w1 >= 0 && w1 <= 1)) throw std::invalid_argument("w1 must lie in [0, 1]");
    if (!(w2 >= 0 && w2 <= 1)) throw std::invalid_argument("w2 must lie in [0, 1]");
    if (!(alpha_final >= 0 && alpha_final < 1)) throw std::invalid_argument("alpha must lie in [0, 1)");
    if (!(tol > 0)) throw std::invalid_argument("tol must be positive");
}

RelevanceParams RelevanceParams::from_json(const json& j) {
    RelevanceParams p;
    p.w1 = j.value("w1", p.w1);
    p.w2 = j.value("w2", p.w2);
    p.alpha_final = j.value("alpha", j.value("alpha_final", p.alpha_final));
    p.tol = j.value("tol", p.tol);
    p.max_iter = j.value("max_iter", p.max_iter);
    const auto scope = j.value("r0_scope", std::string("cohort"));
    if (scope == "cohort")
        p.r0_scope = Scope::Cohort;
    else if (scope == "cluster")
        p.r0_scope = Scope::Cluster;
    else
        throw std::invalid_argument("r0_scope must be 'cohort' or 'cluster'");
    p.validate();
    return p;
}

json RelevanceParams::to_json() const {
    return {{"w1", w1},
            {"w2", w2},
            {"alpha", alpha_final},
            {"tol", tol},
            {"max_iter", max_iter},
            {"r0_scope", r0_scope == Scope::Cohort ? "cohort" : "cluster"}};
}

json AspectCentralities::to_json() const {
    auto block = [](const std::map<std::string, double>& raw, const std::map<std::string, double>& norm) {
        json out = json::array();
        for (const auto& [k, v] : raw) out.push_back({{"value", k}, {"raw", v}, {"normalized", norm.at(k)}});
        return out;
    };
    return {{aspects.intervention, {{"closeness", block(closeness_raw, closeness)}}},
            {aspects.occupation, {{"betweenness", block(betweenness_raw, betweenness)}}},
            {aspects.unit, {{"pagerank", block(pagerank_raw, pagerank)}}}};
}

WeightedDigraph aspect_graph(const Mag& mag, const std::string& aspect) {
    return to_weighted_digraph(aggregate_digraph(subdetermine(mag, {aspect})), true);
}

namespace {

void fill(const WeightedDigraph& g, const std::vector<double>& raw, std::map<std::string, double>& raw_out,
          std::map<std::string, double>& norm_out) {
    if (g.size() == 0) return;
    const auto norm = minmax_normalize(raw);
    for (std::size_t i = 0; i < g.size(); ++i) {
        raw_out[g.labels()[i]] = raw[i];
        norm_out[g.labels()[i]] = norm[i];
    }
}

}  // namespace

AspectCentralities compute_aspect_centralities(const Mag& mag, const RelevanceAspects& aspects,
                                               const PageRankOptions& pagerank_options) {
    AspectCentralities c;
    c.aspects = aspects;
    const auto gi = aspect_graph(mag, aspects.intervention);
    fill(gi, closeness_wf(gi), c.closeness_raw, c.closeness);
    const auto go = aspect_graph(mag, aspects.occupation);
    fill(go, betweenness(go), c.betweenness_raw, c.betweenness);
    const auto gu = aspect_graph(mag, aspects.unit);
    auto opts = pagerank_options;
    opts.beta.clear();
    fill(gu, pagerank(gu, opts), c.pagerank_raw, c.pagerank);
    return c;
}

namespace {

double lookup(const std::map<std::string, double>& m, const std::string& key, const char* what) {
    auto it = m.find(key);
    if (it == m.end()) throw std::out_of_range(std::string("no ") + what + " score for '" + key + "'");
    return it->second;
}

}  // namespace

double base_relevance(const std::string& intervention, const std::string& occupation, const std::string& unit,
                      const AspectCentralities& cent, double w1, double w2) {
    const double pgr = lookup(cent.pagerank, unit, "pagerank");
    const double clo = lookup(cent.closeness, intervention, "closeness");
    const double bet = lookup(cent.betweenness, occupation, "betweenness");
    return w1 * pgr + (1 - w1) * (w2 * clo + (1 - w2) * bet);
}

double base_relevance(const Mag& mag, const Node& node, const AspectCentralities& cent, double w1, double w2) {
    return base_relevance(node.at(mag.aspect_index(cent.aspects.intervention)),
                          node.at(mag.aspect_index(cent.aspects.occupation)),
                          node.at(mag.aspect_index(cent.aspects.unit)), cent, w1, w2);
}

std::map<Node, double> base_relevance_map(const Mag& mag, const AspectCentralities& cent, double w1, double w2) {
    const auto i = mag.aspect_index(cent.aspects.intervention);
    const auto o = mag.aspect_index(cent.aspects.occupation);
    const auto u = mag.aspect_index(cent.aspects.unit);
    std::map<Node, double> out;
    for (const auto& n : mag.nodes) {
        if (is_virtual(n)) continue;
        out[n] = base_relevance(n[i], n[o], n[u], cent, w1, w2);
    }
    return out;
}

WeightedDigraph propagation_graph(const Mag& mag, std::vector<Node>* nodes) {
    const auto agg = aggregate_digraph(mag);
    std::vector<std::size_t> index(agg.nodes.size(), SIZE_MAX);
    WeightedDigraph g;
    for (std::size_t k = 0; k < agg.nodes.size(); ++k) {
        if (is_virtual(agg.nodes[k])) continue;
        index[k] = g.add_node(node_key(agg.nodes[k]));
        if (nodes) nodes->push_back(agg.nodes[k]);
    }
    for (const auto& e : agg.edges) {
        if (index[e.src] == SIZE_MAX || index[e.dst] == SIZE_MAX) continue;
        const double w = static_cast<double>(e.weight);
        g.add_edge(index[e.src], index[e.dst], w);
        if (e.src != e.dst) g.add_edge(index[e.dst], index[e.src], w);
    }
    return g;
}

std::map<Node, double> final_relevance(const Mag& mag, const std::map<Node, double>& r0, double alpha_final,
                                       double tol, std::size_t max_iter) {
    std::vector<Node> nodes;
    const auto g = propagation_graph(mag, &nodes);
    if (nodes.empty()) throw std::invalid_argument("the MAG has no real nodes");
    PageRankOptions o;
    o.alpha = alpha_final;
    o.tol = tol;
    o.max_iter = max_iter;
    for (const auto& n : nodes) {
        auto it = r0.find(n);
        if (it == r0.end()) throw std::out_of_range("no base relevance for node " + node_key(n));
        o.beta.push_back(it->second);
    }
    const auto scores = minmax_normalize(pagerank(g, o));
    std::map<Node, double> out;
    for (std::size_t k = 0; k < nodes.size(); ++k) out[nodes[k]] = scores[k];
    return out;
}

std::map<Node, double> RelevanceResult::as_map() const {
    std::map<Node, double> out;
    for (std::size_t k = 0; k < nodes.size(); ++k) out[nodes[k]] = relevance[k];
    return out;
}

json RelevanceResult::to_json() const {
    json rows = json::array();
    for (std::size_t k = 0; k < nodes.size(); ++k)
        rows.push_back({{"node", nodes[k]}, {"id", node_key(nodes[k])}, {"r0", r0[k]}, {"relevance", relevance[k]}});
    return {{"nodes", rows}};
}

void RelevanceResult::write_csv(std::ostream& out) const {
    out << "node,r0,relevance\n";
    char buf[80];
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        std::string key = node_key(nodes[k]);
        if (key.find_first_of(",\"\n") != std::string::npos) {
            std::string q = "\"";
            for (char ch : key) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
            key = q + "\"";
        }
        std::snprintf(buf, sizeof buf, ",%.17g,%.17g\n", r0[k], relevance[k]);
        out << key << buf;
    }
}

RelevanceResult compute_relevance(const Mag& mag, const RelevanceParams& params, const RelevanceAspects& aspects,
                                  const std::set<std::string>* cluster) {
    params.validate();
    Mag target = cluster ? restrict_patients(mag, *cluster) : mag;
    if (cluster && target.edges.empty() && target.lone_visits.empty())
        throw std::invalid_argument("the cluster has no patients in this MAG");
    const Mag& source = cluster && params.r0_scope == RelevanceParams::Scope::Cluster ? target : mag;
    PageRankOptions po;
    po.tol = params.tol;
    po.max_iter = params.max_iter;
    const auto cent = compute_aspect_centralities(source, aspects, po);
    const auto r0 = base_relevance_map(target, cent, params.w1, params.w2);
    const auto fin = final_relevance(target, r0, params.alpha_final, params.tol, params.max_iter);
    RelevanceResult out;
    for (const auto& [n, v] : fin) {
        out.nodes.push_back(n);
        out.r0.push_back(r0.at(n));
        out.relevance.push_back(v);
    }
    return out;
}

SweepGrid SweepGrid::from_json(const json& j) {
    SweepGrid g;
    if (j.contains("w1")) g.w1 = j.at("w1").get<std::vector<double>>();
    if (j.contains("w2")) g.w2 = j.at("w2").get<std::vector<double>>();
    if (j.contains("alpha")) g.alpha = j.at("alpha").get<std::vector<double>>();
    return g;
}

json SweepTable::to_json() const {
    json ids = json::array();
    for (const auto& n : nodes) ids.push_back(node_key(n));
    json pts = json::array();
    for (const auto& p : points)
        pts.push_back({{"w1", p.w1}, {"w2", p.w2}, {"alpha", p.alpha}, {"r0", p.r0}, {"relevance", p.relevance}});
    return {{"nodes", ids}, {"points", pts}};
}

SweepTable parameter_sweep(const Mag& mag, const AspectCentralities& cent, const SweepGrid& grid,
                           const std::vector<Node>& sample, double tol) {
    if (grid.w1.empty() || grid.w2.empty() || grid.alpha.empty()) throw std::invalid_argument("empty sweep grid");
    SweepTable t;
    t.nodes = sample;
    for (double w1 : grid.w1) {
        for (double w2 : grid.w2) {
            RelevanceParams check;
            check.w1 = w1;
            check.w2 = w2;
            check.validate();
            const auto r0 = base_relevance_map(mag, cent, w1, w2);
            for (double a : grid.alpha) {
                check.alpha_final = a;
                check.validate();
                const auto fin = final_relevance(mag, r0, a, tol);
                SweepPoint p{w1, w2, a, {}, {}};
                for (const auto& n : sample) {
                    auto it = fin.find(n);
                    if (it == fin.end()) throw std::out_of_range("sampled node " + node_key(n) + " is not in the MAG");
                    p.r0.push_back(r0.at(n));
                    p.relevance.push_back(it->second);
                }
                t.points.push_back(std::move(p));
            }
        }
    }
    return t;
}

}  // namespace magpath
