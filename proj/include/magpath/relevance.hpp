#pragma once
// Node relevance: a base score R0 blended from per-aspect centralities, then
// propagated over the whole MAG by a PageRank whose constant term is R0.

#include <map>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "magpath/centrality.hpp"
#include "magpath/mag.hpp"

namespace magpath {

struct RelevanceAspects {
    std::string intervention = "intervention";
    std::string occupation = "occupation";
    std::string unit = "unit";

    static RelevanceAspects from_json(const nlohmann::json& j);
};

struct RelevanceParams {
    double w1 = 0.5;
    double w2 = 0.5;
    double alpha_final = 0.85;
    double tol = 1e-10;
    std::size_t max_iter = 1000;
    /// Where R0's centralities come from when a cluster is given:
    /// the cohort-wide MAG (default) or the cluster's own MAG.
    enum class Scope { Cohort, Cluster } r0_scope = Scope::Cohort;

    void validate() const;
    static RelevanceParams from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

/// Normalized centralities keyed by aspect value: closeness of interventions,
/// betweenness of occupations, PageRank of units. Raw values are kept too.
struct AspectCentralities {
    RelevanceAspects aspects;
    std::map<std::string, double> closeness;
    std::map<std::string, double> betweenness;
    std::map<std::string, double> pagerank;
    std::map<std::string, double> closeness_raw;
    std::map<std::string, double> betweenness_raw;
    std::map<std::string, double> pagerank_raw;

    nlohmann::json to_json() const;
};

/// Single-aspect digraph of the MAG (multiplicity weights, virtual endpoints dropped).
WeightedDigraph aspect_graph(const Mag& mag, const std::string& aspect);

AspectCentralities compute_aspect_centralities(const Mag& mag, const RelevanceAspects& aspects = {},
                                               const PageRankOptions& pagerank_options = {});

/// w1 * C_pgr(unit) + (1 - w1) * (w2 * C_clo(intervention) + (1 - w2) * C_bet(occupation)).
double base_relevance(const std::string& intervention, const std::string& occupation, const std::string& unit,
                      const AspectCentralities& cent, double w1, double w2);
double base_relevance(const Mag& mag, const Node& node, const AspectCentralities& cent, double w1, double w2);

/// R0 for every real node of the MAG.
std::map<Node, double> base_relevance_map(const Mag& mag, const AspectCentralities& cent, double w1, double w2);

/// Aggregated MAG digraph without virtual nodes, plus a reversed twin of every
/// non-loop edge carrying the same weight. Node order is the MAG's node order.
WeightedDigraph propagation_graph(const Mag& mag, std::vector<Node>* nodes = nullptr);

/// PageRank over the propagation graph with beta = R0, min-max normalized.
std::map<Node, double> final_relevance(const Mag& mag, const std::map<Node, double>& r0, double alpha_final,
                                       double tol = 1e-10, std::size_t max_iter = 1000);

struct RelevanceResult {
    std::vector<Node> nodes;
    std::vector<double> r0;
    std::vector<double> relevance;

    std::map<Node, double> as_map() const;
    nlohmann::json to_json() const;
    void write_csv(std::ostream& out) const;
};

/// Whole pipeline. With a cluster, relevance is propagated over the
/// cluster's MAG and R0 follows params.r0_scope.
RelevanceResult compute_relevance(const Mag& mag, const RelevanceParams& params, const RelevanceAspects& aspects = {},
                                  const std::set<std::string>* cluster = nullptr);

struct SweepGrid {
    std::vector<double> w1{0.5};
    std::vector<double> w2{0.5};
    std::vector<double> alpha{0.85};

    static SweepGrid from_json(const nlohmann::json& j);
};

struct SweepPoint {
    double w1 = 0;
    double w2 = 0;
    double alpha = 0;
    std::vector<double> r0;
    std::vector<double> relevance;  // aligned with the node sample
};

struct SweepTable {
    std::vector<Node> nodes;
    std::vector<SweepPoint> points;

    nlohmann::json to_json() const;
};

/// Final relevance of the sampled nodes at every grid point (w1 outermost, alpha innermost).
SweepTable parameter_sweep(const Mag& mag, const AspectCentralities& cent, const SweepGrid& grid,
                           const std::vector<Node>& sample, double tol = 1e-10);

}  // namespace magpath
