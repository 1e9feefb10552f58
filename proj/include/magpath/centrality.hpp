#pragma once
// Centralities on weighted directed graphs: PageRank with a per-node constant
// term, hop-count betweenness and reachability-scaled closeness.

#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "magpath/mag.hpp"

namespace magpath {

struct Arc {
    std::size_t src = 0;
    std::size_t dst = 0;
    double weight = 0;
};

/// Simple directed graph; parallel edges are merged by summing weights.
class WeightedDigraph {
public:
    WeightedDigraph() = default;
    explicit WeightedDigraph(std::size_t n);
    explicit WeightedDigraph(std::vector<std::string> labels);

    std::size_t add_node(std::string label);
    /// Adds weight to arc src -> dst. Zero weights are ignored, negative ones rejected.
    void add_edge(std::size_t src, std::size_t dst, double weight = 1.0);

    std::size_t size() const { return labels_.size(); }
    const std::vector<std::string>& labels() const { return labels_; }
    /// Arcs sorted by (src, dst).
    std::vector<Arc> arcs() const;
    const std::vector<std::pair<std::size_t, double>>& out(std::size_t node) const { return out_[node]; }
    double out_degree(std::size_t node) const { return out_degree_[node]; }
    double weight(std::size_t src, std::size_t dst) const;

private:
    std::vector<std::string> labels_;
    std::vector<std::vector<std::pair<std::size_t, double>>> out_;  // sorted by target
    std::vector<double> out_degree_;
};

/// Aggregated MAG digraph as a weighted digraph (weight = multiplicity),
/// optionally without the virtual START/END nodes and their edges.
WeightedDigraph to_weighted_digraph(const AggregatedDigraph& g, bool drop_virtual);

class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& msg, double residual) : std::runtime_error(msg), residual_(residual) {}
    double residual() const { return residual_; }

private:
    double residual_;
};

struct PageRankOptions {
    double alpha = 0.85;
    /// Per-node constant term; empty means 1/N everywhere.
    std::vector<double> beta;
    double tol = 1e-10;
    std::size_t max_iter = 1000;
};

/// Power iteration of C = alpha * Abar^T C + beta, where Abar divides each
/// row by its out-degree and rows of nodes without out-edges are zero.
/// Stops when the largest per-node change is at most tol.
std::vector<double> pagerank(const WeightedDigraph& g, const PageRankOptions& options = {});

/// Sum over ordered pairs (u, v), u != i != v, of the fraction of shortest
/// u -> v paths through i. Unweighted, self-loops ignored.
std::vector<double> betweenness(const WeightedDigraph& g);

/// (N_i / (N - 1)) * (N_i / sum of distances to the N_i reachable nodes);
/// 0 when nothing is reachable.
std::vector<double> closeness_wf(const WeightedDigraph& g);

/// Affine rescale to [0, 1]; a constant vector maps to all ones.
std::vector<double> minmax_normalize(const std::vector<double>& scores);

/// "node,raw,normalized" rows.
void write_scores_csv(const WeightedDigraph& g, const std::vector<double>& raw, std::ostream& out);

}  // namespace magpath
