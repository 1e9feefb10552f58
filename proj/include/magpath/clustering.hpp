#pragma once
// Hierarchical-clustering diagnostics, similarity graphs and an overlapping
// community detector in the spirit of OSLOM (local expansion under a
// configuration-model null), plus interop with OSLOM's text formats.

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "magpath/dissimilarity.hpp"
#include "magpath/eventlog.hpp"

namespace magpath {

// ---------------------------------------------------------------------------
// Average linkage
// ---------------------------------------------------------------------------

/// One agglomeration step. Leaves are 0..n-1; the cluster created at step k is n + k.
struct Merge {
    std::size_t a = 0;  // smaller label
    std::size_t b = 0;
    double height = 0;
    std::size_t size = 0;
};

struct Dendrogram {
    std::size_t leaves = 0;
    std::vector<Merge> merges;
};

/// UPGMA. Ties are broken by the lowest (i, j) pair, where a cluster is
/// identified by its smallest leaf index.
Dendrogram average_linkage_dendrogram(const DissimilarityMatrix& m);

/// Condensed upper triangle (i < j, row-major) of merge heights.
std::vector<double> cophenetic_distances(const Dendrogram& d);
/// Condensed upper triangle of a square matrix.
std::vector<double> condensed(const DissimilarityMatrix& m);

/// Pearson correlation; throws std::domain_error when either side has zero variance.
double pearson(const std::vector<double>& x, const std::vector<double>& y);

double cophenetic_correlation(const DissimilarityMatrix& m, const Dendrogram& d);

struct CccSample {
    double mean = 0;
    double std = 0;  // sample standard deviation, 0 for a single repetition
    std::vector<double> values;
};

/// CCC over random principal submatrices of the given size.
CccSample sampled_ccc(const DissimilarityMatrix& m, std::size_t sample_size, std::size_t repetitions,
                      std::uint64_t seed);

// ---------------------------------------------------------------------------
// Similarity graph
// ---------------------------------------------------------------------------

struct UndirectedEdge {
    std::size_t u = 0;  // u < v
    std::size_t v = 0;
    double weight = 0;
};

class WeightedGraph {
public:
    WeightedGraph() = default;
    explicit WeightedGraph(std::vector<std::string> ids);

    void add_edge(std::size_t u, std::size_t v, double weight);

    std::size_t size() const { return ids_.size(); }
    const std::vector<std::string>& ids() const { return ids_; }
    const std::vector<std::pair<std::size_t, double>>& neighbors(std::size_t v) const { return adj_[v]; }
    double strength(std::size_t v) const { return strength_[v]; }
    double total_strength() const { return total_; }
    std::size_t edge_count() const { return edges_; }
    /// Each edge once, sorted by (u, v).
    std::vector<UndirectedEdge> edges() const;

private:
    std::vector<std::string> ids_;
    std::vector<std::vector<std::pair<std::size_t, double>>> adj_;
    std::vector<double> strength_;
    double total_ = 0;
    std::size_t edges_ = 0;
};

/// weight = 1 - distance for every pair closer than 1. Entries outside [0, 1] are rejected.
WeightedGraph similarity_graph(const DissimilarityMatrix& m);

// ---------------------------------------------------------------------------
// Overlapping communities
// ---------------------------------------------------------------------------

struct ClusterSet {
    std::vector<std::vector<std::string>> clusters;  // members sorted
    std::vector<double> quality;                     // one per cluster, lower is more significant
    std::vector<std::string> singletons;             // sorted
    std::uint64_t seed = 0;
    double score = 1.0;  // mean cluster quality; 1 when there are no clusters

    std::vector<std::string> cases() const;
    nlohmann::json to_json() const;
    static ClusterSet from_json(const nlohmann::json& j);
};

struct DetectorOptions {
    std::size_t runs = 25;
    std::size_t seeds = 5;
    std::uint64_t first_seed = 1;
    /// Corrected p-value a member must not exceed.
    double tolerance = 0.1;
    std::size_t min_size = 3;
    /// Jaccard index from which two communities count as duplicates.
    double max_overlap = 0.5;
    unsigned workers = 1;
};

/// Significance of v joining (or staying in) community C (v excluded from C):
/// upper-tail probability of v's weight towards C under a configuration-model
/// null, normal approximation.
double membership_pvalue(const WeightedGraph& g, const std::vector<std::size_t>& community, std::size_t v);

/// Runs the local detector from `seeds` restarts (seeds first_seed,
/// first_seed + 1, ...) and keeps the restart with the lowest score.
ClusterSet detect_overlapping_communities(const WeightedGraph& g, const DetectorOptions& options = {});

/// One restart with a given rng seed.
ClusterSet detect_communities_once(const WeightedGraph& g, std::uint64_t seed, const DetectorOptions& options = {});

// ---------------------------------------------------------------------------
// OSLOM interop
// ---------------------------------------------------------------------------

/// "src dst weight" per edge, 1-based ids in graph order.
void export_oslom_edgelist(const WeightedGraph& g, std::ostream& out);
/// The persisted id mapping: a JSON array whose k-th entry is the case id of node k + 1.
nlohmann::json oslom_mapping(const WeightedGraph& g);

/// Module file: '#' header lines (an optional "bs:" value is read as the
/// quality of the next module) followed by one line of member ids per module.
/// Single-member modules are homeless nodes; ids absent from every module are
/// singletons too.
ClusterSet import_oslom_partition(std::istream& in, const std::vector<std::string>& mapping);
void write_oslom_partition(const ClusterSet& set, const std::vector<std::string>& mapping, std::ostream& out);

// ---------------------------------------------------------------------------
// Profiles
// ---------------------------------------------------------------------------

struct PairFrequency {
    std::string first;
    std::string second;
    std::size_t count = 0;
    double percent = 0;
};

struct ClusterProfile {
    std::size_t cluster = 0;
    std::size_t patients = 0;
    double mean_length = 0;
    double std_length = 0;            // sample standard deviation
    std::vector<PairFrequency> pairs;  // by descending count, then by value

    std::vector<PairFrequency> top(std::size_t k) const;
};

struct ProfileTable {
    std::string first;
    std::string second;
    std::vector<ClusterProfile> clusters;

    nlohmann::json to_json(std::size_t top_k = 0) const;
    void write_csv(std::ostream& out) const;
};

ProfileTable cluster_frequency_profile(const ClusterSet& clusters, const EventLog& log,
                                       const std::pair<std::string, std::string>& perspectives);

}  // namespace magpath
