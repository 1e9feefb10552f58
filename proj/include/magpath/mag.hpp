#pragma once
// MultiAspect Graph (MAG) of patient pathways.
//
// Nodes are tuples with one value per aspect; the last aspect is always the
// Sequence ordinal ("S1" is a pathway's first event, shared across patients).
// Edges are per-patient and carry the elapsed interval. The multigraph is the
// ground truth: aggregated digraphs and other simple views are derived from it.
//
// Edges are stored grouped by patient (sorted by patient id) and, within a
// patient, in walk order. All editing operations preserve this layout.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "magpath/eventlog.hpp"

namespace magpath {

inline constexpr std::string_view kSequence = "sequence";
inline constexpr std::string_view kStart = "__START__";
inline constexpr std::string_view kEnd = "__END__";

using Node = std::vector<std::string>;
using ActivityTuple = std::vector<std::string>;

bool is_virtual(const Node& node);
bool is_start(const Node& node);
bool is_end(const Node& node);
/// Human-readable id: values joined with '|'.
std::string node_key(const Node& node);
std::string sequence_label(std::size_t ordinal);
/// 1-based ordinal of a Sequence value; START is 0 and END is the largest value.
std::size_t sequence_ordinal(std::string_view value);

struct MagEdge {
    Node origin;
    Node target;
    std::string patient;
    double interval = 0;

    bool operator==(const MagEdge&) const = default;
};

/// A patient whose pathway currently has no edge (single event, no endpoints).
struct LoneVisit {
    std::string patient;
    Node node;

    bool operator==(const LoneVisit&) const = default;
};

struct Mag {
    std::vector<std::string> aspects;
    std::set<Node> nodes;
    std::vector<MagEdge> edges;
    std::vector<LoneVisit> lone_visits;
    TimeUnit time_unit = TimeUnit::Days;
    bool endpoints = false;

    std::optional<std::size_t> find_aspect(std::string_view name) const;
    std::size_t aspect_index(std::string_view name) const;
    std::optional<std::size_t> sequence_index() const { return find_aspect(kSequence); }
    Node start_node() const { return Node(aspects.size(), std::string(kStart)); }
    Node end_node() const { return Node(aspects.size(), std::string(kEnd)); }
    std::vector<std::string> patients() const;
    std::size_t real_node_count() const;

    nlohmann::json to_json() const;
    static Mag from_json(const nlohmann::json& j);
};

/// Activity tuples and the intervals between consecutive events; |T| = |A| - 1.
struct Pathway {
    std::vector<ActivityTuple> activities;
    std::vector<double> intervals;

    std::size_t size() const { return activities.size(); }
    bool operator==(const Pathway&) const = default;
};

/// One node per (event aspect values, ordinal) and one edge per consecutive
/// event pair. With endpoints, START -> first and last -> END edges have interval 0.
Mag build_mag(const EventLog& log, const std::vector<std::string>& aspect_names, bool add_virtual_endpoints);

/// Projection onto a subset of aspects; nodes that become identical merge,
/// edge multiplicity and attributes are kept.
Mag subdetermine(const Mag& mag, const std::vector<std::string>& keep);

struct IntervalSummary {
    double min = 0;
    double max = 0;
    double mean = 0;
    double median = 0;
};

IntervalSummary summarize_intervals(const std::vector<double>& intervals);

struct AggregatedEdge {
    std::size_t src = 0;
    std::size_t dst = 0;
    std::size_t weight = 0;  // multiplicity
    std::vector<double> intervals;
    std::vector<std::string> patients;  // distinct, sorted

    IntervalSummary summary() const { return summarize_intervals(intervals); }
};

struct AggregatedDigraph {
    std::vector<Node> nodes;  // sorted
    std::vector<AggregatedEdge> edges;  // sorted by (src, dst)

    std::size_t index_of(const Node& node) const;
    std::size_t total_weight() const;
};

AggregatedDigraph aggregate_digraph(const Mag& mag);

/// Removes a node, bridging each patient's incoming and outgoing edges with
/// one edge whose interval is their sum. A removed first or last visit loses
/// its dangling edge; repeated consecutive visits are summed through.
Mag remove_node(const Mag& mag, const Node& node);

/// Replaces values of one aspect through a mapping (unmapped values are kept);
/// nodes that become equal merge. The Sequence aspect cannot be contracted.
Mag contract_nodes(const Mag& mag, const std::string& aspect, const std::map<std::string, std::string>& mapping);

/// Sub-MAG holding only the given patients' edges and lone visits.
Mag restrict_patients(const Mag& mag, const std::set<std::string>& patients);

Pathway extract_pathway(const Mag& mag, const std::string& patient);
std::map<std::string, Pathway> extract_pathways(const Mag& mag);

/// The pathway of a case read straight from the log.
Pathway pathway_from_log(const EventLog& log, const std::string& case_id, const std::vector<std::string>& perspectives);

}  // namespace magpath
