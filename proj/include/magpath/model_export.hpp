#pragma once
// Relevance-based simplification of a MAG and the renderable model document
// (lanes x Sequence columns, interval-colored edges) plus a DOT export.

#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "magpath/mag.hpp"

namespace magpath {

/// Removes, in ascending relevance order, every real node whose score lies
/// outside [min_r, max_r]. Virtual nodes are never removed. Throws when a real
/// node has no score or when no real node would survive.
Mag filter_by_relevance(const Mag& mag, const std::map<Node, double>& scores, double min_r,
                        double max_r = std::numeric_limits<double>::infinity());

struct ContractOption {
    std::string aspect;
    std::map<std::string, std::string> mapping;
};

struct RenderOptions {
    /// Aspects to keep; empty keeps all. Sequence is always kept.
    std::vector<std::string> keep_aspects;
    /// Aspect whose values form the lanes; empty means the first non-Sequence aspect.
    std::string lane_aspect;
    /// Aspect giving each node's color key; empty means the lane aspect.
    std::string color_aspect;
    /// Edges followed by fewer distinct patients are hidden.
    std::size_t hide_below_frequency = 0;
    bool hide_endpoints = false;
    std::size_t color_bins = 5;
    std::optional<ContractOption> contract;

    static RenderOptions from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

struct DocNode {
    std::string id;
    Node tuple;
    std::string lane;  // empty for START/END
    std::size_t column = 0;
    std::string color_key;
    std::string label;
    std::optional<double> relevance;
    bool is_virtual = false;
};

struct DocEdge {
    std::string src;
    std::string dst;
    std::size_t frequency = 0;  // multiplicity
    std::size_t patients = 0;   // distinct patients
    IntervalSummary interval;
    int color_bin = -1;  // -1 for edges touching START/END
};

struct ModelViewDoc {
    std::vector<std::string> aspects;
    std::string lane_aspect;
    std::string color_aspect;
    std::vector<std::string> lanes;    // sorted
    std::vector<std::string> columns;  // column labels, index = DocNode::column
    std::vector<DocNode> nodes;        // sorted by (column, lane, id)
    std::vector<DocEdge> edges;        // sorted by (src, dst)
    /// Boundaries of the interval bins: bin k covers [bin_edges[k], bin_edges[k + 1]].
    std::vector<double> bin_edges;
    std::vector<std::string> bin_colors;

    nlohmann::json to_json() const;
    /// FNV-1a of the compact JSON form.
    std::string checksum() const;
};

/// subdetermine -> contract -> aggregate -> hide -> bin. `relevance` (keyed by
/// the input MAG's nodes) is carried onto rendered nodes, taking the maximum
/// over merged nodes.
ModelViewDoc render_model(const Mag& mag, const RenderOptions& options,
                          const std::map<Node, double>* relevance = nullptr);

void export_dot(const ModelViewDoc& doc, std::ostream& out);

}  // namespace magpath
