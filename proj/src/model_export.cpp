#include "magpath/model_export.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>
#include <stdexcept>

namespace magpath {

using nlohmann::json;

Mag filter_by_relevance(const Mag& mag, const std::map<Node, double>& scores, double min_r, double max_r) {
    if (min_r > max_r) throw std::invalid_argument("min relevance exceeds max relevance");
    std::vector<std::pair<double, Node>> doomed;
    std::size_t real = 0;
    for (const auto& n : mag.nodes) {
        if (is_virtual(n)) continue;
        ++real;
        auto it = scores.find(n);
        if (it == scores.end()) throw std::out_of_range("no relevance score for node " + node_key(n));
        if (it->second < min_r || it->second > max_r) doomed.emplace_back(it->second, n);
    }
    if (real > 0 && doomed.size() == real)
        throw std::invalid_argument("relevance thresholds remove every node of the MAG");
    std::sort(doomed.begin(), doomed.end());
    Mag out = mag;
    for (const auto& [score, n] : doomed) out = remove_node(out, n);
    return out;
}

RenderOptions RenderOptions::from_json(const json& j) {
    RenderOptions o;
    if (j.contains("keep_aspects")) o.keep_aspects = j.at("keep_aspects").get<std::vector<std::string>>();
    o.lane_aspect = j.value("lane_aspect", o.lane_aspect);
    o.color_aspect = j.value("color_aspect", o.color_aspect);
    o.hide_below_frequency = j.value("hide_below_frequency", o.hide_below_frequency);
    o.hide_endpoints = j.value("hide_endpoints", o.hide_endpoints);
    o.color_bins = j.value("color_bins", o.color_bins);
    if (j.contains("contract") && !j.at("contract").is_null()) {
        ContractOption c;
        c.aspect = j.at("contract").at("aspect").get<std::string>();
        c.mapping = j.at("contract").at("mapping").get<std::map<std::string, std::string>>();
        o.contract = std::move(c);
    }
    if (o.color_bins == 0) throw std::invalid_argument("color_bins must be at least 1");
    return o;
}

json RenderOptions::to_json() const {
    json j = {{"keep_aspects", keep_aspects},
              {"lane_aspect", lane_aspect},
              {"color_aspect", color_aspect},
              {"hide_below_frequency", hide_below_frequency},
              {"hide_endpoints", hide_endpoints},
              {"color_bins", color_bins}};
    j["contract"] = contract ? json{{"aspect", contract->aspect}, {"mapping", contract->mapping}} : json(nullptr);
    return j;
}

namespace {

std::string hex_color(double t) {
    // blue -> red
    const double from[3] = {43, 131, 186};
    const double to[3] = {215, 25, 28};
    char buf[8];
    int c[3];
    for (int k = 0; k < 3; ++k) c[k] = static_cast<int>(from[k] + (to[k] - from[k]) * t + 0.5);
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c[0], c[1], c[2]);
    return buf;
}

std::string label_of(const Node& n, std::size_t seq) {
    std::string out;
    for (std::size_t i = 0; i < n.size(); ++i) {
        if (i == seq) continue;
        if (!out.empty()) out += " / ";
        out += n[i];
    }
    return out;
}

}  // namespace

ModelViewDoc render_model(const Mag& mag, const RenderOptions& o, const std::map<Node, double>* relevance) {
    if (o.color_bins == 0) throw std::invalid_argument("color_bins must be at least 1");
    const std::string seq_name(kSequence);
    if (!mag.sequence_index()) throw std::invalid_argument("the MAG has no sequence aspect");

    std::vector<std::string> keep = o.keep_aspects;
    if (keep.empty()) keep = mag.aspects;
    if (std::find(keep.begin(), keep.end(), seq_name) == keep.end()) keep.push_back(seq_name);
    Mag view = subdetermine(mag, keep);

    std::string lane = o.lane_aspect;
    if (lane.empty())
        for (const auto& a : view.aspects)
            if (a != seq_name) {
                lane = a;
                break;
            }
    if (lane.empty()) throw std::invalid_argument("no aspect left to lay out lanes");
    if (!view.find_aspect(lane))
        throw std::invalid_argument("lane aspect '" + lane + "' is dropped by the kept aspects");
    if (lane == seq_name) throw std::invalid_argument("the sequence aspect cannot be the lane aspect");
    const std::string color = o.color_aspect.empty() ? lane : o.color_aspect;
    if (!view.find_aspect(color))
        throw std::invalid_argument("color aspect '" + color + "' is dropped by the kept aspects");
    if (o.contract) {
        if (!view.find_aspect(o.contract->aspect))
            throw std::invalid_argument("contract aspect '" + o.contract->aspect + "' is dropped by the kept aspects");
        view = contract_nodes(view, o.contract->aspect, o.contract->mapping);
    }

    // relevance of rendered nodes: max over the input nodes that map onto them
    std::map<Node, double> rel;
    if (relevance) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < mag.aspects.size(); ++i)
            if (view.find_aspect(mag.aspects[i])) idx.push_back(i);
        const auto ca = o.contract ? std::optional(view.aspect_index(o.contract->aspect)) : std::nullopt;
        for (const auto& [n, v] : *relevance) {
            if (is_virtual(n)) continue;
            Node p;
            for (auto i : idx) p.push_back(n.at(i));
            if (ca) {
                auto it = o.contract->mapping.find(p[*ca]);
                if (it != o.contract->mapping.end()) p[*ca] = it->second;
            }
            auto [slot, fresh] = rel.emplace(p, v);
            if (!fresh) slot->second = std::max(slot->second, v);
        }
    }

    const auto agg = aggregate_digraph(view);
    const auto seq = *view.sequence_index();
    const auto li = view.aspect_index(lane);
    const auto ci = view.aspect_index(color);

    ModelViewDoc doc;
    doc.aspects = view.aspects;
    doc.lane_aspect = lane;
    doc.color_aspect = color;

    // columns: START, S1..Smax, END
    std::size_t max_ord = 0;
    for (const auto& n : agg.nodes)
        if (!is_virtual(n)) max_ord = std::max(max_ord, sequence_ordinal(n[seq]));
    doc.columns.push_back(std::string(kStart));
    for (std::size_t k = 1; k <= max_ord; ++k) doc.columns.push_back(sequence_label(k));
    doc.columns.push_back(std::string(kEnd));

    std::set<std::string> lanes;
    std::vector<char> shown(agg.nodes.size(), 1);
    for (std::size_t k = 0; k < agg.nodes.size(); ++k) {
        const auto& n = agg.nodes[k];
        if (is_virtual(n) && o.hide_endpoints) {
            shown[k] = 0;
            continue;
        }
        DocNode dn;
        dn.id = node_key(n);
        dn.tuple = n;
        dn.is_virtual = is_virtual(n);
        if (dn.is_virtual) {
            dn.column = is_start(n) ? 0 : max_ord + 1;
            dn.label = is_start(n) ? "START" : "END";
        } else {
            dn.column = sequence_ordinal(n[seq]);
            dn.lane = n[li];
            dn.color_key = n[ci];
            dn.label = label_of(n, seq);
            lanes.insert(dn.lane);
            auto it = rel.find(n);
            if (it != rel.end()) dn.relevance = it->second;
        }
        doc.nodes.push_back(std::move(dn));
    }
    doc.lanes.assign(lanes.begin(), lanes.end());
    std::sort(doc.nodes.begin(), doc.nodes.end(), [](const DocNode& a, const DocNode& b) {
        return std::tie(a.column, a.lane, a.id) < std::tie(b.column, b.lane, b.id);
    });

    std::vector<double> means;
    for (const auto& e : agg.edges) {
        if (!shown[e.src] || !shown[e.dst]) continue;
        if (e.patients.size() < o.hide_below_frequency) continue;
        DocEdge de;
        de.src = node_key(agg.nodes[e.src]);
        de.dst = node_key(agg.nodes[e.dst]);
        de.frequency = e.weight;
        de.patients = e.patients.size();
        de.interval = e.summary();
        const bool real = !is_virtual(agg.nodes[e.src]) && !is_virtual(agg.nodes[e.dst]);
        de.color_bin = real ? 0 : -1;
        if (real) means.push_back(de.interval.mean);
        doc.edges.push_back(std::move(de));
    }

    if (!means.empty()) {
        std::vector<double> cuts;
        for (std::size_t k = 0; k <= o.color_bins; ++k)
            cuts.push_back(quantile(means, static_cast<double>(k) / static_cast<double>(o.color_bins)));
        cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
        if (cuts.size() == 1) cuts.push_back(cuts.front());
        doc.bin_edges = cuts;
        const std::size_t bins = cuts.size() - 1;
        for (std::size_t k = 0; k < bins; ++k)
            doc.bin_colors.push_back(hex_color(bins == 1 ? 0.0 : static_cast<double>(k) / static_cast<double>(bins - 1)));
        for (auto& e : doc.edges) {
            if (e.color_bin < 0) continue;
            // interior cuts split the bins; values on a cut go to the upper bin
            auto it = std::upper_bound(cuts.begin() + 1, cuts.end() - 1, e.interval.mean);
            e.color_bin = static_cast<int>(it - (cuts.begin() + 1));
        }
    }
    return doc;
}

json ModelViewDoc::to_json() const {
    json ns = json::array();
    for (const auto& n : nodes) {
        json jn = {{"id", n.id},
                   {"tuple", n.tuple},
                   {"lane", n.lane},
                   {"column", n.column},
                   {"color_key", n.color_key},
                   {"label", n.label},
                   {"virtual", n.is_virtual}};
        jn["relevance"] = n.relevance ? json(*n.relevance) : json(nullptr);
        ns.push_back(std::move(jn));
    }
    json es = json::array();
    for (const auto& e : edges)
        es.push_back({{"src", e.src},
                      {"dst", e.dst},
                      {"frequency", e.frequency},
                      {"patients", e.patients},
                      {"interval", {{"min", e.interval.min}, {"max", e.interval.max}, {"mean", e.interval.mean},
                                    {"median", e.interval.median}}},
                      {"color_bin", e.color_bin}});
    json legend = json::array();
    for (std::size_t k = 0; k < bin_colors.size(); ++k)
        legend.push_back({{"bin", k}, {"from", bin_edges[k]}, {"to", bin_edges[k + 1]}, {"color", bin_colors[k]}});
    return {{"aspects", aspects},
            {"lane_aspect", lane_aspect},
            {"color_aspect", color_aspect},
            {"lanes", lanes},
            {"columns", columns},
            {"nodes", ns},
            {"edges", es},
            {"legend", {{"interval_bins", legend}}}};
}

std::string ModelViewDoc::checksum() const {
    const auto text = to_json().dump();
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

std::string quoted(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out.push_back('\\');
        if (c == '\n') {
            out += "\\n";
            continue;
        }
        out.push_back(c);
    }
    return out + "\"";
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

}  // namespace

void export_dot(const ModelViewDoc& doc, std::ostream& out) {
    out << "digraph model {\n";
    out << "  rankdir=LR;\n";
    out << "  node [shape=box, style=\"rounded,filled\", fillcolor=white, fontsize=10];\n";
    std::map<std::string, std::vector<const DocNode*>> by_lane;
    for (const auto& n : doc.nodes) by_lane[n.lane].push_back(&n);
    std::size_t lane_no = 0;
    for (const auto& l : doc.lanes) {
        out << "  subgraph cluster_" << lane_no++ << " {\n";
        out << "    label=" << quoted(doc.lane_aspect + ": " + l) << ";\n";
        out << "    style=dashed;\n";
        for (const auto* n : by_lane[l]) {
            out << "    " << quoted(n->id) << " [label=" << quoted(n->label + "\n" + doc.columns.at(n->column));
            if (n->relevance) out << ", tooltip=" << quoted("relevance " + num(*n->relevance));
            out << "];\n";
        }
        out << "  }\n";
    }
    for (const auto* n : by_lane[""]) out << "  " << quoted(n->id) << " [label=" << quoted(n->label) << ", shape=circle];\n";
    for (const auto& e : doc.edges) {
        out << "  " << quoted(e.src) << " -> " << quoted(e.dst) << " [label=" << quoted(std::to_string(e.patients));
        if (e.color_bin >= 0)
            out << ", color=" << quoted(doc.bin_colors.at(static_cast<std::size_t>(e.color_bin)))
                << ", tooltip=" << quoted("mean interval " + num(e.interval.mean));
        else
            out << ", color=\"#999999\", style=dashed";
        out << "];\n";
    }
    out << "}\n";
    if (!out) throw std::runtime_error("failed to write the DOT file");
}

}  // namespace magpath
