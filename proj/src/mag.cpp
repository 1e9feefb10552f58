#include "magpath/mag.hpp"

#include <algorithm>
#include <charconv>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace magpath {

using nlohmann::json;

bool is_start(const Node& node) { return !node.empty() && node.back() == kStart; }
bool is_end(const Node& node) { return !node.empty() && node.back() == kEnd; }
bool is_virtual(const Node& node) { return is_start(node) || is_end(node); }

std::string node_key(const Node& node) {
    std::string out;
    for (std::size_t i = 0; i < node.size(); ++i) {
        if (i) out.push_back('|');
        out += node[i];
    }
    return out;
}

std::string sequence_label(std::size_t ordinal) { return "S" + std::to_string(ordinal); }

std::size_t sequence_ordinal(std::string_view value) {
    if (value == kStart) return 0;
    if (value == kEnd) return std::numeric_limits<std::size_t>::max();
    if (value.size() < 2 || value[0] != 'S') throw std::invalid_argument("not a sequence value: " + std::string(value));
    std::size_t out = 0;
    auto [ptr, ec] = std::from_chars(value.data() + 1, value.data() + value.size(), out);
    if (ec != std::errc() || ptr != value.data() + value.size())
        throw std::invalid_argument("not a sequence value: " + std::string(value));
    return out;
}

std::optional<std::size_t> Mag::find_aspect(std::string_view name) const {
    auto it = std::find(aspects.begin(), aspects.end(), name);
    if (it == aspects.end()) return std::nullopt;
    return static_cast<std::size_t>(it - aspects.begin());
}

std::size_t Mag::aspect_index(std::string_view name) const {
    auto i = find_aspect(name);
    if (!i) throw std::invalid_argument("aspect '" + std::string(name) + "' is not in the MAG");
    return *i;
}

std::vector<std::string> Mag::patients() const {
    std::set<std::string> ids;
    for (const auto& e : edges) ids.insert(e.patient);
    for (const auto& l : lone_visits) ids.insert(l.patient);
    return {ids.begin(), ids.end()};
}

std::size_t Mag::real_node_count() const {
    return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const Node& n) { return !is_virtual(n); }));
}

json Mag::to_json() const {
    json e = json::array();
    for (const auto& edge : edges)
        e.push_back({{"origin", edge.origin}, {"target", edge.target}, {"patient", edge.patient}, {"interval", edge.interval}});
    json l = json::array();
    for (const auto& v : lone_visits) l.push_back({{"patient", v.patient}, {"node", v.node}});
    return {{"aspects", aspects},         {"time_unit", to_string(time_unit)}, {"endpoints", endpoints},
            {"nodes", json(nodes)},       {"edges", e},                        {"lone_visits", l}};
}

Mag Mag::from_json(const json& j) {
    Mag m;
    m.aspects = j.at("aspects").get<std::vector<std::string>>();
    m.time_unit = parse_time_unit(j.value("time_unit", std::string("days")));
    m.endpoints = j.value("endpoints", false);
    for (const auto& n : j.at("nodes")) m.nodes.insert(n.get<Node>());
    for (const auto& e : j.at("edges"))
        m.edges.push_back({e.at("origin").get<Node>(), e.at("target").get<Node>(), e.at("patient").get<std::string>(),
                           e.at("interval").get<double>()});
    if (j.contains("lone_visits"))
        for (const auto& v : j.at("lone_visits"))
            m.lone_visits.push_back({v.at("patient").get<std::string>(), v.at("node").get<Node>()});
    for (const auto& e : m.edges)
        if (e.origin.size() != m.aspects.size() || e.target.size() != m.aspects.size())
            throw std::invalid_argument("edge arity does not match the aspect count");
    return m;
}

Mag build_mag(const EventLog& log, const std::vector<std::string>& aspect_names, bool add_virtual_endpoints) {
    Mag mag;
    mag.time_unit = log.time_unit();
    mag.endpoints = add_virtual_endpoints;
    std::vector<std::size_t> cols;
    for (const auto& name : aspect_names) {
        if (name == kSequence) continue;
        cols.push_back(log.perspective_index(name));
        mag.aspects.push_back(name);
    }
    mag.aspects.emplace_back(kSequence);
    const Node start = mag.start_node();
    const Node end = mag.end_node();

    for (const auto& id : log.case_ids()) {
        auto [b, e] = log.case_range(id);
        std::vector<Node> chain;
        for (std::size_t i = b; i < e; ++i) {
            Node n;
            for (auto c : cols) n.push_back(log.events()[i].perspectives[c]);
            n.push_back(sequence_label(i - b + 1));
            mag.nodes.insert(n);
            chain.push_back(std::move(n));
        }
        if (add_virtual_endpoints) {
            mag.nodes.insert(start);
            mag.nodes.insert(end);
            mag.edges.push_back({start, chain.front(), id, 0.0});
        }
        for (std::size_t k = 0; k + 1 < chain.size(); ++k) {
            const double dt = log.interval(log.events()[b + k].timestamp, log.events()[b + k + 1].timestamp);
            mag.edges.push_back({chain[k], chain[k + 1], id, dt});
        }
        if (add_virtual_endpoints)
            mag.edges.push_back({chain.back(), end, id, 0.0});
        else if (chain.size() == 1)
            mag.lone_visits.push_back({id, chain.front()});
    }
    return mag;
}

namespace {

Node project(const Node& node, const std::vector<std::size_t>& idx) {
    Node out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(node[i]);
    return out;
}

// Virtual nodes keep their marker in the last slot so projection must not
// move it: callers always keep the original aspect order.
Node project_keep_virtual(const Node& node, const std::vector<std::size_t>& idx) {
    if (is_virtual(node)) return Node(idx.size(), node.back());
    return project(node, idx);
}

}  // namespace

Mag subdetermine(const Mag& mag, const std::vector<std::string>& keep) {
    if (keep.empty()) throw std::invalid_argument("subdetermination needs at least one aspect");
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < mag.aspects.size(); ++i)
        if (std::find(keep.begin(), keep.end(), mag.aspects[i]) != keep.end()) idx.push_back(i);
    for (const auto& k : keep) mag.aspect_index(k);  // throws on unknown aspect

    Mag out;
    out.time_unit = mag.time_unit;
    out.endpoints = mag.endpoints;
    for (auto i : idx) out.aspects.push_back(mag.aspects[i]);
    for (const auto& n : mag.nodes) out.nodes.insert(project_keep_virtual(n, idx));
    out.edges.reserve(mag.edges.size());
    for (const auto& e : mag.edges)
        out.edges.push_back({project_keep_virtual(e.origin, idx), project_keep_virtual(e.target, idx), e.patient, e.interval});
    for (const auto& v : mag.lone_visits) out.lone_visits.push_back({v.patient, project_keep_virtual(v.node, idx)});
    return out;
}

IntervalSummary summarize_intervals(const std::vector<double>& intervals) {
    IntervalSummary s;
    if (intervals.empty()) return s;
    auto sorted = intervals;
    std::sort(sorted.begin(), sorted.end());
    s.min = sorted.front();
    s.max = sorted.back();
    s.mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(sorted.size());
    const auto n = sorted.size();
    s.median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    return s;
}

std::size_t AggregatedDigraph::index_of(const Node& node) const {
    auto it = std::lower_bound(nodes.begin(), nodes.end(), node);
    if (it == nodes.end() || *it != node) throw std::out_of_range("node not in digraph: " + node_key(node));
    return static_cast<std::size_t>(it - nodes.begin());
}

std::size_t AggregatedDigraph::total_weight() const {
    std::size_t w = 0;
    for (const auto& e : edges) w += e.weight;
    return w;
}

AggregatedDigraph aggregate_digraph(const Mag& mag) {
    AggregatedDigraph g;
    g.nodes.assign(mag.nodes.begin(), mag.nodes.end());
    std::map<std::pair<std::size_t, std::size_t>, AggregatedEdge> acc;
    for (const auto& e : mag.edges) {
        const auto s = g.index_of(e.origin);
        const auto d = g.index_of(e.target);
        auto& a = acc[{s, d}];
        a.src = s;
        a.dst = d;
        ++a.weight;
        a.intervals.push_back(e.interval);
        a.patients.push_back(e.patient);
    }
    for (auto& [key, a] : acc) {
        std::sort(a.patients.begin(), a.patients.end());
        a.patients.erase(std::unique(a.patients.begin(), a.patients.end()), a.patients.end());
        g.edges.push_back(std::move(a));
    }
    return g;
}

namespace {

// Walks of one patient: maximal runs of edges where each edge starts where the
// previous one ended.
struct Walk {
    std::vector<Node> visits;
    std::vector<double> intervals;
};

std::vector<Walk> walks_of(const std::vector<const MagEdge*>& edges) {
    std::vector<Walk> out;
    for (const auto* e : edges) {
        if (out.empty() || out.back().visits.back() != e->origin) out.push_back({{e->origin}, {}});
        out.back().visits.push_back(e->target);
        out.back().intervals.push_back(e->interval);
    }
    return out;
}

// Calls fn(patient, edges-of-patient) for each patient in stored order.
template <class Fn>
void for_each_patient(const Mag& mag, Fn&& fn) {
    std::size_t i = 0;
    while (i < mag.edges.size()) {
        std::vector<const MagEdge*> group;
        const auto& patient = mag.edges[i].patient;
        while (i < mag.edges.size() && mag.edges[i].patient == patient) group.push_back(&mag.edges[i++]);
        fn(patient, group);
    }
}

void rebuild_nodes(Mag& mag) {
    mag.nodes.clear();
    for (const auto& e : mag.edges) {
        mag.nodes.insert(e.origin);
        mag.nodes.insert(e.target);
    }
    for (const auto& v : mag.lone_visits) mag.nodes.insert(v.node);
}

void sort_lone_visits(Mag& mag) {
    std::sort(mag.lone_visits.begin(), mag.lone_visits.end(),
              [](const LoneVisit& a, const LoneVisit& b) { return a.patient < b.patient; });
}

}  // namespace

Mag remove_node(const Mag& mag, const Node& node) {
    if (!mag.nodes.count(node)) throw std::invalid_argument("node not in MAG: " + node_key(node));
    Mag out;
    out.aspects = mag.aspects;
    out.time_unit = mag.time_unit;
    out.endpoints = mag.endpoints;
    for (const auto& v : mag.lone_visits)
        if (v.node != node) out.lone_visits.push_back(v);

    for_each_patient(mag, [&](const std::string& patient, const std::vector<const MagEdge*>& edges) {
        std::vector<MagEdge> kept;
        std::optional<Node> lone;
        for (const auto& walk : walks_of(edges)) {
            // Surviving visits with the time since the previous survivor.
            std::optional<Node> prev;
            double pending = 0;
            std::size_t survivors = 0;
            Node last_survivor;
            for (std::size_t k = 0; k < walk.visits.size(); ++k) {
                if (k > 0) pending += walk.intervals[k - 1];
                if (walk.visits[k] == node) continue;
                if (prev) kept.push_back({*prev, walk.visits[k], patient, pending});
                prev = walk.visits[k];
                pending = 0;
                ++survivors;
                last_survivor = walk.visits[k];
            }
            if (survivors == 1) lone = last_survivor;
        }
        if (!kept.empty()) {
            out.edges.insert(out.edges.end(), kept.begin(), kept.end());
        } else if (lone && !is_virtual(*lone)) {
            out.lone_visits.push_back({patient, *lone});
        }
    });
    sort_lone_visits(out);
    rebuild_nodes(out);
    return out;
}

Mag contract_nodes(const Mag& mag, const std::string& aspect, const std::map<std::string, std::string>& mapping) {
    if (aspect == kSequence) throw std::invalid_argument("the sequence aspect cannot be contracted");
    const auto a = mag.aspect_index(aspect);
    auto map_node = [&](const Node& n) {
        if (is_virtual(n)) return n;
        Node out = n;
        auto it = mapping.find(n[a]);
        if (it != mapping.end()) out[a] = it->second;
        return out;
    };
    Mag out = mag;
    for (auto& e : out.edges) {
        e.origin = map_node(e.origin);
        e.target = map_node(e.target);
    }
    for (auto& v : out.lone_visits) v.node = map_node(v.node);
    out.nodes.clear();
    for (const auto& n : mag.nodes) out.nodes.insert(map_node(n));
    return out;
}

Mag restrict_patients(const Mag& mag, const std::set<std::string>& patients) {
    Mag out;
    out.aspects = mag.aspects;
    out.time_unit = mag.time_unit;
    out.endpoints = mag.endpoints;
    for (const auto& e : mag.edges)
        if (patients.count(e.patient)) out.edges.push_back(e);
    for (const auto& v : mag.lone_visits)
        if (patients.count(v.patient)) out.lone_visits.push_back(v);
    rebuild_nodes(out);
    return out;
}

namespace {

ActivityTuple activity_of(const Mag& mag, const Node& node) {
    auto seq = mag.sequence_index();
    ActivityTuple out;
    for (std::size_t i = 0; i < node.size(); ++i)
        if (!seq || i != *seq) out.push_back(node[i]);
    return out;
}

Pathway pathway_of(const Mag& mag, const std::vector<const MagEdge*>& edges) {
    Pathway p;
    bool first = true;
    for (const auto* e : edges) {
        if (first && !is_virtual(e->origin)) p.activities.push_back(activity_of(mag, e->origin));
        first = false;
        if (is_virtual(e->target)) continue;
        if (!is_virtual(e->origin)) p.intervals.push_back(e->interval);
        p.activities.push_back(activity_of(mag, e->target));
    }
    return p;
}

}  // namespace

Pathway extract_pathway(const Mag& mag, const std::string& patient) {
    auto lo = std::lower_bound(mag.edges.begin(), mag.edges.end(), patient,
                               [](const MagEdge& e, const std::string& p) { return e.patient < p; });
    std::vector<const MagEdge*> edges;
    for (auto it = lo; it != mag.edges.end() && it->patient == patient; ++it) edges.push_back(&*it);
    if (!edges.empty()) return pathway_of(mag, edges);
    for (const auto& v : mag.lone_visits)
        if (v.patient == patient) return Pathway{{activity_of(mag, v.node)}, {}};
    throw std::out_of_range("unknown patient '" + patient + "'");
}

std::map<std::string, Pathway> extract_pathways(const Mag& mag) {
    std::map<std::string, Pathway> out;
    for_each_patient(mag, [&](const std::string& patient, const std::vector<const MagEdge*>& edges) {
        out[patient] = pathway_of(mag, edges);
    });
    for (const auto& v : mag.lone_visits) out[v.patient] = Pathway{{activity_of(mag, v.node)}, {}};
    return out;
}

Pathway pathway_from_log(const EventLog& log, const std::string& case_id, const std::vector<std::string>& perspectives) {
    std::vector<std::size_t> cols;
    for (const auto& p : perspectives)
        if (p != kSequence) cols.push_back(log.perspective_index(p));
    auto [b, e] = log.case_range(case_id);
    Pathway p;
    for (std::size_t i = b; i < e; ++i) {
        ActivityTuple a;
        for (auto c : cols) a.push_back(log.events()[i].perspectives[c]);
        p.activities.push_back(std::move(a));
        if (i > b) p.intervals.push_back(log.interval(log.events()[i - 1].timestamp, log.events()[i].timestamp));
    }
    return p;
}

}  // namespace magpath
