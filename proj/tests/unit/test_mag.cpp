#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numeric>
#include <random>

#include "magpath/mag.hpp"
#include "magpath/synthetic.hpp"

using namespace magpath;

namespace {

constexpr Timestamp kDay = 86400;

EventLog tiny_log() {
    // p1: a/gp -> b/nurse -> a/gp at days 0, 3, 10; p2: a/gp -> c/gp at days 0, 1; p3: single b/nurse
    std::vector<Event> ev{
        {"p1", 0, {"a", "gp", "u1"}, {}, 0},        {"p1", 3 * kDay, {"b", "nurse", "u1"}, {}, 1},
        {"p1", 10 * kDay, {"a", "gp", "u2"}, {}, 2}, {"p2", 0, {"a", "gp", "u1"}, {}, 3},
        {"p2", 1 * kDay, {"c", "gp", "u1"}, {}, 4},  {"p3", 5 * kDay, {"b", "nurse", "u1"}, {}, 5},
    };
    return EventLog({"intervention", "occupation", "unit"}, ev);
}

// Sum of one patient's edge intervals and whether the edges chain START -> END.
std::pair<double, bool> walk_summary(const Mag& mag, const std::string& patient) {
    double total = 0;
    std::vector<const MagEdge*> edges;
    for (const auto& e : mag.edges)
        if (e.patient == patient) edges.push_back(&e);
    bool chained = !edges.empty() && is_start(edges.front()->origin) && is_end(edges.back()->target);
    for (std::size_t k = 0; k < edges.size(); ++k) {
        total += edges[k]->interval;
        if (k > 0 && edges[k]->origin != edges[k - 1]->target) chained = false;
    }
    return {total, chained};
}

}  // namespace

TEST_CASE("node helpers") {
    CHECK(node_key({"a", "gp", "S1"}) == "a|gp|S1");
    CHECK(sequence_label(12) == "S12");
    CHECK(sequence_ordinal("S12") == 12);
    CHECK(sequence_ordinal(kStart) == 0);
    CHECK(sequence_ordinal(kEnd) > 1000000);
    CHECK_THROWS_AS(sequence_ordinal("X1"), std::invalid_argument);
    CHECK_THROWS_AS(sequence_ordinal("S1x"), std::invalid_argument);
    CHECK(is_start({std::string(kStart), std::string(kStart)}));
    CHECK_FALSE(is_virtual({"a", "S1"}));
}

TEST_CASE("building a MAG") {
    const auto log = tiny_log();
    SUBCASE("without endpoints") {
        const auto mag = build_mag(log, {"intervention", "occupation"}, false);
        CHECK(mag.aspects == std::vector<std::string>{"intervention", "occupation", "sequence"});
        CHECK(mag.edges.size() == 3);
        REQUIRE(mag.lone_visits.size() == 1);
        CHECK(mag.lone_visits[0].node == Node{"b", "nurse", "S1"});
        CHECK(mag.nodes.count({"a", "gp", "S1"}) == 1);
        CHECK(mag.nodes.count({"a", "gp", "S3"}) == 1);
        CHECK(mag.nodes.size() == 5);
        CHECK(mag.edges[0].interval == 3.0);
        CHECK(mag.edges[1].interval == 7.0);
        CHECK(mag.patients() == std::vector<std::string>{"p1", "p2", "p3"});
    }
    SUBCASE("with endpoints") {
        const auto mag = build_mag(log, {"intervention", "occupation"}, true);
        CHECK(mag.lone_visits.empty());
        CHECK(mag.edges.size() == 3 + 2 * 3);
        CHECK(mag.real_node_count() == 5);
        CHECK(mag.nodes.count(mag.start_node()) == 1);
        for (const auto& p : mag.patients()) CHECK(walk_summary(mag, p).second);
    }
    CHECK_THROWS_AS(build_mag(log, {"nope"}, true), SchemaError);
}

TEST_CASE("json round trip") {
    const auto mag = build_mag(synthetic_pregnancy_log({30, 3}), {"intervention", "occupation", "unit"}, true);
    const auto back = Mag::from_json(mag.to_json());
    CHECK(back.aspects == mag.aspects);
    CHECK(back.nodes == mag.nodes);
    CHECK(back.edges == mag.edges);
    CHECK(back.lone_visits == mag.lone_visits);
    CHECK(back.endpoints == mag.endpoints);
}

TEST_CASE("subdetermination merges nodes and keeps multiplicity") {
    const auto mag = build_mag(tiny_log(), {"intervention", "occupation", "unit"}, true);
    const auto occ = subdetermine(mag, {"occupation"});
    CHECK(occ.aspects == std::vector<std::string>{"occupation"});
    CHECK(occ.edges.size() == mag.edges.size());
    // without Sequence, occupations collapse to gp and nurse plus endpoints
    CHECK(occ.nodes.size() == 4);
    const auto g = aggregate_digraph(occ);
    const auto gp = g.index_of({"gp"});
    std::size_t self = 0;
    for (const auto& e : g.edges)
        if (e.src == gp && e.dst == gp) self = e.weight;
    CHECK(self == 1);  // p2: gp -> gp
    CHECK(g.total_weight() == mag.edges.size());
    // order follows the MAG, not the request
    CHECK(subdetermine(mag, {"sequence", "intervention"}).aspects ==
          std::vector<std::string>{"intervention", "sequence"});
    CHECK_THROWS(subdetermine(mag, {"nope"}));
    CHECK_THROWS_AS(subdetermine(mag, {}), std::invalid_argument);
}

TEST_CASE("aggregation tracks intervals and distinct patients") {
    std::vector<Event> ev;
    std::size_t row = 0;
    for (int p = 0; p < 3; ++p)
        for (int k = 0; k < 2; ++k)
            ev.push_back({"p" + std::to_string(p), static_cast<Timestamp>(k * (p + 1)) * kDay,
                          {k ? "y" : "x"}, {}, row++});
    const auto mag = build_mag(EventLog({"intervention"}, ev), {"intervention"}, false);
    const auto g = aggregate_digraph(mag);
    REQUIRE(g.edges.size() == 1);
    CHECK(g.edges[0].weight == 3);
    CHECK(g.edges[0].patients.size() == 3);
    const auto s = g.edges[0].summary();
    CHECK(s.min == 1);
    CHECK(s.max == 3);
    CHECK(s.mean == 2);
    CHECK(s.median == 2);
    CHECK(summarize_intervals({4, 1, 3, 2}).median == 2.5);
    CHECK_THROWS_AS(g.index_of({"zz"}), std::out_of_range);
}

TEST_CASE("node removal bridges intervals") {
    const auto mag = build_mag(tiny_log(), {"intervention", "occupation"}, true);
    const Node b2{"b", "nurse", "S2"};
    const auto out = remove_node(mag, b2);
    CHECK(out.nodes.count(b2) == 0);
    bool bridged = false;
    for (const auto& e : out.edges)
        if (e.patient == "p1" && e.origin == Node{"a", "gp", "S1"} && e.target == Node{"a", "gp", "S3"}) {
            CHECK(e.interval == 10.0);
            bridged = true;
        }
    CHECK(bridged);
    CHECK_THROWS_AS(remove_node(mag, {"zz", "zz", "S9"}), std::invalid_argument);

    // p3's only visit: START -> END remains
    const auto lone = remove_node(mag, {"b", "nurse", "S1"});
    const auto [t, chained] = walk_summary(lone, "p3");
    CHECK(chained);
    CHECK(t == 0);

    SUBCASE("without endpoints, first and last visits drop their edge") {
        const auto plain = build_mag(tiny_log(), {"intervention", "occupation"}, false);
        const auto first = remove_node(plain, {"a", "gp", "S1"});
        // p2 keeps a single visit
        bool lone_p2 = false;
        for (const auto& v : first.lone_visits) lone_p2 |= v.patient == "p2" && v.node == Node{"c", "gp", "S2"};
        CHECK(lone_p2);
        std::size_t p1_edges = 0;
        for (const auto& e : first.edges) p1_edges += e.patient == "p1";
        CHECK(p1_edges == 1);
    }
}

TEST_CASE("random removals conserve elapsed time and connectivity") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 40; ++trial) {
        const auto log = random_log(100 + trial, 12, 7, 2, 15);
        Mag mag = build_mag(log, {"intervention", "occupation"}, true);
        std::map<std::string, double> before;
        for (const auto& p : mag.patients()) before[p] = walk_summary(mag, p).first;
        for (int k = 0; k < 5 && mag.real_node_count() > 1; ++k) {
            std::vector<Node> real;
            for (const auto& n : mag.nodes)
                if (!is_virtual(n)) real.push_back(n);
            mag = remove_node(mag, real[std::uniform_int_distribution<std::size_t>(0, real.size() - 1)(rng)]);
        }
        for (const auto& [p, t] : before) {
            const auto [after, chained] = walk_summary(mag, p);
            CHECK(chained);
            CHECK(after == doctest::Approx(t).epsilon(1e-12));
        }
    }
}

TEST_CASE("contraction") {
    const auto mag = build_mag(tiny_log(), {"intervention", "occupation"}, true);
    const auto c = contract_nodes(mag, "intervention", {{"b", "a"}, {"c", "a"}});
    CHECK(c.nodes.count({"a", "nurse", "S2"}) == 1);
    CHECK(c.nodes.count({"a", "gp", "S2"}) == 1);
    CHECK(c.nodes.count({"b", "nurse", "S2"}) == 0);
    CHECK(c.edges.size() == mag.edges.size());
    CHECK(c.nodes.count(c.start_node()) == 1);
    CHECK_THROWS_AS(contract_nodes(mag, "sequence", {}), std::invalid_argument);
}

TEST_CASE("restricting to patients") {
    const auto mag = build_mag(tiny_log(), {"intervention", "occupation"}, false);
    const auto r = restrict_patients(mag, {"p2", "p3"});
    CHECK(r.patients() == std::vector<std::string>{"p2", "p3"});
    CHECK(r.nodes.count({"b", "nurse", "S2"}) == 0);
    CHECK(r.lone_visits.size() == 1);
}

TEST_CASE("pathways from the MAG match the log") {
    const auto log = synthetic_pregnancy_log({40, 5});
    for (bool endpoints : {false, true}) {
        const auto mag = build_mag(log, {"intervention", "occupation"}, endpoints);
        const auto all = extract_pathways(mag);
        CHECK(all.size() == log.case_count());
        for (const auto& id : log.case_ids()) {
            const auto expected = pathway_from_log(log, id, {"intervention", "occupation"});
            CHECK(all.at(id) == expected);
            CHECK(extract_pathway(mag, id) == expected);
            CHECK(expected.intervals.size() + 1 == expected.activities.size());
        }
    }
    CHECK_THROWS_AS(extract_pathway(build_mag(log, {"intervention"}, false), "nobody"), std::out_of_range);
}
