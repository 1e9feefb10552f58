#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "magpath/relevance.hpp"
#include "magpath/synthetic.hpp"
#include "oracles.hpp"

using namespace magpath;

namespace {

const std::vector<std::string> kAspects{"intervention", "occupation", "unit"};

Mag pregnancy_mag(std::size_t cases = 200) {
    PregnancyOptions o;
    o.cases = cases;
    return build_mag(synthetic_pregnancy_log(o), kAspects, true);
}

std::vector<double> values_of(const std::map<Node, double>& m) {
    std::vector<double> out;
    for (const auto& [n, v] : m) out.push_back(v);
    return out;
}

}  // namespace

TEST_CASE("parameters") {
    const auto p = RelevanceParams::from_json({{"w1", 0.2}, {"alpha", 0.3}, {"r0_scope", "cluster"}});
    CHECK(p.w1 == 0.2);
    CHECK(p.w2 == 0.5);
    CHECK(p.alpha_final == 0.3);
    CHECK(p.r0_scope == RelevanceParams::Scope::Cluster);
    CHECK(RelevanceParams::from_json(p.to_json()).to_json() == p.to_json());
    CHECK(RelevanceParams::from_json({{"alpha_final", 0.6}}).alpha_final == 0.6);
    CHECK_THROWS_AS(RelevanceParams::from_json({{"w1", 1.5}}), std::invalid_argument);
    CHECK_THROWS_AS(RelevanceParams::from_json({{"alpha", 1.0}}), std::invalid_argument);
    CHECK_THROWS_AS(RelevanceParams::from_json({{"r0_scope", "global"}}), std::invalid_argument);
    const auto a = RelevanceAspects::from_json({{"unit", "facility"}});
    CHECK(a.unit == "facility");
    CHECK(a.intervention == "intervention");
}

TEST_CASE("aspect graphs count transitions between values") {
    // p1: x@u1 -> y@u2 -> x@u1, p2: x@u1 -> x@u1
    std::vector<Event> ev{{"p1", 0, {"x", "gp", "u1"}, {}, 0},
                          {"p1", 86400, {"y", "nurse", "u2"}, {}, 1},
                          {"p1", 2 * 86400, {"x", "gp", "u1"}, {}, 2},
                          {"p2", 0, {"x", "gp", "u1"}, {}, 3},
                          {"p2", 86400, {"x", "gp", "u1"}, {}, 4}};
    const auto mag = build_mag(EventLog(kAspects, ev), kAspects, true);
    const auto g = aspect_graph(mag, "unit");
    REQUIRE(g.size() == 2);
    CHECK(g.labels() == std::vector<std::string>{"u1", "u2"});
    CHECK(g.weight(0, 1) == 1);
    CHECK(g.weight(1, 0) == 1);
    CHECK(g.weight(0, 0) == 1);
}

TEST_CASE("base relevance blends normalized centralities") {
    AspectCentralities c;
    c.closeness = {{"x", 0.2}};
    c.betweenness = {{"gp", 0.6}};
    c.pagerank = {{"u", 1.0}};
    CHECK(base_relevance("x", "gp", "u", c, 0.5, 0.5) == doctest::Approx(0.5 * 1.0 + 0.5 * (0.5 * 0.2 + 0.5 * 0.6)));
    CHECK(base_relevance("x", "gp", "u", c, 1, 0) == 1.0);
    CHECK(base_relevance("x", "gp", "u", c, 0, 1) == 0.2);
    CHECK(base_relevance("x", "gp", "u", c, 0, 0) == 0.6);
    CHECK_THROWS_AS(base_relevance("zz", "gp", "u", c, 0.5, 0.5), std::out_of_range);
}

TEST_CASE("centralities are computed on per-aspect graphs") {
    const auto mag = pregnancy_mag(60);
    const auto cent = compute_aspect_centralities(mag);
    const auto gu = aspect_graph(mag, "unit");
    const auto pr = pagerank(gu);
    const auto norm = minmax_normalize(pr);
    for (std::size_t i = 0; i < gu.size(); ++i) {
        CHECK(cent.pagerank_raw.at(gu.labels()[i]) == doctest::Approx(pr[i]));
        CHECK(cent.pagerank.at(gu.labels()[i]) == doctest::Approx(norm[i]));
    }
    const auto gi = aspect_graph(mag, "intervention");
    const auto clo = closeness_wf(gi);
    for (std::size_t i = 0; i < gi.size(); ++i) CHECK(cent.closeness_raw.at(gi.labels()[i]) == doctest::Approx(clo[i]));
    CHECK(cent.to_json().contains("unit"));
}

TEST_CASE("propagation graph mirrors edges except self-loops") {
    std::vector<Event> ev{{"p1", 0, {"x"}, {}, 0}, {"p1", 86400, {"y"}, {}, 1}};
    auto mag = build_mag(EventLog({"intervention"}, ev), {"intervention"}, true);
    mag = subdetermine(mag, {"intervention"});  // drop Sequence so x -> x can loop
    mag.edges.push_back({{"x"}, {"x"}, "p2", 1.0});
    mag.nodes.insert({"x"});
    std::vector<Node> nodes;
    const auto g = propagation_graph(mag, &nodes);
    REQUIRE(nodes.size() == 2);
    CHECK(g.weight(0, 1) == 1);
    CHECK(g.weight(1, 0) == 1);
    CHECK(g.weight(0, 0) == 1);
}

TEST_CASE("final relevance equals the normalized linear solution") {
    const auto mag = pregnancy_mag(40);
    const auto cent = compute_aspect_centralities(mag);
    const auto r0 = base_relevance_map(mag, cent, 0.5, 0.5);
    const auto fin = final_relevance(mag, r0, 0.7);

    std::vector<Node> nodes;
    const auto g = propagation_graph(mag, &nodes);
    oracle::Adjacency w(g.size(), std::vector<double>(g.size(), 0));
    for (const auto& a : g.arcs()) w[a.src][a.dst] = a.weight;
    std::vector<double> beta;
    for (const auto& n : nodes) beta.push_back(r0.at(n));
    auto x = oracle::pagerank_solve(w, 0.7, beta);
    const double lo = *std::min_element(x.begin(), x.end()), hi = *std::max_element(x.begin(), x.end());
    for (std::size_t k = 0; k < nodes.size(); ++k)
        CHECK(fin.at(nodes[k]) == doctest::Approx((x[k] - lo) / (hi - lo)).epsilon(1e-7));
}

TEST_CASE("boundary weights reproduce single centralities") {
    const auto mag = pregnancy_mag(80);
    const auto cent = compute_aspect_centralities(mag);
    const auto ui = mag.aspect_index("unit"), ii = mag.aspect_index("intervention");

    const auto unit_only = base_relevance_map(mag, cent, 1, 0.3);
    std::vector<double> pgr, clo;
    for (const auto& [n, v] : unit_only) {
        pgr.push_back(cent.pagerank.at(n[ui]));
        clo.push_back(cent.closeness.at(n[ii]));
    }
    CHECK(oracle::same_ranking(values_of(unit_only), pgr));
    CHECK(oracle::same_ranking(values_of(base_relevance_map(mag, cent, 0, 1)), clo));

    RelevanceParams p;
    p.alpha_final = 0;
    const auto r = compute_relevance(mag, p);
    CHECK(oracle::same_ranking(r.r0, r.relevance));
}

TEST_CASE("relevance keeps the backbone and drops scattered events") {
    const auto mag = pregnancy_mag(200);
    RelevanceParams p;
    p.w1 = 0.8;
    p.w2 = 0.5;
    p.alpha_final = 0.3;
    const auto r = compute_relevance(mag, p);
    std::map<std::string, std::pair<int, int>> kept;  // intervention -> (kept, total)
    for (std::size_t k = 0; k < r.nodes.size(); ++k) {
        auto& c = kept[r.nodes[k][0]];
        ++c.second;
        if (r.relevance[k] >= 0.4) ++c.first;
    }
    CHECK(kept[synth::kDental].first == 0);
    CHECK(kept[synth::kFlu].first == 0);
    CHECK(kept[synth::kAntenatal].first >= 0.9 * kept[synth::kAntenatal].second);
    CHECK(kept[synth::kHighRisk].first >= 1);
    CHECK(kept[synth::kDelivery].first >= 1);
}

TEST_CASE("cluster-scoped relevance") {
    const auto mag = pregnancy_mag(60);
    std::set<std::string> half;
    const auto patients = mag.patients();
    for (std::size_t k = 0; k < patients.size(); k += 2) half.insert(patients[k]);
    RelevanceParams p;
    const auto cohort_scope = compute_relevance(mag, p, {}, &half);
    p.r0_scope = RelevanceParams::Scope::Cluster;
    const auto cluster_scope = compute_relevance(mag, p, {}, &half);
    const auto sub = restrict_patients(mag, half);
    CHECK(cohort_scope.nodes.size() == sub.real_node_count());
    CHECK(cluster_scope.nodes == cohort_scope.nodes);
    // the cluster scope is the same as running on the restricted MAG
    RelevanceParams q;
    const auto direct = compute_relevance(sub, q);
    for (std::size_t k = 0; k < direct.relevance.size(); ++k)
        CHECK(cluster_scope.relevance[k] == doctest::Approx(direct.relevance[k]));
    const std::set<std::string> nobody{"nobody"};
    CHECK_THROWS_AS(compute_relevance(mag, q, {}, &nobody), std::invalid_argument);
}

TEST_CASE("output formats") {
    const auto mag = pregnancy_mag(20);
    const auto r = compute_relevance(mag, {});
    const auto j = r.to_json();
    CHECK(j["nodes"].size() == r.nodes.size());
    CHECK(j["nodes"][0].contains("relevance"));
    std::ostringstream csv;
    r.write_csv(csv);
    CHECK(csv.str().rfind("node,r0,relevance\n", 0) == 0);
    CHECK(r.as_map().size() == r.nodes.size());
}

TEST_CASE("parameter sweep") {
    const auto mag = pregnancy_mag(30);
    const auto cent = compute_aspect_centralities(mag);
    const auto base = compute_relevance(mag, {});
    const std::vector<Node> sample(base.nodes.begin(), base.nodes.begin() + 3);
    SweepGrid grid = SweepGrid::from_json({{"w1", {0.0, 1.0}}, {"w2", {0.5}}, {"alpha", {0.0, 0.5, 0.85}}});
    const auto t = parameter_sweep(mag, cent, grid, sample);
    REQUIRE(t.points.size() == 6);
    CHECK(t.points[0].w1 == 0.0);
    CHECK(t.points[0].alpha == 0.0);
    CHECK(t.points[2].alpha == 0.85);
    CHECK(t.points[5].w1 == 1.0);
    // default point reproduces compute_relevance
    const auto& mid = t.points[2];
    RelevanceParams p;
    p.w1 = 0;
    p.alpha_final = 0.85;
    const auto direct = compute_relevance(mag, p).as_map();
    for (std::size_t k = 0; k < sample.size(); ++k) CHECK(mid.relevance[k] == doctest::Approx(direct.at(sample[k])));
    CHECK(t.to_json()["points"].size() == 6);
    grid.alpha = {1.2};
    CHECK_THROWS_AS(parameter_sweep(mag, cent, grid, sample), std::invalid_argument);
    grid.alpha.clear();
    CHECK_THROWS_AS(parameter_sweep(mag, cent, grid, sample), std::invalid_argument);
}
