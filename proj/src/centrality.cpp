#include "magpath/centrality.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <queue>

namespace magpath {

WeightedDigraph::WeightedDigraph(std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) add_node(std::to_string(i));
}

WeightedDigraph::WeightedDigraph(std::vector<std::string> labels) {
    for (auto& l : labels) add_node(std::move(l));
}

std::size_t WeightedDigraph::add_node(std::string label) {
    labels_.push_back(std::move(label));
    out_.emplace_back();
    out_degree_.push_back(0.0);
    return labels_.size() - 1;
}

void WeightedDigraph::add_edge(std::size_t src, std::size_t dst, double weight) {
    if (src >= size() || dst >= size()) throw std::out_of_range("edge endpoint out of range");
    if (weight < 0 || !std::isfinite(weight)) throw std::invalid_argument("edge weights must be finite and nonnegative");
    if (weight == 0) return;
    auto& row = out_[src];
    auto it = std::lower_bound(row.begin(), row.end(), dst, [](const auto& p, std::size_t d) { return p.first < d; });
    if (it != row.end() && it->first == dst)
        it->second += weight;
    else
        row.insert(it, {dst, weight});
    out_degree_[src] += weight;
}

std::vector<Arc> WeightedDigraph::arcs() const {
    std::vector<Arc> all;
    for (std::size_t s = 0; s < size(); ++s)
        for (const auto& [d, w] : out_[s]) all.push_back({s, d, w});
    return all;
}

double WeightedDigraph::weight(std::size_t src, std::size_t dst) const {
    const auto& row = out_.at(src);
    auto it = std::lower_bound(row.begin(), row.end(), dst, [](const auto& p, std::size_t d) { return p.first < d; });
    return it != row.end() && it->first == dst ? it->second : 0.0;
}

WeightedDigraph to_weighted_digraph(const AggregatedDigraph& g, bool drop_virtual) {
    WeightedDigraph out;
    std::vector<std::size_t> index(g.nodes.size(), std::numeric_limits<std::size_t>::max());
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        if (drop_virtual && is_virtual(g.nodes[i])) continue;
        index[i] = out.add_node(node_key(g.nodes[i]));
    }
    for (const auto& e : g.edges) {
        if (index[e.src] == std::numeric_limits<std::size_t>::max() ||
            index[e.dst] == std::numeric_limits<std::size_t>::max())
            continue;
        out.add_edge(index[e.src], index[e.dst], static_cast<double>(e.weight));
    }
    return out;
}

std::vector<double> pagerank(const WeightedDigraph& g, const PageRankOptions& o) {
    const std::size_t n = g.size();
    if (n == 0) return {};
    if (!(o.alpha >= 0 && o.alpha < 1)) throw std::invalid_argument("alpha must lie in [0, 1)");
    std::vector<double> beta = o.beta.empty() ? std::vector<double>(n, 1.0 / static_cast<double>(n)) : o.beta;
    if (beta.size() != n) throw std::invalid_argument("beta has " + std::to_string(beta.size()) + " entries for " +
                                                      std::to_string(n) + " nodes");
    for (double b : beta)
        if (b < 0 || !std::isfinite(b)) throw std::invalid_argument("beta must be finite and nonnegative");

    std::vector<double> c = beta;
    std::vector<double> next(n);
    double residual = std::numeric_limits<double>::infinity();
    for (std::size_t it = 0; it < o.max_iter; ++it) {
        next = beta;
        for (std::size_t j = 0; j < n; ++j) {
            const double k = g.out_degree(j);
            if (k <= 0) continue;
            const double share = o.alpha * c[j] / k;
            for (const auto& [i, w] : g.out(j)) next[i] += share * w;
        }
        residual = 0;
        for (std::size_t i = 0; i < n; ++i) residual = std::max(residual, std::abs(next[i] - c[i]));
        c.swap(next);
        if (residual <= o.tol) return c;
    }
    throw ConvergenceError("pagerank did not converge in " + std::to_string(o.max_iter) +
                               " iterations (residual " + std::to_string(residual) + ")",
                           residual);
}

namespace {

// BFS over out-arcs ignoring self-loops; fills hop distances (-1 unreachable).
void bfs(const WeightedDigraph& g, std::size_t s, std::vector<long>& dist, std::vector<double>& sigma,
         std::vector<std::size_t>& order) {
    const std::size_t n = g.size();
    dist.assign(n, -1);
    sigma.assign(n, 0.0);
    order.clear();
    std::queue<std::size_t> q;
    dist[s] = 0;
    sigma[s] = 1;
    q.push(s);
    while (!q.empty()) {
        const auto v = q.front();
        q.pop();
        order.push_back(v);
        for (const auto& [w, weight] : g.out(v)) {
            if (w == v) continue;
            if (dist[w] < 0) {
                dist[w] = dist[v] + 1;
                q.push(w);
            }
            if (dist[w] == dist[v] + 1) sigma[w] += sigma[v];
        }
    }
}

}  // namespace

std::vector<double> betweenness(const WeightedDigraph& g) {
    const std::size_t n = g.size();
    std::vector<double> cb(n, 0.0);
    std::vector<long> dist;
    std::vector<double> sigma, delta;
    std::vector<std::size_t> order;
    for (std::size_t s = 0; s < n; ++s) {
        bfs(g, s, dist, sigma, order);
        delta.assign(n, 0.0);
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            const auto v = *it;
            for (const auto& [w, weight] : g.out(v)) {
                if (w == v || dist[w] != dist[v] + 1) continue;
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            }
            if (v != s) cb[v] += delta[v];
        }
    }
    return cb;
}

std::vector<double> closeness_wf(const WeightedDigraph& g) {
    const std::size_t n = g.size();
    std::vector<double> cc(n, 0.0);
    if (n < 2) return cc;
    std::vector<long> dist;
    std::vector<double> sigma;
    std::vector<std::size_t> order;
    for (std::size_t s = 0; s < n; ++s) {
        bfs(g, s, dist, sigma, order);
        double reach = 0, total = 0;
        for (std::size_t v = 0; v < n; ++v) {
            if (v == s || dist[v] < 0) continue;
            reach += 1;
            total += static_cast<double>(dist[v]);
        }
        if (reach == 0) continue;
        cc[s] = (reach / static_cast<double>(n - 1)) * (reach / total);
    }
    return cc;
}

std::vector<double> minmax_normalize(const std::vector<double>& scores) {
    if (scores.empty()) throw std::invalid_argument("cannot normalize an empty score map");
    const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
    const double min = *lo, max = *hi;
    std::vector<double> out(scores.size(), 1.0);
    if (max == min) return out;
    for (std::size_t i = 0; i < scores.size(); ++i) out[i] = (scores[i] - min) / (max - min);
    return out;
}

void write_scores_csv(const WeightedDigraph& g, const std::vector<double>& raw, std::ostream& out) {
    if (raw.size() != g.size()) throw std::invalid_argument("score vector does not match the graph");
    const auto norm = raw.empty() ? raw : minmax_normalize(raw);
    char buf[64];
    out << "node,raw,normalized\n";
    for (std::size_t i = 0; i < g.size(); ++i) {
        std::string label = g.labels()[i];
        if (label.find_first_of(",\"\n") != std::string::npos) {
            std::string q = "\"";
            for (char ch : label) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
            label = q + "\"";
        }
        std::snprintf(buf, sizeof buf, ",%.17g,%.17g\n", raw[i], norm[i]);
        out << label << buf;
    }
}

}  // namespace magpath
