#include "msfseg/oracles.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

#include "msfseg/grow.hpp"

namespace msfseg {

namespace {

void enumerate_paths(const GridGraph& g, std::span<const double> altitudes, NodeId cur,
                     NodeId target, std::vector<char>& visited, double running_max,
                     double& best) {
    if (cur == target) {
        best = std::min(best, running_max);
        return;
    }
    for (const auto& [e, nb] : g.incident_edges(cur)) {
        if (visited[nb]) continue;
        visited[nb] = 1;
        enumerate_paths(g, altitudes, nb, target, visited,
                        std::max(running_max, altitudes[e]), best);
        visited[nb] = 0;
    }
}

struct UnionFind {
    std::vector<NodeId> parent;
    explicit UnionFind(NodeId n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    NodeId find(NodeId x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    void unite(NodeId a, NodeId b) { parent[find(a)] = find(b); }
};

}  // namespace

double topographic_distance_oracle(const GridGraph& graph, std::span<const double> altitudes,
                                   NodeId m, NodeId w) {
    if (graph.num_nodes() > 12)
        throw std::invalid_argument("topographic_distance_oracle: guard |V| <= 12 exceeded");
    if (altitudes.size() != static_cast<std::size_t>(graph.num_edges()))
        throw std::invalid_argument("topographic_distance_oracle: altitude count != |E|");
    if (m < 0 || m >= graph.num_nodes() || w < 0 || w >= graph.num_nodes())
        throw std::out_of_range("topographic_distance_oracle: node out of range");
    if (m == w) return kNegInf;
    double best = std::numeric_limits<double>::infinity();
    std::vector<char> visited(graph.num_nodes(), 0);
    visited[m] = 1;
    enumerate_paths(graph, altitudes, m, w, visited, kNegInf, best);
    return best;
}

Segmentation msf_oracle(const GridGraph& graph, std::span<const double> altitudes,
                        const SeedSet& seeds) {
    if (graph.num_nodes() > 256)
        throw std::invalid_argument("msf_oracle: guard |V| <= 256 exceeded");
    if (altitudes.size() != static_cast<std::size_t>(graph.num_edges()))
        throw std::invalid_argument("msf_oracle: altitude count != |E|");
    seeds.validate(graph);

    std::vector<EdgeId> edges(graph.num_edges());
    std::iota(edges.begin(), edges.end(), 0);
    std::stable_sort(edges.begin(), edges.end(),
                     [&](EdgeId a, EdgeId b) { return altitudes[a] < altitudes[b]; });

    UnionFind uf(graph.num_nodes());
    std::vector<Label> comp_seed(graph.num_nodes(), 0);  // seed label of a root, 0 = unseeded
    for (const auto& s : seeds.seeds) comp_seed[s.node] = s.label;

    for (EdgeId e : edges) {
        const auto [u, v] = graph.edge_endpoints(e);
        const NodeId ru = uf.find(u), rv = uf.find(v);
        if (ru == rv) continue;
        if (comp_seed[ru] != 0 && comp_seed[rv] != 0) continue;  // would merge two seeded trees
        const Label label = comp_seed[ru] != 0 ? comp_seed[ru] : comp_seed[rv];
        uf.unite(ru, rv);
        comp_seed[uf.find(ru)] = label;
    }

    Segmentation seg(graph);
    for (NodeId n = 0; n < graph.num_nodes(); ++n) seg.labels[n] = comp_seed[uf.find(n)];
    return seg;
}

}  // namespace msfseg
