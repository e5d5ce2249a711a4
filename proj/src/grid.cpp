#include "msfseg/grid.hpp"

#include <algorithm>

namespace msfseg {

void SeedSet::validate(const GridGraph& g) const {
    if (seeds.empty()) throw std::invalid_argument("SeedSet: empty seed set");
    std::vector<Label> labels;
    std::vector<NodeId> nodes;
    for (const Seed& s : seeds) {
        if (s.node < 0 || s.node >= g.num_nodes())
            throw std::invalid_argument("SeedSet: seed node out of range");
        labels.push_back(s.label);
        nodes.push_back(s.node);
    }
    std::sort(labels.begin(), labels.end());
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] != static_cast<Label>(i + 1))
            throw std::invalid_argument("SeedSet: labels must be distinct and consecutive 1..n");
    std::sort(nodes.begin(), nodes.end());
    if (std::adjacent_find(nodes.begin(), nodes.end()) != nodes.end())
        throw std::invalid_argument("SeedSet: duplicate seed nodes");
}

std::vector<EdgeId> cut_set(const Segmentation& seg) {
    if (!seg.complete())
        throw std::logic_error("cut_set: segmentation has unassigned nodes");
    const GridGraph& g = seg.graph;
    std::vector<EdgeId> cuts;
    for (EdgeId e = 0; e < g.num_edges(); ++e) {
        const auto [u, v] = g.edge_endpoints(e);
        if (seg.labels[u] != seg.labels[v]) cuts.push_back(e);
    }
    return cuts;
}

std::vector<bool> boundary_mask(const Segmentation& seg) {
    if (!seg.complete())
        throw std::logic_error("boundary_mask: segmentation has unassigned nodes");
    const GridGraph& g = seg.graph;
    std::vector<bool> mask(g.num_nodes(), false);
    for (EdgeId e = 0; e < g.num_edges(); ++e) {
        const auto [u, v] = g.edge_endpoints(e);
        if (seg.labels[u] != seg.labels[v]) {
            mask[u] = true;
            mask[v] = true;
        }
    }
    return mask;
}

}  // namespace msfseg
