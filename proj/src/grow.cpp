#include "msfseg/grow.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

namespace msfseg {

namespace {

struct QueueEntry {
    double altitude;
    std::uint64_t counter;
    EdgeId edge;
    NodeId source;
    NodeId target;

    // Min-heap on (altitude, counter): std::push_heap builds a max-heap,
    // so the comparison is reversed.
    bool operator<(const QueueEntry& o) const {
        if (altitude != o.altitude) return altitude > o.altitude;
        return counter > o.counter;
    }
};

}  // namespace

GrowthRecord grow(const GridGraph& graph, const Image& image, const SeedSet& seeds,
                  const AltitudeProvider& provider, std::span<const EdgeId> forbidden) {
    seeds.validate(graph);
    if (!(image.graph == graph))
        throw std::invalid_argument("grow: image and graph dimensions differ");

    const NodeId n_nodes = graph.num_nodes();
    const EdgeId n_edges = graph.num_edges();
    const int r = provider.hidden_size();

    GrowthRecord rec;
    rec.graph = graph;
    rec.seeds = seeds;
    rec.hidden_size = r;
    rec.assignment.assign(n_nodes, 0);
    rec.parent_node.assign(n_nodes, -1);
    rec.parent_edge.assign(n_nodes, -1);
    rec.path_max.assign(n_nodes, kNegInf);
    rec.bottleneck_edge.assign(n_nodes, -1);
    rec.order.assign(n_nodes, -1);
    rec.hidden.assign(static_cast<std::size_t>(n_nodes) * r, 0.0);
    rec.evaluated_altitude.assign(n_edges, std::numeric_limits<double>::quiet_NaN());
    rec.edge_evaluated.assign(n_edges, 0);
    rec.forbidden.assign(forbidden.begin(), forbidden.end());
    std::sort(rec.forbidden.begin(), rec.forbidden.end());

    std::vector<char> is_forbidden(n_edges, 0);
    for (EdgeId e : forbidden) {
        if (e < 0 || e >= n_edges)
            throw std::invalid_argument("grow: forbidden edge id out of range");
        is_forbidden[e] = 1;
    }

    std::vector<QueueEntry> heap;
    heap.reserve(n_edges);
    // Hidden-state candidates computed at push time, keyed by counter.
    std::vector<double> pending_hidden;
    std::uint64_t counter = 0;

    std::vector<double> hidden_buf(r, 0.0);

    auto push_frontier = [&](NodeId u) {
        const auto inc = graph.incident_edges(u);
        for (const auto& [e, v] : inc) {
            if (rec.assignment[v] != 0 || is_forbidden[e]) continue;
            const double alt = provider.evaluate(
                image, e, u, v, rec.assignment, rec.hidden_of(u),
                std::span<double>(hidden_buf.data(), static_cast<std::size_t>(r)));
            if (!std::isfinite(alt))
                throw numeric_error("grow: provider returned non-finite altitude");
            rec.evaluated_altitude[e] = alt;
            rec.edge_evaluated[e] = 1;
            heap.push_back({alt, counter, e, u, v});
            std::push_heap(heap.begin(), heap.end());
            pending_hidden.insert(pending_hidden.end(), hidden_buf.begin(), hidden_buf.end());
            ++counter;
        }
    };

    // All seeds are assigned before any frontier edge is evaluated, so the
    // first evaluations see the complete initial assignment.
    std::int64_t rank = 0;
    for (const auto& s : seeds.seeds) {
        rec.assignment[s.node] = s.label;
        rec.order[s.node] = rank++;
        ++rec.assigned_count;
    }
    for (const auto& s : seeds.seeds) push_frontier(s.node);

    while (!heap.empty()) {
        std::pop_heap(heap.begin(), heap.end());
        const QueueEntry top = heap.back();
        heap.pop_back();
        if (rec.assignment[top.target] != 0) continue;  // stale entry
#ifndef NDEBUG
        // Queue discipline: the accepted pop is minimal among live entries.
        for (const QueueEntry& q : heap) {
            if (rec.assignment[q.target] != 0) continue;
            assert(q.altitude > top.altitude ||
                   (q.altitude == top.altitude && q.counter > top.counter));
        }
#endif
        const NodeId v = top.target;
        const NodeId u = top.source;
        rec.assignment[v] = rec.assignment[u];
        rec.parent_node[v] = u;
        rec.parent_edge[v] = top.edge;
        if (top.altitude >= rec.path_max[u]) {
            rec.path_max[v] = top.altitude;
            rec.bottleneck_edge[v] = top.edge;  // ties pick the edge farthest from the seed
        } else {
            rec.path_max[v] = rec.path_max[u];
            rec.bottleneck_edge[v] = rec.bottleneck_edge[u];
        }
        rec.order[v] = rank++;
        ++rec.assigned_count;
        if (r > 0) {
            const double* src = pending_hidden.data() + top.counter * r;
            std::copy(src, src + r, rec.hidden.begin() + static_cast<std::size_t>(v) * r);
        }
        push_frontier(v);
    }

    return rec;
}

Segmentation segmentation_of(const GrowthRecord& record) {
    return Segmentation(record.graph, record.assignment);
}

std::vector<EdgeId> path_to_seed(const GrowthRecord& record, NodeId node) {
    if (node < 0 || node >= record.graph.num_nodes())
        throw std::out_of_range("path_to_seed: node id out of range");
    if (!record.assigned(node))
        throw std::logic_error("path_to_seed: node is unassigned");
    std::vector<EdgeId> path;
    NodeId cur = node;
    while (record.parent_node[cur] >= 0) {
        path.push_back(record.parent_edge[cur]);
        cur = record.parent_node[cur];
    }
    std::reverse(path.begin(), path.end());
    return path;
}

}  // namespace msfseg
