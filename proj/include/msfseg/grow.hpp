#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "msfseg/grid.hpp"

namespace msfseg {

/// Altitude source for region growing. evaluate() scores the edge (u -> v)
/// where u is assigned and v is not; it must not mutate the assignment.
/// Providers with hidden_size() == r > 0 receive u's r-dimensional hidden
/// state and write v's prospective hidden state into hidden_v.
class AltitudeProvider {
public:
    virtual ~AltitudeProvider() = default;

    virtual int hidden_size() const { return 0; }

    virtual double evaluate(const Image& image, EdgeId e, NodeId u, NodeId v,
                            std::span<const Label> assignment,
                            std::span<const double> hidden_u,
                            std::span<double> hidden_v) const = 0;
};

/// Fixed per-edge altitudes; ignores the image and all dynamic state.
class StaticMapProvider final : public AltitudeProvider {
public:
    explicit StaticMapProvider(std::vector<double> altitudes)
        : altitudes_(std::move(altitudes)) {}

    double evaluate(const Image&, EdgeId e, NodeId, NodeId, std::span<const Label>,
                    std::span<const double>, std::span<double>) const override {
        return altitudes_[static_cast<std::size_t>(e)];
    }

    const std::vector<double>& altitudes() const { return altitudes_; }

private:
    std::vector<double> altitudes_;
};

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Full trace of one Prim run: per-node seed assignment, parent pointers,
/// path-max altitude (max-arc topographic distance), assignment order,
/// hidden states, and every altitude evaluated during the run.
struct GrowthRecord {
    GridGraph graph{1, 1};
    SeedSet seeds;
    int hidden_size = 0;

    std::vector<Label> assignment;          // 0 = unassigned
    std::vector<NodeId> parent_node;        // -1 at seeds / unassigned
    std::vector<EdgeId> parent_edge;        // -1 at seeds / unassigned
    std::vector<double> path_max;           // -inf at seeds
    std::vector<EdgeId> bottleneck_edge;    // edge realizing path_max; -1 at seeds
    std::vector<std::int64_t> order;        // assignment rank; seeds 0..n-1; -1 unassigned
    std::vector<double> hidden;             // |V| * hidden_size
    std::vector<double> evaluated_altitude; // |E|; NaN where never evaluated
    std::vector<char> edge_evaluated;       // |E|
    std::vector<EdgeId> forbidden;          // sorted; edges excluded from the frontier
    std::int64_t assigned_count = 0;

    bool assigned(NodeId n) const { return assignment[n] != 0; }
    bool is_seed(NodeId n) const { return assigned(n) && parent_node[n] < 0; }
    std::span<const double> hidden_of(NodeId n) const {
        return {hidden.data() + static_cast<std::size_t>(n) * hidden_size,
                static_cast<std::size_t>(hidden_size)};
    }
    bool evaluated(EdgeId e) const { return edge_evaluated[e] != 0; }
};

/// Seeded region growing by Prim's algorithm over the provider's altitudes.
/// Queue entries are keyed (altitude, insertion counter); earlier insertion
/// wins ties. Each frontier edge is evaluated exactly once, at the moment
/// its source node is assigned, and its altitude is frozen from then on
/// (stale entries are discarded on pop). Edges in `forbidden` never enter
/// the frontier; nodes only reachable across them stay unassigned.
GrowthRecord grow(const GridGraph& graph, const Image& image, const SeedSet& seeds,
                  const AltitudeProvider& provider,
                  std::span<const EdgeId> forbidden = {});

/// Per-node labels of a record; unassigned nodes keep label 0.
Segmentation segmentation_of(const GrowthRecord& record);

/// Parent-edge chain from a node to its seed, returned seed-first.
/// The max evaluated altitude over the returned edges equals path_max(node).
std::vector<EdgeId> path_to_seed(const GrowthRecord& record, NodeId node);

}  // namespace msfseg
