#pragma once

#include <span>

#include "msfseg/grid.hpp"

namespace msfseg {

/// Min over all simple paths m -> w of the maximum edge altitude on the
/// path; -inf for w == m (empty path), +inf if disconnected. Exhaustive
/// enumeration, guarded to |V| <= 12.
double topographic_distance_oracle(const GridGraph& graph, std::span<const double> altitudes,
                                   NodeId m, NodeId w);

/// Kruskal-style minimum spanning forest with seeds as fixed roots: edges
/// ascend, a union is skipped when it would merge two seeded components.
/// Returns the induced segmentation (unreached nodes keep label 0).
/// Guarded to |V| <= 256; validates grow() for static providers.
Segmentation msf_oracle(const GridGraph& graph, std::span<const double> altitudes,
                        const SeedSet& seeds);

}  // namespace msfseg
