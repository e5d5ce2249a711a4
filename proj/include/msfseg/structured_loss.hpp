#pragma once

#include <span>
#include <vector>

#include "msfseg/grow.hpp"

namespace msfseg {

/// Root-edge analysis of a free growth record against a ground-truth
/// constrained one. rho/rho_star/dist_* are dense per-node arrays valued -1
/// outside incorrect_nodes.
struct ErrorAnalysis {
    EdgeId num_edges = 0;
    std::vector<NodeId> incorrect_nodes;  // ascending
    std::vector<EdgeId> rho;              // missing-cut root on the free path
    std::vector<EdgeId> rho_star;         // false-cut root on the constrained path
    std::vector<int> dist_rho;            // edges between the node and its root edge
    std::vector<int> dist_rho_star;
    std::vector<EdgeId> e_up;             // root edges whose altitude must rise
    std::vector<EdgeId> e_down;           // root edges whose altitude must fall
    int dropped_nodes = 0;                // nodes discarded under DropUnrooted
};

/// Nodes where the constrained path-max strictly exceeds the free one.
/// Exact float comparison: for correct nodes both sides come from the same
/// evaluated altitudes, so equality holds bit-for-bit.
std::vector<NodeId> find_incorrect_nodes(const GrowthRecord& free_rec,
                                         const GrowthRecord& constrained_rec);

/// With a dynamic provider the two runs evaluate different altitudes once
/// they diverge, so a node can land in the incorrect set although its free
/// path never crosses a ground-truth cut (no root edge exists for it).
/// Strict treats that as an internal consistency error; DropUnrooted
/// discards the node and counts it.
enum class RootEdgePolicy { Strict, DropUnrooted };

/// For each incorrect node, the first ground-truth-crossing edge along its
/// free path (rho, walking seed -> node) and the first edge along its
/// constrained path absent from the free forest (rho_star). The constrained
/// record's forbidden set is taken as the ground-truth cut set.
ErrorAnalysis find_root_edges(const GrowthRecord& free_rec, const GrowthRecord& constrained_rec,
                              std::span<const NodeId> incorrect,
                              RootEdgePolicy policy = RootEdgePolicy::Strict);

/// R(e): +(child count) on e_down, -(child count) on e_up, 0 elsewhere.
std::vector<double> weights_binary(const ErrorAnalysis& analysis);

/// Each child contributes +-gamma^dist instead of +-1 (0^0 := 1, so a child
/// adjacent to its root edge always contributes fully). gamma = 1 reproduces
/// weights_binary exactly.
std::vector<double> weights_discounted(const ErrorAnalysis& analysis, double gamma);

/// Sum over edges of R(e) * f(e), reading positive-weight edges from the
/// constrained record's evaluated altitudes and negative-weight edges from
/// the free record's (each root edge is scored in the run that produced it).
double structured_loss(std::span<const double> weights, const GrowthRecord& free_rec,
                       const GrowthRecord& constrained_rec);

/// Sum over nodes of (constrained path_max - free path_max). Correct nodes
/// contribute zero; nodes unassigned in both records are skipped.
double perceptron_loss(const GrowthRecord& free_rec, const GrowthRecord& constrained_rec);

}  // namespace msfseg
