#include "msfseg/structured_loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace msfseg {

namespace {

void check_comparable(const GrowthRecord& a, const GrowthRecord& b) {
    if (!(a.graph == b.graph))
        throw std::invalid_argument("structured-loss: records are over different graphs");
    if (a.seeds.seeds.size() != b.seeds.seeds.size())
        throw std::invalid_argument("structured-loss: records have different seed sets");
    for (std::size_t i = 0; i < a.seeds.seeds.size(); ++i)
        if (a.seeds.seeds[i].node != b.seeds.seeds[i].node ||
            a.seeds.seeds[i].label != b.seeds.seeds[i].label)
            throw std::invalid_argument("structured-loss: records have different seed sets");
}

}  // namespace

std::vector<NodeId> find_incorrect_nodes(const GrowthRecord& free_rec,
                                         const GrowthRecord& constrained_rec) {
    check_comparable(free_rec, constrained_rec);
    std::vector<NodeId> incorrect;
    for (NodeId n = 0; n < free_rec.graph.num_nodes(); ++n) {
        if (!free_rec.assigned(n) || !constrained_rec.assigned(n)) {
            if (free_rec.assigned(n) != constrained_rec.assigned(n))
                throw std::invalid_argument(
                    "find_incorrect_nodes: records cover different node sets");
            continue;
        }
        if (constrained_rec.path_max[n] > free_rec.path_max[n]) incorrect.push_back(n);
    }
    return incorrect;
}

ErrorAnalysis find_root_edges(const GrowthRecord& free_rec, const GrowthRecord& constrained_rec,
                              std::span<const NodeId> incorrect, RootEdgePolicy policy) {
    check_comparable(free_rec, constrained_rec);
    const EdgeId n_edges = free_rec.graph.num_edges();
    const NodeId n_nodes = free_rec.graph.num_nodes();

    std::vector<char> crosses_gt(n_edges, 0);
    for (EdgeId e : constrained_rec.forbidden) crosses_gt[e] = 1;

    std::vector<char> in_free_forest(n_edges, 0);
    for (NodeId n = 0; n < n_nodes; ++n)
        if (free_rec.parent_edge[n] >= 0) in_free_forest[free_rec.parent_edge[n]] = 1;

    ErrorAnalysis out;
    out.num_edges = n_edges;
    out.rho.assign(n_nodes, -1);
    out.rho_star.assign(n_nodes, -1);
    out.dist_rho.assign(n_nodes, -1);
    out.dist_rho_star.assign(n_nodes, -1);

    for (NodeId w : incorrect) {
        const std::vector<EdgeId> phi = path_to_seed(free_rec, w);
        int rho_idx = -1;
        for (std::size_t i = 0; i < phi.size(); ++i) {
            if (crosses_gt[phi[i]]) {
                rho_idx = static_cast<int>(i);
                break;
            }
        }
        if (rho_idx < 0) {
            if (policy == RootEdgePolicy::Strict)
                throw std::logic_error(
                    "find_root_edges: incorrect node whose free path crosses no "
                    "ground-truth cut");
            ++out.dropped_nodes;
            continue;
        }

        const std::vector<EdgeId> psi = path_to_seed(constrained_rec, w);
        int rho_star_idx = -1;
        for (std::size_t i = 0; i < psi.size(); ++i) {
            if (!in_free_forest[psi[i]]) {
                rho_star_idx = static_cast<int>(i);
                break;
            }
        }
        if (rho_star_idx < 0) {
            if (policy == RootEdgePolicy::Strict)
                throw std::logic_error(
                    "find_root_edges: incorrect node whose constrained path never "
                    "leaves the free forest");
            ++out.dropped_nodes;
            continue;
        }

        out.incorrect_nodes.push_back(w);
        out.rho[w] = phi[rho_idx];
        out.dist_rho[w] = static_cast<int>(phi.size()) - 1 - rho_idx;
        out.rho_star[w] = psi[rho_star_idx];
        out.dist_rho_star[w] = static_cast<int>(psi.size()) - 1 - rho_star_idx;
    }

    out.e_up.reserve(out.incorrect_nodes.size());
    out.e_down.reserve(out.incorrect_nodes.size());
    for (NodeId w : out.incorrect_nodes) {
        out.e_up.push_back(out.rho[w]);
        out.e_down.push_back(out.rho_star[w]);
    }
    auto uniq = [](std::vector<EdgeId>& v) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    };
    uniq(out.e_up);
    uniq(out.e_down);
    return out;
}

std::vector<double> weights_binary(const ErrorAnalysis& analysis) {
    std::vector<double> weights(analysis.num_edges, 0.0);
    for (NodeId w : analysis.incorrect_nodes) {
        weights[analysis.rho_star[w]] += 1.0;
        weights[analysis.rho[w]] -= 1.0;
    }
    return weights;
}

std::vector<double> weights_discounted(const ErrorAnalysis& analysis, double gamma) {
    if (!(gamma >= 0.0 && gamma <= 1.0))
        throw std::invalid_argument("weights_discounted: gamma must lie in [0,1]");
    std::vector<double> weights(analysis.num_edges, 0.0);
    auto discount = [gamma](int d) { return d == 0 ? 1.0 : std::pow(gamma, d); };
    for (NodeId w : analysis.incorrect_nodes) {
        weights[analysis.rho_star[w]] += discount(analysis.dist_rho_star[w]);
        weights[analysis.rho[w]] -= discount(analysis.dist_rho[w]);
    }
    return weights;
}

double structured_loss(std::span<const double> weights, const GrowthRecord& free_rec,
                       const GrowthRecord& constrained_rec) {
    check_comparable(free_rec, constrained_rec);
    if (weights.size() != static_cast<std::size_t>(free_rec.graph.num_edges()))
        throw std::invalid_argument("structured_loss: weight count != |E|");
    double loss = 0.0;
    for (EdgeId e = 0; e < static_cast<EdgeId>(weights.size()); ++e) {
        const double w = weights[e];
        if (w == 0.0) continue;
        const GrowthRecord& rec = w > 0.0 ? constrained_rec : free_rec;
        if (!rec.evaluated(e))
            throw std::logic_error(
                "structured_loss: weighted edge was never evaluated in the required record");
        loss += w * rec.evaluated_altitude[e];
    }
    return loss;
}

double perceptron_loss(const GrowthRecord& free_rec, const GrowthRecord& constrained_rec) {
    check_comparable(free_rec, constrained_rec);
    double loss = 0.0;
    for (NodeId n = 0; n < free_rec.graph.num_nodes(); ++n) {
        if (!free_rec.assigned(n) || !constrained_rec.assigned(n)) {
            if (free_rec.assigned(n) != constrained_rec.assigned(n))
                throw std::invalid_argument("perceptron_loss: records cover different node sets");
            continue;
        }
        const double t_free = free_rec.path_max[n];
        const double t_constrained = constrained_rec.path_max[n];
        if (t_constrained == t_free) continue;  // seeds and correct nodes
        loss += t_constrained - t_free;
    }
    return loss;
}

}  // namespace msfseg
