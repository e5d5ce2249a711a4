#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "msfseg/grow.hpp"
#include "msfseg/oracles.hpp"
#include "testutil.hpp"

using namespace msfseg;

namespace {

// Deterministic dynamic provider for plumbing tests: altitude mixes the
// image difference with the source hidden state, the new hidden state is a
// bounded function of both.
class ToyDynamicProvider final : public AltitudeProvider {
public:
    int hidden_size() const override { return 2; }
    double evaluate(const Image& image, EdgeId, NodeId u, NodeId v, std::span<const Label>,
                    std::span<const double> hidden_u, std::span<double> hidden_v) const override {
        const double d = image.at(v, 0) - image.at(u, 0);
        hidden_v[0] = std::tanh(hidden_u[0] + d);
        hidden_v[1] = std::tanh(hidden_u[1] - d);
        return std::abs(d) + 0.125 * hidden_u[0];
    }
};

class CountingProvider final : public AltitudeProvider {
public:
    explicit CountingProvider(std::vector<double> alt) : alt_(std::move(alt)) {}
    mutable std::vector<int> calls;
    double evaluate(const Image&, EdgeId e, NodeId, NodeId, std::span<const Label>,
                    std::span<const double>, std::span<double>) const override {
        if (calls.empty()) calls.assign(alt_.size(), 0);
        ++calls[e];
        return alt_[e];
    }

private:
    std::vector<double> alt_;
};

SeedSet seeds_of(std::initializer_list<std::pair<NodeId, Label>> list) {
    SeedSet s;
    for (const auto& [n, l] : list) s.seeds.push_back({n, l});
    return s;
}

}  // namespace

TEST_CASE("single seed floods everything") {
    const GridGraph g(1, 3);
    const Image img(g, 1);
    const StaticMapProvider provider({1.0, 1.0});
    const GrowthRecord rec = grow(g, img, seeds_of({{0, 1}}), provider);
    CHECK(rec.assignment == std::vector<Label>{1, 1, 1});
    CHECK(rec.path_max[2] == 1.0);
    CHECK(rec.path_max[0] == kNegInf);
    CHECK(rec.order[0] == 0);
    CHECK(rec.assigned_count == 3);
}

TEST_CASE("two seeds cut at the higher edge") {
    const GridGraph g(1, 3);
    const Image img(g, 1);
    const StaticMapProvider provider({0.2, 0.9});
    const GrowthRecord rec = grow(g, img, seeds_of({{0, 1}, {2, 2}}), provider);
    CHECK(rec.assignment == std::vector<Label>{1, 1, 2});
    CHECK(rec.parent_edge[1] == 0);
    CHECK(rec.path_max[1] == 0.2);
    CHECK(segmentation_of(rec).labels == std::vector<Label>{1, 1, 2});
}

TEST_CASE("forbidden edges exclude nodes from the frontier") {
    const GridGraph g(2, 2);
    const Image img(g, 1);
    const StaticMapProvider provider({0.1, 0.2, 0.3, 0.4});
    // Node 1 is incident only to edges (0,1) and (1,3); with both forbidden
    // it must stay unassigned.
    const std::vector<EdgeId> forbidden = {g.edge_between(0, 1), g.edge_between(1, 3)};
    const GrowthRecord rec = grow(g, img, seeds_of({{0, 1}, {3, 2}}), provider, forbidden);
    CHECK(rec.assignment[1] == 0);
    CHECK(rec.assignment[2] != 0);
    CHECK(rec.assigned_count == 3);
    for (NodeId n = 0; n < 4; ++n)
        if (rec.parent_edge[n] >= 0)
            for (EdgeId f : forbidden) CHECK(rec.parent_edge[n] != f);
    CHECK(segmentation_of(rec).labels[1] == 0);
}

TEST_CASE("grow argument errors") {
    const GridGraph g(1, 3);
    const Image img(g, 1);
    const StaticMapProvider provider({0.1, 0.2});
    CHECK_THROWS_AS(grow(g, img, SeedSet{}, provider), std::invalid_argument);
    SeedSet dup;
    dup.seeds = {{0, 1}, {2, 1}};
    CHECK_THROWS_AS(grow(g, img, dup, provider), std::invalid_argument);
    CHECK_THROWS_AS(grow(g, Image(GridGraph(2, 2), 1), seeds_of({{0, 1}}), provider),
                    std::invalid_argument);
}

TEST_CASE("path_to_seed reconstructs the parent chain") {
    const GridGraph g(1, 3);
    const Image img(g, 1);
    const StaticMapProvider provider({0.4, 0.6});
    const GrowthRecord rec = grow(g, img, seeds_of({{0, 1}}), provider);
    CHECK(path_to_seed(rec, 0).empty());
    CHECK(path_to_seed(rec, 2) == std::vector<EdgeId>{0, 1});

    const GrowthRecord constrained =
        grow(g, img, seeds_of({{0, 1}, {2, 2}}), provider, std::vector<EdgeId>{1});
    CHECK_NOTHROW(path_to_seed(constrained, 1));

    GrowthRecord with_gap = constrained;
    with_gap.assignment[1] = 0;
    CHECK_THROWS_AS(path_to_seed(with_gap, 1), std::logic_error);
}

TEST_CASE("path max equals the maximum altitude along the path") {
    std::mt19937_64 gen(21);
    for (int trial = 0; trial < 25; ++trial) {
        const GridGraph g(4, 5);
        const Image img(g, 1);
        const auto alt = test::random_distinct_altitudes(g.num_edges(), gen);
        const StaticMapProvider provider(alt);
        const SeedSet seeds = test::random_seeds(g, 1 + trial % 3, gen);
        const GrowthRecord rec = grow(g, img, seeds, provider);
        for (NodeId n = 0; n < g.num_nodes(); ++n) {
            const auto path = path_to_seed(rec, n);
            double m = kNegInf;
            for (EdgeId e : path) m = std::max(m, rec.evaluated_altitude[e]);
            CHECK(m == rec.path_max[n]);
            if (rec.bottleneck_edge[n] >= 0)
                CHECK(rec.evaluated_altitude[rec.bottleneck_edge[n]] == rec.path_max[n]);
        }
    }
}

TEST_CASE("topographic distance oracle") {
    const GridGraph g(1, 3);
    CHECK(topographic_distance_oracle(g, std::vector<double>{0.2, 0.7}, 0, 2) == 0.7);
    CHECK(topographic_distance_oracle(g, std::vector<double>{0.2, 0.7}, 1, 1) == kNegInf);

    const GridGraph g2(2, 2);
    // Edges: 0=(0,1) 1=(2,3) 2=(0,2) 3=(1,3); the detour 0-2-3-1 wins.
    const std::vector<double> alt = {0.9, 0.1, 0.1, 0.1};
    CHECK(topographic_distance_oracle(g2, alt, 0, 1) == doctest::Approx(0.1).epsilon(1e-15));

    CHECK_THROWS_AS(topographic_distance_oracle(GridGraph(4, 4), std::vector<double>(24, 0.0),
                                                0, 1),
                    std::invalid_argument);
}

TEST_CASE("closest-seed property against the oracle") {
    std::mt19937_64 gen(33);
    for (int trial = 0; trial < 40; ++trial) {
        const GridGraph g(3, 4);
        const Image img(g, 1);
        const auto alt = test::random_distinct_altitudes(g.num_edges(), gen);
        const SeedSet seeds = test::random_seeds(g, 1 + trial % 3, gen);
        const GrowthRecord rec = grow(g, img, seeds, StaticMapProvider(alt));
        for (NodeId w = 0; w < g.num_nodes(); ++w) {
            double best = std::numeric_limits<double>::infinity();
            double assigned_dist = 0.0;
            for (const auto& s : seeds.seeds) {
                const double t = topographic_distance_oracle(g, alt, s.node, w);
                best = std::min(best, t);
                if (s.label == rec.assignment[w]) assigned_dist = t;
            }
            CHECK(rec.path_max[w] == best);
            CHECK(assigned_dist == best);
        }
    }
}

TEST_CASE("MSF equivalence on random instances") {
    std::mt19937_64 gen(55);
    for (int trial = 0; trial < 60; ++trial) {
        const int h = 1 + static_cast<int>(gen() % 8);
        const int w = 1 + static_cast<int>(gen() % 8);
        const GridGraph g(h, w);
        if (g.num_nodes() < 2 || g.num_edges() < 1) continue;
        const Image img(g, 1);
        const auto alt = test::random_distinct_altitudes(g.num_edges(), gen);
        const int n_seeds = 1 + static_cast<int>(gen() % std::min<NodeId>(3, g.num_nodes()));
        const SeedSet seeds = test::random_seeds(g, n_seeds, gen);
        const Segmentation via_prim = segmentation_of(grow(g, img, seeds, StaticMapProvider(alt)));
        const Segmentation via_kruskal = msf_oracle(g, alt, seeds);
        CHECK(via_prim.labels == via_kruskal.labels);
    }
    CHECK_THROWS_AS(msf_oracle(GridGraph(17, 17), std::vector<double>(544, 0.0),
                               seeds_of({{0, 1}})),
                    std::invalid_argument);
}

TEST_CASE("each frontier edge is evaluated exactly once") {
    std::mt19937_64 gen(77);
    const GridGraph g(5, 5);
    const Image img(g, 1);
    const auto alt = test::random_distinct_altitudes(g.num_edges(), gen);
    const CountingProvider provider(alt);
    const GrowthRecord rec = grow(g, img, test::random_seeds(g, 2, gen), provider);
    for (EdgeId e = 0; e < g.num_edges(); ++e) {
        CHECK(provider.calls[e] <= 1);
        CHECK((provider.calls[e] == 1) == rec.evaluated(e));
        if (rec.evaluated(e)) CHECK(rec.evaluated_altitude[e] == alt[e]);
    }
    for (NodeId n = 0; n < g.num_nodes(); ++n)
        if (rec.parent_edge[n] >= 0) CHECK(rec.evaluated(rec.parent_edge[n]));
}

TEST_CASE("growth is deterministic, including hidden state propagation") {
    const GridGraph g(4, 4);
    Image img(g, 1);
    std::mt19937_64 gen(99);
    for (auto& v : img.data) v = test::uniform01(gen);
    const ToyDynamicProvider provider;
    const SeedSet seeds = seeds_of({{0, 1}, {15, 2}});
    const GrowthRecord a = grow(g, img, seeds, provider);
    const GrowthRecord b = grow(g, img, seeds, provider);
    CHECK(a.assignment == b.assignment);
    CHECK(a.parent_edge == b.parent_edge);
    CHECK(a.order == b.order);
    CHECK(a.path_max == b.path_max);
    CHECK(a.hidden == b.hidden);
    CHECK(a.evaluated_altitude == b.evaluated_altitude);
    CHECK(a.hidden_size == 2);
    // Seeds carry the zero hidden state; everyone else was written on accept.
    CHECK(a.hidden_of(0)[0] == 0.0);
    CHECK(a.hidden_of(15)[1] == 0.0);
}
