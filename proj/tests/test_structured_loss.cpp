#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "msfseg/structured_loss.hpp"
#include "testutil.hpp"

using namespace msfseg;

namespace {

struct WorkedExample {
    GrowthRecord free_rec;
    GrowthRecord constrained_rec;
};

// 1x3 grid, seeds at nodes 0 and 2, ground-truth cut at edge (1,2),
// altitudes f(e01) = 0.9, f(e12) = 0.1. The free run leaks node 1 to seed 2.
WorkedExample worked_1x3() {
    const GridGraph g(1, 3);
    const Image img(g, 1);
    SeedSet seeds;
    seeds.seeds = {{0, 1}, {2, 2}};
    const StaticMapProvider provider({0.9, 0.1});
    WorkedExample ex;
    ex.free_rec = grow(g, img, seeds, provider);
    ex.constrained_rec = grow(g, img, seeds, provider, std::vector<EdgeId>{1});
    return ex;
}

}  // namespace

TEST_CASE("worked 1x3 example end to end") {
    const WorkedExample ex = worked_1x3();
    CHECK(ex.free_rec.assignment == std::vector<Label>{1, 2, 2});
    CHECK(ex.constrained_rec.assignment == std::vector<Label>{1, 1, 2});

    const auto incorrect = find_incorrect_nodes(ex.free_rec, ex.constrained_rec);
    CHECK(incorrect == std::vector<NodeId>{1});

    const ErrorAnalysis a = find_root_edges(ex.free_rec, ex.constrained_rec, incorrect);
    CHECK(a.rho[1] == 1);       // the missed ground-truth cut
    CHECK(a.rho_star[1] == 0);  // the false cut on the admissible path
    CHECK(a.dist_rho[1] == 0);
    CHECK(a.dist_rho_star[1] == 0);
    CHECK(a.e_up == std::vector<EdgeId>{1});
    CHECK(a.e_down == std::vector<EdgeId>{0});

    const auto weights = weights_binary(a);
    CHECK(weights[0] == 1.0);
    CHECK(weights[1] == -1.0);

    CHECK(structured_loss(weights, ex.free_rec, ex.constrained_rec) ==
          doctest::Approx(0.8).epsilon(1e-15));
    CHECK(perceptron_loss(ex.free_rec, ex.constrained_rec) ==
          doctest::Approx(0.8).epsilon(1e-15));
}

TEST_CASE("identical records have no incorrect nodes") {
    const GridGraph g(1, 3);
    const Image img(g, 1);
    SeedSet seeds;
    seeds.seeds = {{0, 1}, {2, 2}};
    // Prediction already respects the ground-truth cut at edge 1.
    const StaticMapProvider provider({0.1, 0.9});
    const GrowthRecord free_rec = grow(g, img, seeds, provider);
    const GrowthRecord constrained_rec = grow(g, img, seeds, provider, std::vector<EdgeId>{1});
    CHECK(free_rec.assignment == constrained_rec.assignment);
    CHECK(find_incorrect_nodes(free_rec, constrained_rec).empty());
    const ErrorAnalysis a = find_root_edges(free_rec, constrained_rec, {});
    CHECK(weights_binary(a) == std::vector<double>(g.num_edges(), 0.0));
    CHECK(structured_loss(weights_binary(a), free_rec, constrained_rec) == 0.0);
    CHECK(perceptron_loss(free_rec, constrained_rec) == 0.0);
}

TEST_CASE("a leak shares one root edge among all its children") {
    // 1x5 line, seed 1 at node 0, seed 2 at node 4; ground truth separates
    // node 0 from the rest but a low altitude on the cut lets region 1 leak
    // through and capture nodes 1..3 at tree distances 0,1,2.
    const GridGraph g(1, 5);
    const Image img(g, 1);
    SeedSet seeds;
    seeds.seeds = {{0, 1}, {4, 2}};
    const StaticMapProvider provider({0.05, 0.1, 0.2, 0.9});
    const GrowthRecord free_rec = grow(g, img, seeds, provider);
    CHECK(free_rec.assignment == std::vector<Label>{1, 1, 1, 1, 2});
    const GrowthRecord constrained_rec = grow(g, img, seeds, provider, std::vector<EdgeId>{0});

    const auto incorrect = find_incorrect_nodes(free_rec, constrained_rec);
    CHECK(incorrect == std::vector<NodeId>{1, 2, 3});
    const ErrorAnalysis a = find_root_edges(free_rec, constrained_rec, incorrect);
    for (NodeId w : incorrect) CHECK(a.rho[w] == 0);
    CHECK(a.dist_rho[1] == 0);
    CHECK(a.dist_rho[2] == 1);
    CHECK(a.dist_rho[3] == 2);
    for (NodeId w : incorrect) CHECK(a.rho_star[w] == 3);
    CHECK(a.dist_rho_star[1] == 2);
    CHECK(a.dist_rho_star[3] == 0);

    const auto binary = weights_binary(a);
    CHECK(binary[0] == -3.0);
    CHECK(binary[3] == 3.0);

    const auto discounted = weights_discounted(a, 0.5);
    CHECK(discounted[0] == doctest::Approx(-1.75).epsilon(1e-15));
    CHECK(discounted[3] == doctest::Approx(1.75).epsilon(1e-15));

    const auto zero_gamma = weights_discounted(a, 0.0);
    CHECK(zero_gamma[0] == -1.0);  // only the distance-0 child counts
    CHECK(zero_gamma[3] == 1.0);
}

TEST_CASE("discounted weights reproduce binary weights at gamma = 1") {
    std::mt19937_64 gen(13);
    for (int trial = 0; trial < 30; ++trial) {
        const auto inst = test::random_instance(5, 5, 2 + trial % 2, gen);
        const StaticMapProvider provider(inst.altitudes);
        const GrowthRecord free_rec = grow(inst.graph, inst.image, inst.seeds, provider);
        const GrowthRecord constrained_rec =
            grow(inst.graph, inst.image, inst.seeds, provider, cut_set(inst.gt));
        const auto incorrect = find_incorrect_nodes(free_rec, constrained_rec);
        const ErrorAnalysis a = find_root_edges(free_rec, constrained_rec, incorrect);
        CHECK(weights_discounted(a, 1.0) == weights_binary(a));

        const auto w_low = weights_discounted(a, 0.3);
        const auto w_high = weights_discounted(a, 0.8);
        for (EdgeId e = 0; e < a.num_edges; ++e)
            CHECK(std::abs(w_low[e]) <= std::abs(w_high[e]) + 1e-15);
    }
    CHECK_THROWS_AS(weights_discounted(ErrorAnalysis{}, 1.5), std::invalid_argument);
    CHECK_THROWS_AS(weights_discounted(ErrorAnalysis{}, -0.1), std::invalid_argument);
}

TEST_CASE("structured loss bounds the perceptron loss on random instances") {
    std::mt19937_64 gen(17);
    int nonzero_cases = 0;
    for (int trial = 0; trial < 120; ++trial) {
        const auto inst = test::random_instance(4 + trial % 3, 5, 2 + trial % 2, gen);
        const StaticMapProvider provider(inst.altitudes);
        const GrowthRecord free_rec = grow(inst.graph, inst.image, inst.seeds, provider);
        const GrowthRecord constrained_rec =
            grow(inst.graph, inst.image, inst.seeds, provider, cut_set(inst.gt));
        const auto incorrect = find_incorrect_nodes(free_rec, constrained_rec);
        const ErrorAnalysis a = find_root_edges(free_rec, constrained_rec, incorrect);
        const double l_structured =
            structured_loss(weights_binary(a), free_rec, constrained_rec);
        const double l_perceptron = perceptron_loss(free_rec, constrained_rec);
        CHECK(l_perceptron >= 0.0);
        CHECK(l_structured >= l_perceptron - 1e-12);
        const bool segs_equal = free_rec.assignment == constrained_rec.assignment;
        CHECK((l_structured == 0.0) == segs_equal);
        CHECK(incorrect.empty() == segs_equal);
        if (!incorrect.empty()) ++nonzero_cases;

        // Root edges force the path maxima and sit on the right side of the cut.
        std::vector<char> is_cut(inst.graph.num_edges(), 0);
        for (EdgeId e : constrained_rec.forbidden) is_cut[e] = 1;
        for (NodeId w : a.incorrect_nodes) {
            CHECK(free_rec.path_max[w] >= free_rec.evaluated_altitude[a.rho[w]]);
            CHECK(constrained_rec.path_max[w] >=
                  constrained_rec.evaluated_altitude[a.rho_star[w]]);
            CHECK(is_cut[a.rho[w]] == 1);
            CHECK(is_cut[a.rho_star[w]] == 0);
        }
    }
    CHECK(nonzero_cases > 10);  // the sweep actually exercised error cases
}

TEST_CASE("structured loss rejects weights on unevaluated edges") {
    const WorkedExample ex = worked_1x3();
    std::vector<double> weights(ex.free_rec.graph.num_edges(), 0.0);
    weights[1] = 1.0;  // positive weight reads the constrained record, where
                       // edge 1 is forbidden and never evaluated
    CHECK_THROWS_AS(structured_loss(weights, ex.free_rec, ex.constrained_rec),
                    std::logic_error);
}

TEST_CASE("mismatched records are rejected") {
    const WorkedExample ex = worked_1x3();
    const GridGraph g(1, 4);
    const Image img(g, 1);
    SeedSet seeds;
    seeds.seeds = {{0, 1}, {3, 2}};
    const GrowthRecord other = grow(g, img, seeds, StaticMapProvider({0.1, 0.2, 0.3}));
    CHECK_THROWS_AS(find_incorrect_nodes(ex.free_rec, other), std::invalid_argument);
    CHECK_THROWS_AS(perceptron_loss(ex.free_rec, other), std::invalid_argument);
}
