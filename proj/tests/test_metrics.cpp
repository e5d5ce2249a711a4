#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "msfseg/metrics.hpp"
#include "testutil.hpp"

using namespace msfseg;

namespace {

// Pair-enumeration oracle for the Rand error.
double arand_oracle(const Segmentation& pred, const Segmentation& gt,
                    const std::vector<bool>& include) {
    long long agree = 0, total = 0;
    for (std::size_t a = 0; a < pred.labels.size(); ++a) {
        if (!include[a]) continue;
        for (std::size_t b = a + 1; b < pred.labels.size(); ++b) {
            if (!include[b]) continue;
            const bool same_pred = pred.labels[a] == pred.labels[b];
            const bool same_gt = gt.labels[a] == gt.labels[b];
            agree += same_pred == same_gt ? 1 : 0;
            ++total;
        }
    }
    return 1.0 - static_cast<double>(agree) / static_cast<double>(total);
}

Segmentation random_seg(const GridGraph& g, int max_label, std::mt19937_64& gen) {
    Segmentation seg(g);
    for (auto& l : seg.labels) l = 1 + gen() % max_label;
    return seg;
}

}  // namespace

TEST_CASE("contingency counts the masked joint label table") {
    const GridGraph g(1, 4);
    const Segmentation pred(g, {1, 1, 1, 2});
    const Segmentation gt(g, {1, 1, 2, 2});
    const Contingency t = contingency(pred, gt, std::vector<bool>(4, true));
    CHECK(t.total == 4);
    CHECK(t.cells.at({1, 1}) == 2);
    CHECK(t.cells.at({1, 2}) == 1);
    CHECK(t.cells.at({2, 2}) == 1);
    CHECK(t.cells.size() == 3);
    long long sum = 0;
    for (const auto& [cell, n] : t.cells) sum += n;
    CHECK(sum == t.total);

    const Contingency diag = contingency(gt, gt, std::vector<bool>(4, true));
    for (const auto& [cell, n] : diag.cells) CHECK(cell.first == cell.second);
}

TEST_CASE("rand error on the 1x4 fixture matches pair enumeration") {
    const GridGraph g(1, 4);
    const Segmentation pred(g, {1, 1, 1, 2});
    const Segmentation gt(g, {1, 1, 2, 2});
    const double oracle = arand_oracle(pred, gt, std::vector<bool>(4, true));
    // Exhaustive enumeration: pairs (1,3), (2,3) and (3,4) disagree, 1-indexed.
    CHECK(oracle == doctest::Approx(3.0 / 6.0).epsilon(1e-15));
    CHECK(arand(pred, gt, 0.0) == doctest::Approx(oracle).epsilon(1e-12));
    CHECK(arand(gt, gt, 0.0) == 0.0);

    // Adapted variant: precision 1/3, recall 1/2, F = 2/5.
    CHECK(arand(pred, gt, 0.0, true) == doctest::Approx(1.0 - 0.4).epsilon(1e-12));
    CHECK(arand(gt, gt, 0.0, true) == 0.0);
}

TEST_CASE("metrics are invariant under label permutations") {
    std::mt19937_64 gen(41);
    for (int trial = 0; trial < 40; ++trial) {
        const GridGraph g(5, 5);
        const Segmentation pred = random_seg(g, 4, gen);
        const Segmentation gt = random_seg(g, 3, gen);
        Segmentation renamed = pred;
        const Label perm[5] = {0, 4, 2, 1, 3};
        for (auto& l : renamed.labels) l = perm[l];
        CHECK(arand(pred, gt, 0.0) == doctest::Approx(arand(renamed, gt, 0.0)).epsilon(1e-12));
        const auto [s1, m1] = voi(pred, gt, 0.0);
        const auto [s2, m2] = voi(renamed, gt, 0.0);
        CHECK(s1 == doctest::Approx(s2).epsilon(1e-12));
        CHECK(m1 == doctest::Approx(m2).epsilon(1e-12));
        CHECK(arand(pred, gt, 0.0) ==
              doctest::Approx(arand_oracle(pred, gt, std::vector<bool>(25, true)))
                  .epsilon(1e-12));
        // Reversing the arguments swaps split and merge.
        const auto [s3, m3] = voi(gt, pred, 0.0);
        CHECK(s3 == doctest::Approx(m1).epsilon(1e-12));
        CHECK(m3 == doctest::Approx(s1).epsilon(1e-12));
    }
}

TEST_CASE("voi fixtures") {
    const GridGraph g(1, 4);
    const Segmentation gt(g, {1, 1, 1, 1});
    const Segmentation halves(g, {1, 1, 2, 2});
    const auto [split, merge] = voi(halves, gt, 0.0);
    CHECK(split == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(merge == 0.0);
    const auto [s0, m0] = voi(gt, gt, 0.0);
    CHECK(s0 == 0.0);
    CHECK(m0 == 0.0);
}

TEST_CASE("tolerance masking excludes a band around the ground-truth boundary") {
    const GridGraph g(8, 8);
    Segmentation gt(g);
    for (NodeId n = 0; n < g.num_nodes(); ++n) gt.labels[n] = g.col_of(n) < 4 ? 1 : 2;

    const auto include0 = tolerance_mask(gt, 0.0);
    for (bool b : include0) CHECK(b);

    const auto include2 = tolerance_mask(gt, 2.0);
    for (NodeId n = 0; n < g.num_nodes(); ++n) {
        const int c = g.col_of(n);
        const double dist_to_boundary = std::min(std::abs(c - 3), std::abs(c - 4));
        CHECK(include2[n] == (dist_to_boundary > 2.0));
    }

    // Predictions that only differ inside the masked band score identically.
    Segmentation pred = gt;
    pred.labels[g.node_at(4, 4)] = 1;  // boundary-adjacent flip
    CHECK(arand(pred, gt, 2.0) == 0.0);
    CHECK(arand(pred, gt, 0.0) > 0.0);
    const ScoreReport r = score(pred, gt, 2.0);
    CHECK(r.scored_nodes == 8 * 2);  // columns 0 and 7 survive
    CHECK(r.arand == 0.0);
    CHECK(r.voi_split == 0.0);

    // Masking everything is an error.
    CHECK_THROWS_AS(arand(pred, gt, 100.0), std::invalid_argument);
    const Segmentation other(GridGraph(4, 4), std::vector<Label>(16, 1));
    CHECK_THROWS_AS(arand(other, gt, 0.0), std::invalid_argument);
}
