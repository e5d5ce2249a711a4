#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "msfseg/models.hpp"
#include "msfseg/structured_loss.hpp"
#include "msfseg/synthdata.hpp"
#include "testutil.hpp"

using namespace msfseg;
namespace fs = std::filesystem;

namespace {

Image random_image(const GridGraph& g, int channels, std::uint64_t seed) {
    Image img(g, channels);
    std::mt19937_64 gen(seed);
    for (auto& v : img.data) v = test::uniform01(gen);
    return img;
}

// Free + ground-truth-constrained records for a random instance under the
// given model, plus the binary weights of the resulting analysis.
struct Replayable {
    Image image{GridGraph(1, 1), 1};
    GrowthRecord free_rec;
    GrowthRecord constrained_rec;
    std::vector<double> weights;
};

Replayable make_replayable(const ModelParams& params, int h, int w, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    for (int attempt = 0; attempt < 50; ++attempt) {
        const auto inst = test::random_instance(h, w, 2, gen);
        Image img = random_image(inst.graph, params.input_channels, gen());
        const StaticModelProvider sp(params);
        const DynamicModelProvider dp(params);
        const AltitudeProvider& provider =
            params.arch == ModelArch::Dynamic ? static_cast<const AltitudeProvider&>(dp)
                                              : static_cast<const AltitudeProvider&>(sp);
        GrowthRecord free_rec = grow(inst.graph, img, inst.seeds, provider);
        GrowthRecord constrained_rec =
            grow(inst.graph, img, inst.seeds, provider, cut_set(inst.gt));
        const auto incorrect = find_incorrect_nodes(free_rec, constrained_rec);
        const ErrorAnalysis a = find_root_edges(free_rec, constrained_rec, incorrect,
                                                RootEdgePolicy::DropUnrooted);
        if (a.incorrect_nodes.empty()) continue;
        return {std::move(img), std::move(free_rec), std::move(constrained_rec),
                weights_binary(a)};
    }
    throw std::runtime_error("make_replayable: no errorful instance found");
}

}  // namespace

TEST_CASE("relative projection is a label-independent one-hot coding") {
    const GridGraph g(1, 4);
    const std::vector<Label> assignment = {2, 0, 5, 2};
    const Image p = project_relative(g, assignment, 2);
    CHECK(p.at(0, 0) == 1.0);  // me
    CHECK(p.at(1, 1) == 1.0);  // nobody
    CHECK(p.at(2, 2) == 1.0);  // them
    CHECK(p.at(3, 0) == 1.0);
    for (NodeId n = 0; n < 4; ++n)
        CHECK(p.at(n, 0) + p.at(n, 1) + p.at(n, 2) == 1.0);

    // Swapping non-reference labels changes nothing.
    const std::vector<Label> renamed = {2, 0, 7, 2};
    CHECK(project_relative(g, renamed, 2).data == p.data);
    CHECK_THROWS_AS(project_relative(g, assignment, 0), std::invalid_argument);
}

TEST_CASE("extract_patch basics and reflect padding") {
    const GridGraph g(3, 3);
    Image ramp(g, 1);
    for (NodeId n = 0; n < 9; ++n) ramp.data[n] = n;
    CHECK(extract_patch(ramp, 4, 0) == std::vector<double>{4});
    CHECK(extract_patch(ramp, 4, 1) == std::vector<double>{0, 1, 2, 3, 4, 5, 6, 7, 8});

    // Corner patch reflects symmetrically: row -1 -> 0, col -1 -> 0.
    const auto corner = extract_patch(ramp, 0, 1);
    CHECK(corner == std::vector<double>{0, 0, 1, 0, 0, 1, 3, 3, 4});

    Image constant(g, 2);
    for (auto& v : constant.data) v = 2.5;
    for (double v : extract_patch(constant, 8, 2)) CHECK(v == 2.5);
}

TEST_CASE("predict_g with zero parameters returns one half everywhere") {
    const GridGraph g(4, 4);
    const Image img = random_image(g, 1, 5);
    ModelParams p = make_g_params(1, 2, 8, 3);
    std::fill(p.theta.begin(), p.theta.end(), 0.0);
    for (NodeId n = 0; n < g.num_nodes(); ++n) CHECK(predict_g(p, img, n) == 0.5);
    CHECK_THROWS_AS(predict_g(p, random_image(g, 2, 6), 0), std::invalid_argument);
    CHECK_THROWS_AS(predict_static(p, img, 0, 0, 1), std::invalid_argument);
}

TEST_CASE("train_g learns a separable toy and is deterministic") {
    // The image IS the boundary indicator, so the center pixel separates
    // the classes perfectly.
    std::vector<std::pair<Image, Segmentation>> corpus;
    std::mt19937_64 gen(9);
    for (int i = 0; i < 3; ++i) {
        const GridGraph g(8, 8);
        const auto inst = test::random_instance(8, 8, 2, gen);
        const auto mask = boundary_mask(inst.gt);
        Image img(g, 1);
        for (NodeId n = 0; n < g.num_nodes(); ++n) img.data[n] = mask[n] ? 1.0 : 0.0;
        corpus.emplace_back(std::move(img), inst.gt);
    }

    GTrainConfig cfg;
    cfg.patch_radius = 1;
    cfg.hidden_width = 8;
    cfg.steps = 400;
    cfg.learning_rate = 0.2;
    cfg.rng_seed = 4;
    const GTrainResult result = train_g(corpus, cfg);
    for (double l : result.loss_trace) CHECK(std::isfinite(l));
    const double tail = result.loss_trace.back();
    CHECK(tail < std::log(2.0));  // beats the constant-0.5 predictor

    // Held-out accuracy on fresh separable instances.
    int correct = 0, total = 0;
    for (int i = 0; i < 2; ++i) {
        const auto inst = test::random_instance(8, 8, 2, gen);
        const auto mask = boundary_mask(inst.gt);
        Image img(inst.graph, 1);
        for (NodeId n = 0; n < inst.graph.num_nodes(); ++n)
            img.data[n] = mask[n] ? 1.0 : 0.0;
        for (NodeId n = 0; n < inst.graph.num_nodes(); ++n) {
            const bool hit = (predict_g(result.params, img, n) > 0.5) == mask[n];
            correct += hit ? 1 : 0;
            ++total;
        }
    }
    CHECK(correct >= total * 9 / 10);

    const GTrainResult again = train_g(corpus, cfg);
    CHECK(again.params.theta == result.params.theta);
    CHECK_THROWS_AS(train_g({}, cfg), std::invalid_argument);
}

TEST_CASE("augment appends the boundary probability channel") {
    const GridGraph g(6, 6);
    const Image img = random_image(g, 1, 12);
    const ModelParams gp = make_g_params(1, 1, 4, 2);
    const Image aug = augment(img, gp);
    CHECK(aug.channels == 2);
    for (NodeId n = 0; n < g.num_nodes(); ++n) {
        CHECK(aug.at(n, 0) == img.at(n, 0));  // bit-identical passthrough
        CHECK(aug.at(n, 1) > 0.0);
        CHECK(aug.at(n, 1) < 1.0);
    }
    CHECK_THROWS_AS(augment(random_image(g, 3, 1), gp), std::invalid_argument);
}

TEST_CASE("predict_static is a pure function of patch and direction") {
    const GridGraph g(5, 5);
    const Image img = random_image(g, 2, 31);
    ModelParams p = make_static_params(2, 1, 8, 7);

    ModelParams zero = p;
    std::fill(zero.theta.begin(), zero.theta.end(), 0.0);
    CHECK(predict_static(zero, img, g.edge_between(0, 1), 0, 1) == 0.0);

    Image constant(g, 2);
    for (auto& v : constant.data) v = 0.75;
    // Both edges run rightward over identical patches deep in the interior.
    const double a = predict_static(p, constant, g.edge_between(11, 12), 11, 12);
    const double b = predict_static(p, constant, g.edge_between(12, 13), 12, 13);
    CHECK(a == b);
    const double c = predict_static(p, constant, g.edge_between(12, 11), 12, 11);
    CHECK(a != c);  // opposite direction code
}

TEST_CASE("predict_dynamic contracts") {
    const GridGraph g(4, 4);
    const Image img = random_image(g, 2, 41);
    ModelParams p = make_dynamic_params(2, 1, 8, 4, 11);
    std::vector<Label> assignment(g.num_nodes(), 0);
    assignment[0] = 1;
    std::vector<double> h_u(4, 0.0), h_v(4, 0.0);

    ModelParams zero = p;
    std::fill(zero.theta.begin(), zero.theta.end(), 0.0);
    CHECK(predict_dynamic(zero, img, g.edge_between(0, 1), 0, 1, assignment, h_u, h_v) == 0.0);
    for (double h : h_v) CHECK(h == 0.0);

    // Relabeling a "them" region leaves the output unchanged.
    std::vector<Label> with_them = assignment;
    with_them[5] = 3;
    std::vector<double> h_v1(4), h_v2(4);
    const double alt1 =
        predict_dynamic(p, img, g.edge_between(0, 1), 0, 1, with_them, h_u, h_v1);
    with_them[5] = 9;
    const double alt2 =
        predict_dynamic(p, img, g.edge_between(0, 1), 0, 1, with_them, h_u, h_v2);
    CHECK(alt1 == alt2);
    CHECK(h_v1 == h_v2);

    // Hidden components stay inside (-1,1) along arbitrary chains.
    std::vector<double> h = h_u;
    std::vector<double> h_next(4);
    std::vector<Label> live(g.num_nodes(), 0);
    live[0] = 1;
    NodeId u = 0;
    for (NodeId v = 1; v < g.num_nodes(); ++v) {
        if (g.row_of(v) != g.row_of(u) && g.col_of(v) != g.col_of(u)) continue;
        if (std::abs(g.row_of(v) - g.row_of(u)) + std::abs(g.col_of(v) - g.col_of(u)) != 1)
            continue;
        predict_dynamic(p, img, g.edge_between(u, v), u, v, live, h, h_next);
        live[v] = 1;
        h = h_next;
        u = v;
        for (double x : h) CHECK(std::abs(x) < 1.0);
    }

    std::vector<double> short_h(2);
    CHECK_THROWS_AS(predict_dynamic(p, img, 0, 0, 1, assignment, short_h, h_v),
                    std::invalid_argument);
    std::vector<Label> unassigned(g.num_nodes(), 0);
    CHECK_THROWS_AS(predict_dynamic(p, img, 0, 0, 1, unassigned, h_u, h_v), std::logic_error);
}

TEST_CASE("dynamic replay reproduces recorded altitudes exactly") {
    const ModelParams p = make_dynamic_params(1, 1, 8, 4, 23);
    const Replayable r = make_replayable(p, 6, 6, 100);
    for (const GrowthRecord* rec : {&r.free_rec, &r.constrained_rec}) {
        for (NodeId n = 0; n < rec->graph.num_nodes(); ++n) {
            const EdgeId e = rec->parent_edge[n];
            if (e < 0) continue;
            CHECK(replay_altitude(p, *rec, r.image, e) == rec->evaluated_altitude[e]);
        }
    }
}

TEST_CASE("static replay matches the record too") {
    const ModelParams p = make_static_params(1, 1, 8, 29);
    const Replayable r = make_replayable(p, 6, 6, 200);
    for (NodeId n = 0; n < r.free_rec.graph.num_nodes(); ++n) {
        const EdgeId e = r.free_rec.parent_edge[n];
        if (e < 0) continue;
        CHECK(replay_altitude(p, r.free_rec, r.image, e) ==
              r.free_rec.evaluated_altitude[e]);
    }
}

TEST_CASE("grad_structured: zeros, linearity, finite difference agreement") {
    const ModelParams p = make_static_params(1, 1, 8, 3);
    const Replayable r = make_replayable(p, 6, 6, 300);

    const std::vector<double> zero_w(r.free_rec.graph.num_edges(), 0.0);
    const auto zero_grad = grad_structured(p, zero_w, r.free_rec, r.constrained_rec, r.image);
    for (double v : zero_grad) CHECK(v == 0.0);

    const auto g1 = grad_structured(p, r.weights, r.free_rec, r.constrained_rec, r.image);
    std::vector<double> scaled = r.weights;
    for (double& v : scaled) v *= 2.5;
    const auto g2 = grad_structured(p, scaled, r.free_rec, r.constrained_rec, r.image);
    for (std::size_t i = 0; i < g1.size(); ++i)
        CHECK(g2[i] == doctest::Approx(2.5 * g1[i]).epsilon(1e-12));

    const auto loss = [&](const ModelParams& q) {
        return replay_structured_loss(q, r.weights, r.free_rec, r.constrained_rec, r.image);
    };
    CHECK(finite_diff_check(p, loss, g1, 1e-5, 60, 17) < 1e-6);
}

TEST_CASE("a single scored edge reduces to the gradient of that edge") {
    const ModelParams p = make_static_params(1, 1, 8, 19);
    const Replayable r = make_replayable(p, 5, 5, 400);
    NodeId child = -1;
    for (NodeId n = 0; n < r.free_rec.graph.num_nodes(); ++n)
        if (r.free_rec.parent_edge[n] >= 0) child = n;
    REQUIRE(child >= 0);
    const EdgeId e = r.free_rec.parent_edge[child];
    std::vector<double> w(r.free_rec.graph.num_edges(), 0.0);
    w[e] = -1.0;
    const auto grad = grad_structured(p, w, r.free_rec, r.constrained_rec, r.image);
    const auto loss = [&](const ModelParams& q) {
        return -predict_static(q, r.image, e, r.free_rec.parent_node[child], child);
    };
    CHECK(finite_diff_check(p, loss, grad, 1e-5, 60, 23) < 1e-6);
}

TEST_CASE("dynamic gradients agree with finite differences through the chain") {
    const ModelParams p = make_dynamic_params(1, 1, 6, 4, 37);
    const Replayable r = make_replayable(p, 6, 6, 500);
    const auto grad = grad_structured(p, r.weights, r.free_rec, r.constrained_rec, r.image);
    const auto loss = [&](const ModelParams& q) {
        return replay_structured_loss(q, r.weights, r.free_rec, r.constrained_rec, r.image);
    };
    CHECK(finite_diff_check(p, loss, grad, 1e-5, 80, 31) < 1e-4);
}

TEST_CASE("epsilon sweep shows the characteristic U-shaped error curve") {
    const ModelParams p = make_dynamic_params(1, 1, 6, 4, 43);
    const Replayable r = make_replayable(p, 6, 6, 600);
    const auto grad = grad_structured(p, r.weights, r.free_rec, r.constrained_rec, r.image);
    const auto loss = [&](const ModelParams& q) {
        return replay_structured_loss(q, r.weights, r.free_rec, r.constrained_rec, r.image);
    };
    const double e3 = finite_diff_check(p, loss, grad, 1e-3, 50, 7);
    const double e4 = finite_diff_check(p, loss, grad, 1e-4, 50, 7);
    const double e5 = finite_diff_check(p, loss, grad, 1e-5, 50, 7);
    CHECK(std::isfinite(e3));
    CHECK(std::isfinite(e5));
    CHECK(e4 <= e3);  // truncation error dominates the wide step
    CHECK(e4 < 1e-4);
}

TEST_CASE("model files round trip to float32 precision") {
    const fs::path dir = fs::temp_directory_path() / "msfseg_model_test";
    fs::create_directories(dir);

    for (const ModelParams& p :
         {make_g_params(1, 2, 8, 5), make_static_params(2, 3, 16, 6),
          make_dynamic_params(2, 2, 8, 6, 7)}) {
        save_model(dir / "m.model", p);
        const ModelParams back = load_model(dir / "m.model");
        CHECK(back.arch == p.arch);
        CHECK(back.patch_radius == p.patch_radius);
        CHECK(back.hidden_width == p.hidden_width);
        CHECK(back.recurrent_size == p.recurrent_size);
        CHECK(back.input_channels == p.input_channels);
        REQUIRE(back.theta.size() == p.theta.size());
        for (std::size_t i = 0; i < p.theta.size(); ++i)
            CHECK(back.theta[i] == static_cast<double>(static_cast<float>(p.theta[i])));
    }

    std::ofstream bad(dir / "bad.model");
    bad << "nonsense\n";
    bad.close();
    CHECK_THROWS(load_model(dir / "bad.model"));
    fs::remove_all(dir);
}

TEST_CASE("parameter initialization is bounded per block and seeded") {
    const ModelParams a = make_dynamic_params(2, 3, 32, 16, 123);
    const ModelParams b = make_dynamic_params(2, 3, 32, 16, 123);
    const ModelParams c = make_dynamic_params(2, 3, 32, 16, 124);
    CHECK(a.theta == b.theta);
    CHECK(a.theta != c.theta);
    for (const ParamBlock& blk : a.layout) {
        const double bound = std::sqrt(6.0 / (blk.rows + blk.cols));
        for (std::ptrdiff_t i = 0; i < blk.size(); ++i)
            CHECK(std::abs(a.theta[blk.offset + i]) <= bound);
    }
}
