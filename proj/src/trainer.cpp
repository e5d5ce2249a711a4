#include "msfseg/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <numeric>
#include <random>
#include <stdexcept>
#include <thread>

#include "detail.hpp"

namespace msfseg {

namespace {

void check_instance(const TrainInstance& inst) {
    if (!(inst.image.graph == inst.gt.graph))
        throw std::invalid_argument("trainer: image/ground-truth dimension mismatch");
    if (!inst.gt.complete())
        throw std::invalid_argument("trainer: ground truth has unassigned nodes");
    inst.seeds.validate(inst.gt.graph);
    const Label regions = inst.gt.max_label();
    if (inst.seeds.size() != regions)
        throw std::invalid_argument("trainer: seed count != ground-truth region count");
    for (const auto& s : inst.seeds.seeds)
        if (inst.gt.labels[s.node] != s.label)
            throw std::invalid_argument("trainer: seed label disagrees with ground truth");
}

ModelParams initial_params(std::span<const TrainInstance> corpus, const TrainConfig& config) {
    const int channels = corpus[0].image.channels;
    if (config.model_kind == ModelKind::Static)
        return make_static_params(channels, config.patch_radius, config.hidden_width,
                                  config.rng_seed);
    return make_dynamic_params(channels, config.patch_radius, config.hidden_width,
                               config.recurrent_size, config.rng_seed);
}

Aggregate aggregate_of(const std::vector<double>& xs) {
    Aggregate a;
    if (xs.empty()) return a;
    a.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - a.mean) * (x - a.mean);
        a.stddev = std::sqrt(ss / (xs.size() - 1));
    }
    return a;
}

EvalResult finalize_eval(std::vector<ScoreReport> reports) {
    std::vector<double> ar, vs, vm;
    for (const auto& r : reports) {
        ar.push_back(r.arand);
        vs.push_back(r.voi_split);
        vm.push_back(r.voi_merge);
    }
    EvalResult out;
    out.per_image = std::move(reports);
    out.arand = aggregate_of(ar);
    out.voi_split = aggregate_of(vs);
    out.voi_merge = aggregate_of(vm);
    return out;
}

}  // namespace

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("TrainConfig: learning_rate must be > 0");
    if (!(momentum >= 0.0 && momentum < 1.0))
        throw std::invalid_argument("TrainConfig: momentum must lie in [0,1)");
    if (!(gamma >= 0.0 && gamma <= 1.0))
        throw std::invalid_argument("TrainConfig: gamma must lie in [0,1]");
    if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be positive");
    if (workers < 1) throw std::invalid_argument("TrainConfig: workers must be positive");
    if (patch_radius < 0) throw std::invalid_argument("TrainConfig: patch_radius must be >= 0");
    if (hidden_width < 1) throw std::invalid_argument("TrainConfig: hidden_width must be positive");
    if (model_kind == ModelKind::Dynamic && recurrent_size < 1)
        throw std::invalid_argument("TrainConfig: recurrent_size must be positive");
    if (bptt_truncation < 1) throw std::invalid_argument("TrainConfig: bptt_truncation must be positive");
}

std::pair<std::vector<double>, EpochStats> epoch_step(const ModelParams& params,
                                                      const TrainInstance& instance,
                                                      const TrainConfig& config) {
    check_instance(instance);

    const StaticModelProvider static_provider(params);
    const DynamicModelProvider dynamic_provider(params);
    const AltitudeProvider& provider =
        config.model_kind == ModelKind::Dynamic
            ? static_cast<const AltitudeProvider&>(dynamic_provider)
            : static_cast<const AltitudeProvider&>(static_provider);

    const GrowthRecord free_rec =
        grow(instance.gt.graph, instance.image, instance.seeds, provider);
    const std::vector<EdgeId> gt_cuts = cut_set(instance.gt);
    const GrowthRecord constrained_rec =
        grow(instance.gt.graph, instance.image, instance.seeds, provider, gt_cuts);

    const std::vector<NodeId> incorrect = find_incorrect_nodes(free_rec, constrained_rec);
    // Dynamic runs re-evaluate altitudes after the records diverge, so some
    // flagged nodes carry no root edge; those are dropped rather than fatal.
    const RootEdgePolicy policy = config.model_kind == ModelKind::Dynamic
                                      ? RootEdgePolicy::DropUnrooted
                                      : RootEdgePolicy::Strict;
    const ErrorAnalysis analysis =
        find_root_edges(free_rec, constrained_rec, incorrect, policy);
    const std::vector<double> weights = config.weight_mode == WeightMode::Binary
                                            ? weights_binary(analysis)
                                            : weights_discounted(analysis, config.gamma);

    std::vector<double> grad = grad_structured(params, weights, free_rec, constrained_rec,
                                               instance.image, config.bptt_truncation);

    EpochStats stats;
    stats.loss = structured_loss(weights, free_rec, constrained_rec);
    stats.perceptron_loss = perceptron_loss(free_rec, constrained_rec);
    stats.incorrect_count = static_cast<long long>(incorrect.size());
    stats.arand = arand(segmentation_of(free_rec), instance.gt, 0.0);
    double norm_sq = 0.0;
    for (double v : grad) norm_sq += v * v;
    stats.gradient_norm = std::sqrt(norm_sq);
    return {std::move(grad), stats};
}

FitResult fit(std::span<const TrainInstance> corpus, const TrainConfig& config,
              const CheckpointFn& checkpoint, int checkpoint_every) {
    config.validate();
    if (corpus.empty()) throw std::invalid_argument("fit: empty corpus");
    for (const auto& inst : corpus) check_instance(inst);

    ModelParams params = initial_params(corpus, config);
    std::vector<double> velocity(params.theta.size(), 0.0);
    std::vector<EpochStats> stats;
    stats.reserve(static_cast<std::size_t>(config.epochs) * corpus.size());

    auto apply_update = [&](const std::vector<double>& grad) {
        for (double v : grad)
            if (!std::isfinite(v))
                throw numeric_error("fit: non-finite gradient; aborting");
        for (std::size_t i = 0; i < params.theta.size(); ++i) {
            velocity[i] = config.momentum * velocity[i] - config.learning_rate * grad[i];
            params.theta[i] += velocity[i];
        }
    };

    if (config.workers == 1) {
        std::mt19937_64 shuffle_rng(detail::splitmix64(config.rng_seed ^ 0xfeedfacecafebeefull));
        std::vector<std::size_t> order(corpus.size());
        std::iota(order.begin(), order.end(), 0);
        int step = 0;
        for (int epoch = 0; epoch < config.epochs; ++epoch) {
            for (std::size_t i = order.size(); i > 1; --i)
                std::swap(order[i - 1], order[shuffle_rng() % i]);
            double epoch_loss = 0.0;
            for (std::size_t idx : order) {
                auto [grad, st] = epoch_step(params, corpus[idx], config);
                apply_update(grad);
                epoch_loss += st.loss;
                stats.push_back(st);
                ++step;
                if (checkpoint && checkpoint_every > 0 && step % checkpoint_every == 0)
                    checkpoint(step, params);
            }
            if (epoch_loss == 0.0) break;  // exact separation reached
        }
        if (checkpoint) checkpoint(step, params);
        return {std::move(params), std::move(stats)};
    }

    // Asynchronous mode: workers snapshot the parameters, compute one
    // epoch_step each on a randomly drawn image, and the master applies
    // submissions in arrival order under the lock.
    std::mutex master_mutex;
    std::atomic<long long> remaining(static_cast<long long>(config.epochs) *
                                     static_cast<long long>(corpus.size()));
    std::atomic<bool> failed(false);
    std::string failure;
    int step = 0;

    auto worker_body = [&](int worker_id) {
        std::mt19937_64 rng(detail::splitmix64(config.rng_seed + 0x1000 + worker_id));
        while (!failed.load() && remaining.fetch_sub(1) > 0) {
            ModelParams snapshot;
            {
                std::lock_guard<std::mutex> lock(master_mutex);
                snapshot = params;
            }
            const std::size_t idx = rng() % corpus.size();
            try {
                auto [grad, st] = epoch_step(snapshot, corpus[idx], config);
                std::lock_guard<std::mutex> lock(master_mutex);
                apply_update(grad);
                stats.push_back(st);
                ++step;
                if (checkpoint && checkpoint_every > 0 && step % checkpoint_every == 0)
                    checkpoint(step, params);
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(master_mutex);
                failed.store(true);
                failure = e.what();
            }
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(config.workers);
    for (int w = 0; w < config.workers; ++w) pool.emplace_back(worker_body, w);
    for (auto& t : pool) t.join();
    if (failed.load()) throw std::runtime_error("fit: worker failed: " + failure);
    if (checkpoint) checkpoint(step, params);
    return {std::move(params), std::move(stats)};
}

EvalResult evaluate(const ModelParams& params, std::span<const TrainInstance> corpus,
                    double tolerance) {
    const StaticModelProvider static_provider(params);
    const DynamicModelProvider dynamic_provider(params);
    const AltitudeProvider& provider =
        params.arch == ModelArch::Dynamic
            ? static_cast<const AltitudeProvider&>(dynamic_provider)
            : static_cast<const AltitudeProvider&>(static_provider);

    std::vector<ScoreReport> reports;
    reports.reserve(corpus.size());
    for (const auto& inst : corpus) {
        const GrowthRecord rec = grow(inst.gt.graph, inst.image, inst.seeds, provider);
        reports.push_back(score(segmentation_of(rec), inst.gt, tolerance));
    }
    return finalize_eval(std::move(reports));
}

EvalResult evaluate_fixed(std::span<const TrainInstance> corpus,
                          std::span<const std::vector<double>> edge_altitudes,
                          double tolerance) {
    if (corpus.size() != edge_altitudes.size())
        throw std::invalid_argument("evaluate_fixed: one altitude map per image required");
    std::vector<ScoreReport> reports;
    reports.reserve(corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const StaticMapProvider provider(edge_altitudes[i]);
        const GrowthRecord rec = grow(corpus[i].gt.graph, corpus[i].image, corpus[i].seeds,
                                      provider);
        reports.push_back(score(segmentation_of(rec), corpus[i].gt, tolerance));
    }
    return finalize_eval(std::move(reports));
}

}  // namespace msfseg
