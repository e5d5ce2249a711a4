#pragma once

#include <functional>
#include <span>
#include <vector>

#include "msfseg/metrics.hpp"
#include "msfseg/models.hpp"
#include "msfseg/structured_loss.hpp"

namespace msfseg {

enum class WeightMode { Binary, Discounted };
enum class ModelKind { Static, Dynamic };

struct TrainConfig {
    double learning_rate = 1e-2;
    double momentum = 0.9;
    double gamma = 0.7;  // discount factor for WeightMode::Discounted
    int epochs = 1;
    int workers = 1;
    std::uint64_t rng_seed = 0;
    WeightMode weight_mode = WeightMode::Discounted;
    ModelKind model_kind = ModelKind::Static;
    int patch_radius = 3;
    int hidden_width = 32;
    int recurrent_size = 16;
    int bptt_truncation = kDefaultBpttTruncation;

    void validate() const;
};

struct EpochStats {
    double loss = 0.0;
    double perceptron_loss = 0.0;
    long long incorrect_count = 0;
    double arand = 0.0;
    double gradient_norm = 0.0;
};

/// One structured-training instance. The image is the model input (for
/// structured models, the augmented image).
struct TrainInstance {
    Image image;
    Segmentation gt;
    SeedSet seeds;
};

/// One structured learning step on a single image: free growth, ground-truth
/// constrained growth, root-edge analysis, weights, and the loss gradient.
/// Pure: no parameter mutation happens here.
std::pair<std::vector<double>, EpochStats> epoch_step(const ModelParams& params,
                                                      const TrainInstance& instance,
                                                      const TrainConfig& config);

struct FitResult {
    ModelParams params;
    std::vector<EpochStats> stats;  // one entry per image visit
};

using CheckpointFn = std::function<void(int step, const ModelParams& params)>;

/// SGD with momentum over the corpus. workers == 1 visits images in
/// seeded-shuffle order and is a deterministic function of (corpus, config);
/// workers > 1 runs asynchronous workers that snapshot the parameters,
/// compute one epoch_step each on a randomly drawn image, and submit updates
/// in arrival order under mutual exclusion (admissibly nondeterministic).
/// Training stops early once an epoch's mean loss reaches exactly zero.
FitResult fit(std::span<const TrainInstance> corpus, const TrainConfig& config,
              const CheckpointFn& checkpoint = nullptr, int checkpoint_every = 0);

struct Aggregate {
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation; 0 for a single entry
};

struct EvalResult {
    std::vector<ScoreReport> per_image;
    Aggregate arand;
    Aggregate voi_split;
    Aggregate voi_merge;
};

/// Grows every corpus image with the model and scores against ground truth
/// at the given boundary tolerance.
EvalResult evaluate(const ModelParams& params, std::span<const TrainInstance> corpus,
                    double tolerance);

/// Same, for fixed per-image edge altitudes (baseline methods).
EvalResult evaluate_fixed(std::span<const TrainInstance> corpus,
                          std::span<const std::vector<double>> edge_altitudes,
                          double tolerance);

}  // namespace msfseg
