#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "msfseg/grow.hpp"

namespace msfseg {

/// Learnable altitude architectures: a boundary-probability model g over
/// the raw image, a static edge model over the augmented image, and a
/// dynamic edge model adding the relative-assignment projection and a gated
/// recurrent history.
enum class ModelArch { BoundaryProb, Static, Dynamic };

std::string to_string(ModelArch arch);
ModelArch arch_from_string(std::string_view s);

struct ParamBlock {
    std::string name;
    std::ptrdiff_t offset = 0;
    int rows = 0;
    int cols = 0;
    std::ptrdiff_t size() const { return static_cast<std::ptrdiff_t>(rows) * cols; }
};

/// Flat parameter vector plus a layout mapping named blocks to slices.
struct ModelParams {
    ModelArch arch = ModelArch::Static;
    int patch_radius = 3;
    int hidden_width = 32;
    int recurrent_size = 0;  // r; 0 for static models
    int input_channels = 1;  // channels of the image the model consumes
    std::vector<ParamBlock> layout;
    std::vector<double> theta;

    int window() const { return 2 * patch_radius + 1; }
    int patch_values() const { return window() * window(); }
    /// Input feature count of the first layer for this architecture.
    int feature_count() const;

    const ParamBlock& block_info(std::string_view name) const;
    Eigen::Map<const Eigen::MatrixXd> block(std::string_view name) const;
    Eigen::Map<Eigen::MatrixXd> block(std::string_view name);
};

// Parameter factories; blocks start uniform in +-sqrt(6/(rows+cols)), drawn
// from the seeded RNG in layout order.
ModelParams make_g_params(int image_channels, int patch_radius, int hidden_width,
                          std::uint64_t rng_seed);
ModelParams make_static_params(int augmented_channels, int patch_radius, int hidden_width,
                               std::uint64_t rng_seed);
ModelParams make_dynamic_params(int augmented_channels, int patch_radius, int hidden_width,
                                int recurrent_size, std::uint64_t rng_seed);

void save_model(const std::filesystem::path& path, const ModelParams& params);
ModelParams load_model(const std::filesystem::path& path);

/// 1-of-3 coding of an assignment relative to a reference label:
/// channel 0 = assigned to the reference ("me"), channel 1 = unassigned
/// ("nobody"), channel 2 = assigned elsewhere ("them"). Independent of the
/// actual values of non-reference labels.
Image project_relative(const GridGraph& graph, std::span<const Label> assignment,
                       Label reference_label);

/// (2*radius+1)^2 * channels window values around a node, row-major,
/// channel-innermost, reflect-padded at the borders.
std::vector<double> extract_patch(const Image& image, NodeId center, int radius);

/// Boundary probability of a node under the unstructured model g.
double predict_g(const ModelParams& params, const Image& image, NodeId node);

struct GTrainConfig {
    int patch_radius = 3;
    int hidden_width = 32;
    double learning_rate = 0.05;
    int steps = 2000;
    int batch_size = 32;
    std::uint64_t rng_seed = 0;
};

struct GTrainResult {
    ModelParams params;
    std::vector<double> loss_trace;  // mean batch cross-entropy per step
};

/// Trains g by mini-batch gradient descent on pixelwise cross-entropy
/// against the boundary masks of the corpus segmentations.
GTrainResult train_g(std::span<const std::pair<Image, Segmentation>> corpus,
                     const GTrainConfig& config);

/// Input image with one extra channel holding g's per-node boundary
/// probability; the first channels are copied bit-identically.
Image augment(const Image& image, const ModelParams& g_params);

/// Static altitude of edge (u -> v): patch at v plus a 4-way one-hot
/// direction code through one hidden layer and a linear readout.
double predict_static(const ModelParams& params, const Image& image, EdgeId e, NodeId u,
                      NodeId v);

/// Dynamic altitude of edge (u -> v): static features concatenated with the
/// relative projection patch (reference label = assignment of u), one hidden
/// layer, a gated recurrent cell combining with u's hidden state, and a
/// linear readout. Writes v's new hidden state (components stay in (-1,1)).
double predict_dynamic(const ModelParams& params, const Image& image, EdgeId e, NodeId u,
                       NodeId v, std::span<const Label> assignment,
                       std::span<const double> hidden_u, std::span<double> hidden_v);

class StaticModelProvider final : public AltitudeProvider {
public:
    explicit StaticModelProvider(const ModelParams& params) : params_(&params) {}
    double evaluate(const Image& image, EdgeId e, NodeId u, NodeId v, std::span<const Label>,
                    std::span<const double>, std::span<double>) const override {
        return predict_static(*params_, image, e, u, v);
    }

private:
    const ModelParams* params_;
};

class DynamicModelProvider final : public AltitudeProvider {
public:
    explicit DynamicModelProvider(const ModelParams& params) : params_(&params) {}
    int hidden_size() const override { return params_->recurrent_size; }
    double evaluate(const Image& image, EdgeId e, NodeId u, NodeId v,
                    std::span<const Label> assignment, std::span<const double> hidden_u,
                    std::span<double> hidden_v) const override {
        return predict_dynamic(*params_, image, e, u, v, assignment, hidden_u, hidden_v);
    }

private:
    const ModelParams* params_;
};

constexpr int kDefaultBpttTruncation = 32;

/// Recomputes the altitude a record evaluated for `edge` from the given
/// parameters, replaying the recurrent chain along the forest path with the
/// historical assignment states. With the record's own parameters this
/// reproduces evaluated_altitude[edge] exactly. The chain is cut
/// `truncation` steps back; the hidden state at the cut is read from the
/// record and treated as constant.
double replay_altitude(const ModelParams& params, const GrowthRecord& record, const Image& image,
                       EdgeId edge, int truncation = kDefaultBpttTruncation);

/// Sum of R(e) * f(e; params) with each scored edge replayed in the record
/// that produced it (positive weights in the constrained record, negative in
/// the free one). Differentiable surrogate matching grad_structured.
double replay_structured_loss(const ModelParams& params, std::span<const double> weights,
                              const GrowthRecord& free_rec, const GrowthRecord& constrained_rec,
                              const Image& image, int truncation = kDefaultBpttTruncation);

/// Gradient of replay_structured_loss with respect to theta. For dynamic
/// models gradients flow backwards through the recurrent chain along each
/// scored edge's forest path, truncated after `truncation` steps.
std::vector<double> grad_structured(const ModelParams& params, std::span<const double> weights,
                                    const GrowthRecord& free_rec,
                                    const GrowthRecord& constrained_rec, const Image& image,
                                    int truncation = kDefaultBpttTruncation);

/// Max over a random subsample of coordinates of
/// |analytic - central difference| / max(1e-8, |analytic| + |central|).
double finite_diff_check(const ModelParams& params,
                         const std::function<double(const ModelParams&)>& loss,
                         std::span<const double> analytic_grad, double epsilon,
                         int sample_coords = 50, std::uint64_t rng_seed = 0);

}  // namespace msfseg
