#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "msfseg/grid.hpp"

namespace msfseg {

/// Synthetic boundary benchmark: zero crossings of Gaussian-filtered white
/// noise define the regions; the observable image is the blurred region
/// boundary map plus Gaussian pixel noise.
struct SynthConfig {
    int height = 64;
    int width = 64;
    double sigma_noise = 0.3;
    double sigma_process = 0.0;  // <= 0 selects the default 8 * min(h,w) / 252
    double sigma_blur = 1.0;
    std::uint64_t rng_seed = 0;

    double effective_sigma_process() const {
        if (sigma_process > 0.0) return sigma_process;
        return 8.0 * static_cast<double>(height < width ? height : width) / 252.0;
    }
};

/// Single-channel image plus its ground-truth segmentation. Pure function
/// of the config; retries on a degenerate (single-sign) latent field with
/// the next RNG substream, failing after 8 attempts.
std::pair<Image, Segmentation> generate(const SynthConfig& config);

/// Exact Euclidean distance from every node to the nearest true node,
/// via the two-pass parabolic-envelope transform. Rejects all-true and
/// all-false masks.
std::vector<double> distance_transform(const GridGraph& graph, const std::vector<bool>& mask);

/// One seed per ground-truth region: the node of maximal distance to the
/// region boundary, ties broken by lowest node id. For a single-region
/// segmentation the image border ring substitutes for the empty boundary.
SeedSet seed_oracle(const Segmentation& gt);

/// Distance-transform-watershed altitudes: background = nodes with
/// g < threshold; d = distance to the nearest non-background node; edge
/// altitude = max of (-d) at its endpoints.
std::vector<double> dtws_altitudes(const GridGraph& graph, std::span<const double> g_map,
                                   double threshold);

/// Per-channel Gaussian smoothing with reflect padding; sigma = 0 is the
/// identity.
Image smooth_image(const Image& image, double sigma);

/// Node-valued map lifted to edges by the endpoint maximum.
std::vector<double> lift_node_map(const GridGraph& graph, std::span<const double> node_values);

}  // namespace msfseg
