#include "msfseg/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "detail.hpp"

namespace msfseg {

namespace {

std::vector<double> gaussian_kernel(double sigma) {
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
        sum += k[i + radius];
    }
    for (double& v : k) v /= sum;
    return k;
}

// Separable convolution with symmetric reflect padding.
void convolve_field(std::vector<double>& field, int height, int width, double sigma) {
    if (sigma <= 0.0) return;
    const std::vector<double> kernel = gaussian_kernel(sigma);
    const int radius = static_cast<int>(kernel.size() / 2);
    std::vector<double> tmp(field.size());
    for (int r = 0; r < height; ++r) {
        for (int c = 0; c < width; ++c) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i)
                acc += kernel[i + radius] * field[r * width + detail::reflect_index(c + i, width)];
            tmp[r * width + c] = acc;
        }
    }
    for (int c = 0; c < width; ++c) {
        for (int r = 0; r < height; ++r) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i)
                acc += kernel[i + radius] * tmp[detail::reflect_index(r + i, height) * width + c];
            field[r * width + c] = acc;
        }
    }
}

// Connected components of a boolean field, 4-connectivity, labeled 1..n in
// order of first (lowest) node id.
std::vector<Label> connected_components(const GridGraph& g, const std::vector<bool>& sign) {
    std::vector<Label> labels(g.num_nodes(), 0);
    Label next = 0;
    std::vector<NodeId> stack;
    for (NodeId start = 0; start < g.num_nodes(); ++start) {
        if (labels[start] != 0) continue;
        ++next;
        labels[start] = next;
        stack.push_back(start);
        while (!stack.empty()) {
            const NodeId n = stack.back();
            stack.pop_back();
            for (const auto& [e, nb] : g.incident_edges(n)) {
                if (labels[nb] == 0 && sign[nb] == sign[n]) {
                    labels[nb] = next;
                    stack.push_back(nb);
                }
            }
        }
    }
    return labels;
}

// Merges regions smaller than min_size into their largest 4-neighbor region
// and relabels consecutively in order of first node id.
void merge_tiny_regions(const GridGraph& g, std::vector<Label>& labels, std::size_t min_size) {
    for (;;) {
        std::map<Label, std::size_t> sizes;
        for (Label l : labels) ++sizes[l];
        Label tiny = 0;
        for (const auto& [l, sz] : sizes)
            if (sz < min_size) {
                tiny = l;
                break;
            }
        if (tiny == 0) break;

        Label best = 0;
        std::size_t best_size = 0;
        for (NodeId n = 0; n < g.num_nodes(); ++n) {
            if (labels[n] != tiny) continue;
            for (const auto& [e, nb] : g.incident_edges(n)) {
                const Label l = labels[nb];
                if (l == tiny) continue;
                if (sizes[l] > best_size || (sizes[l] == best_size && (best == 0 || l < best))) {
                    best = l;
                    best_size = sizes[l];
                }
            }
        }
        if (best == 0) break;  // single region left
        for (Label& l : labels)
            if (l == tiny) l = best;
    }
    // Relabel to consecutive 1..n by first occurrence.
    std::map<Label, Label> remap;
    Label next = 0;
    for (Label& l : labels) {
        auto it = remap.find(l);
        if (it == remap.end()) it = remap.emplace(l, ++next).first;
        l = it->second;
    }
}

// 1D squared distance transform (lower envelope of parabolas).
void edt_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v,
            std::vector<double>& z, int n) {
    int k = 0;
    v[0] = 0;
    z[0] = -std::numeric_limits<double>::infinity();
    z[1] = std::numeric_limits<double>::infinity();
    for (int q = 1; q < n; ++q) {
        double s;
        for (;;) {
            s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k]);
            if (s > z[k]) break;
            --k;
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = std::numeric_limits<double>::infinity();
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q) ++k;
        d[q] = (q - v[k]) * static_cast<double>(q - v[k]) + f[v[k]];
    }
}

}  // namespace

std::pair<Image, Segmentation> generate(const SynthConfig& config) {
    if (config.height < 8 || config.width < 8)
        throw std::invalid_argument("generate: size must be at least 8x8");
    if (config.sigma_noise < 0.0 || config.sigma_blur < 0.0)
        throw std::invalid_argument("generate: sigma_noise and sigma_blur must be >= 0");

    const GridGraph g(config.height, config.width);
    const int h = config.height, w = config.width;
    const double sigma_p = config.effective_sigma_process();

    for (int attempt = 0; attempt < 8; ++attempt) {
        detail::GaussianSampler noise(
            detail::splitmix64(config.rng_seed + 0x51a7b0d5ull * attempt));

        std::vector<double> latent(static_cast<std::size_t>(h) * w);
        for (double& v : latent) v = noise.next();
        convolve_field(latent, h, w, sigma_p);

        std::vector<bool> sign(latent.size());
        bool any_pos = false, any_neg = false;
        for (std::size_t i = 0; i < latent.size(); ++i) {
            sign[i] = latent[i] >= 0.0;
            (sign[i] ? any_pos : any_neg) = true;
        }
        if (!any_pos || !any_neg) continue;  // degenerate field; next substream

        std::vector<Label> labels = connected_components(g, sign);
        merge_tiny_regions(g, labels, 2);
        Segmentation gt(g, std::move(labels));

        const std::vector<bool> edge_nodes = boundary_mask(gt);
        Image img(g, 1);
        for (NodeId n = 0; n < g.num_nodes(); ++n) img.data[n] = edge_nodes[n] ? 1.0 : 0.0;
        convolve_field(img.data, h, w, config.sigma_blur);
        if (config.sigma_noise > 0.0)
            for (double& v : img.data) v += config.sigma_noise * noise.next();
        return {std::move(img), std::move(gt)};
    }
    throw std::runtime_error("generate: latent field degenerate after 8 attempts");
}

std::vector<double> distance_transform(const GridGraph& graph, const std::vector<bool>& mask) {
    if (mask.size() != static_cast<std::size_t>(graph.num_nodes()))
        throw std::invalid_argument("distance_transform: mask length != |V|");
    bool any_true = false, any_false = false;
    for (bool b : mask) (b ? any_true : any_false) = true;
    if (!any_true)
        throw std::invalid_argument("distance_transform: mask has no reference node");
    if (!any_false)
        throw std::invalid_argument("distance_transform: mask is all-true");

    const int h = graph.height(), w = graph.width();
    const double inf = static_cast<double>(h) * h + static_cast<double>(w) * w + 1.0;
    std::vector<double> sq(static_cast<std::size_t>(h) * w);
    for (std::size_t i = 0; i < sq.size(); ++i) sq[i] = mask[i] ? 0.0 : inf;

    const int n_max = std::max(h, w);
    std::vector<double> f(n_max), d(n_max), z(n_max + 1);
    std::vector<int> v(n_max);

    for (int c = 0; c < w; ++c) {
        for (int r = 0; r < h; ++r) f[r] = sq[r * static_cast<std::size_t>(w) + c];
        edt_1d(f, d, v, z, h);
        for (int r = 0; r < h; ++r) sq[r * static_cast<std::size_t>(w) + c] = d[r];
    }
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) f[c] = sq[r * static_cast<std::size_t>(w) + c];
        edt_1d(f, d, v, z, w);
        for (int c = 0; c < w; ++c) sq[r * static_cast<std::size_t>(w) + c] = d[c];
    }
    std::vector<double> dist(sq.size());
    for (std::size_t i = 0; i < sq.size(); ++i) dist[i] = std::sqrt(sq[i]);
    return dist;
}

SeedSet seed_oracle(const Segmentation& gt) {
    if (!gt.complete()) throw std::logic_error("seed_oracle: segmentation has unassigned nodes");
    const GridGraph& g = gt.graph;
    const Label n_labels = gt.max_label();

    std::vector<bool> boundary = boundary_mask(gt);
    bool any = false;
    for (bool b : boundary) any = any || b;
    if (!any) {
        // Single region: measure distances from the image border ring.
        for (NodeId n = 0; n < g.num_nodes(); ++n) {
            const int r = g.row_of(n), c = g.col_of(n);
            boundary[n] = r == 0 || c == 0 || r == g.height() - 1 || c == g.width() - 1;
        }
    }

    std::vector<double> dist;
    bool all_ref = true;
    for (bool b : boundary) all_ref = all_ref && b;
    if (all_ref)
        dist.assign(g.num_nodes(), 0.0);  // every node on the reference set; ties decide
    else
        dist = distance_transform(g, boundary);

    std::vector<NodeId> best_node(n_labels + 1, -1);
    std::vector<double> best_dist(n_labels + 1, -1.0);
    for (NodeId n = 0; n < g.num_nodes(); ++n) {
        const Label l = gt.labels[n];
        if (dist[n] > best_dist[l]) {  // strict: ties keep the lowest node id
            best_dist[l] = dist[n];
            best_node[l] = n;
        }
    }

    SeedSet seeds;
    for (Label l = 1; l <= n_labels; ++l) {
        if (best_node[l] < 0)
            throw std::invalid_argument("seed_oracle: labels are not consecutive 1..n");
        seeds.seeds.push_back({best_node[l], l});
    }
    seeds.validate(g);
    return seeds;
}

std::vector<double> dtws_altitudes(const GridGraph& graph, std::span<const double> g_map,
                                   double threshold) {
    if (g_map.size() != static_cast<std::size_t>(graph.num_nodes()))
        throw std::invalid_argument("dtws_altitudes: map length != |V|");
    if (!(threshold > 0.0 && threshold < 1.0))
        throw std::invalid_argument("dtws_altitudes: threshold must lie in (0,1)");
    std::vector<bool> non_background(g_map.size());
    bool any_background = false;
    for (std::size_t i = 0; i < g_map.size(); ++i) {
        non_background[i] = g_map[i] >= threshold;
        any_background = any_background || !non_background[i];
    }
    if (!any_background)
        throw std::invalid_argument("dtws_altitudes: no background below the threshold");
    const std::vector<double> d = distance_transform(graph, non_background);
    std::vector<double> alt(graph.num_edges());
    for (EdgeId e = 0; e < graph.num_edges(); ++e) {
        const auto [u, v] = graph.edge_endpoints(e);
        alt[e] = std::max(-d[u], -d[v]);
    }
    return alt;
}

Image smooth_image(const Image& image, double sigma) {
    if (sigma < 0.0) throw std::invalid_argument("smooth_image: sigma must be >= 0");
    Image out = image;
    if (sigma == 0.0) return out;
    const int h = image.graph.height(), w = image.graph.width();
    std::vector<double> channel(static_cast<std::size_t>(h) * w);
    for (int c = 0; c < image.channels; ++c) {
        for (NodeId n = 0; n < image.graph.num_nodes(); ++n) channel[n] = image.at(n, c);
        convolve_field(channel, h, w, sigma);
        for (NodeId n = 0; n < image.graph.num_nodes(); ++n) out.at(n, c) = channel[n];
    }
    return out;
}

std::vector<double> lift_node_map(const GridGraph& graph, std::span<const double> node_values) {
    if (node_values.size() != static_cast<std::size_t>(graph.num_nodes()))
        throw std::invalid_argument("lift_node_map: value count != |V|");
    std::vector<double> alt(graph.num_edges());
    for (EdgeId e = 0; e < graph.num_edges(); ++e) {
        const auto [u, v] = graph.edge_endpoints(e);
        alt[e] = std::max(node_values[u], node_values[v]);
    }
    return alt;
}

}  // namespace msfseg
