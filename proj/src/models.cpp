#include "msfseg/models.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "detail.hpp"
#include "msfseg/io.hpp"

namespace msfseg {

namespace {

using detail::reflect_index;
using detail::uniform_unit;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

ModelParams make_layout(ModelArch arch, int channels, int patch_radius, int hidden_width,
                        int recurrent_size) {
    if (channels < 1) throw std::invalid_argument("model: channels must be positive");
    if (patch_radius < 0) throw std::invalid_argument("model: patch_radius must be >= 0");
    if (hidden_width < 1) throw std::invalid_argument("model: hidden_width must be positive");
    if (recurrent_size < 0) throw std::invalid_argument("model: recurrent_size must be >= 0");

    ModelParams p;
    p.arch = arch;
    p.patch_radius = patch_radius;
    p.hidden_width = hidden_width;
    p.recurrent_size = recurrent_size;
    p.input_channels = channels;

    const int f = p.feature_count();
    const int h = hidden_width;
    const int r = recurrent_size;

    std::ptrdiff_t offset = 0;
    auto add = [&](const char* name, int rows, int cols) {
        p.layout.push_back({name, offset, rows, cols});
        offset += static_cast<std::ptrdiff_t>(rows) * cols;
    };
    add("w1", h, f);
    add("b1", h, 1);
    if (arch == ModelArch::Dynamic) {
        add("wz", r, h);
        add("uz", r, r);
        add("bz", r, 1);
        add("wr", r, h);
        add("ur", r, r);
        add("br", r, 1);
        add("wc", r, h);
        add("uc", r, r);
        add("bc", r, 1);
        add("wa", r, 1);
        add("ba", 1, 1);
    } else {
        add("w2", h, 1);
        add("b2", 1, 1);
    }
    p.theta.assign(offset, 0.0);
    return p;
}

void init_params(ModelParams& p, std::uint64_t rng_seed) {
    std::mt19937_64 gen(rng_seed);
    for (const ParamBlock& b : p.layout) {
        const double bound = std::sqrt(6.0 / (b.rows + b.cols));
        for (std::ptrdiff_t i = 0; i < b.size(); ++i)
            p.theta[b.offset + i] = bound * (2.0 * uniform_unit(gen) - 1.0);
    }
}

// Edge direction of v relative to u, matching the L,R,U,D neighbor order.
int direction_code(const GridGraph& g, NodeId u, NodeId v) {
    const int du = g.col_of(v) - g.col_of(u);
    if (du == -1) return 0;
    if (du == 1) return 1;
    return g.row_of(v) < g.row_of(u) ? 2 : 3;
}

void write_image_patch(const Image& image, NodeId center, int radius, double* out) {
    const GridGraph& g = image.graph;
    const int r0 = g.row_of(center), c0 = g.col_of(center);
    std::size_t k = 0;
    for (int dr = -radius; dr <= radius; ++dr) {
        const int rr = reflect_index(r0 + dr, g.height());
        for (int dc = -radius; dc <= radius; ++dc) {
            const int cc = reflect_index(c0 + dc, g.width());
            const NodeId n = g.node_at(rr, cc);
            for (int ch = 0; ch < image.channels; ++ch) out[k++] = image.at(n, ch);
        }
    }
}

// Relative-projection window (3 channels: me / nobody / them) around a node,
// reading labels through a callable so live and historical assignments share
// one code path.
template <class LabelFn>
void write_projection_patch(const GridGraph& g, NodeId center, int radius, Label reference,
                            LabelFn&& label_of, double* out) {
    const int r0 = g.row_of(center), c0 = g.col_of(center);
    std::size_t k = 0;
    for (int dr = -radius; dr <= radius; ++dr) {
        const int rr = reflect_index(r0 + dr, g.height());
        for (int dc = -radius; dc <= radius; ++dc) {
            const int cc = reflect_index(c0 + dc, g.width());
            const Label l = label_of(g.node_at(rr, cc));
            out[k++] = l == reference ? 1.0 : 0.0;
            out[k++] = l == 0 ? 1.0 : 0.0;
            out[k++] = (l != 0 && l != reference) ? 1.0 : 0.0;
        }
    }
}

void write_static_features(const ModelParams& params, const Image& image, NodeId u, NodeId v,
                           double* out) {
    write_image_patch(image, v, params.patch_radius, out);
    double* dir = out + params.patch_values() * image.channels;
    dir[0] = dir[1] = dir[2] = dir[3] = 0.0;
    dir[direction_code(image.graph, u, v)] = 1.0;
}

template <class LabelFn>
void write_dynamic_features(const ModelParams& params, const Image& image, NodeId u, NodeId v,
                            Label reference, LabelFn&& label_of, double* out) {
    write_static_features(params, image, u, v, out);
    write_projection_patch(image.graph, v, params.patch_radius, reference,
                           std::forward<LabelFn>(label_of),
                           out + params.patch_values() * image.channels + 4);
}

using ConstMat = Eigen::Map<const Eigen::MatrixXd>;
using ConstVec = Eigen::Map<const Eigen::VectorXd>;

struct StaticView {
    ConstMat w1;
    ConstVec b1, w2;
    double b2;
};

StaticView static_view(const ModelParams& p) {
    const auto& w2 = p.block_info("w2");
    return {p.block("w1"),
            ConstVec(p.theta.data() + p.block_info("b1").offset, p.hidden_width),
            ConstVec(p.theta.data() + w2.offset, p.hidden_width),
            p.theta[p.block_info("b2").offset]};
}

struct GruView {
    ConstMat w1, wz, uz, wr, ur, wc, uc;
    ConstVec b1, bz, br, bc, wa;
    double ba;
};

GruView gru_view(const ModelParams& p) {
    const int h = p.hidden_width, r = p.recurrent_size;
    auto vec = [&](const char* name, int n) {
        return ConstVec(p.theta.data() + p.block_info(name).offset, n);
    };
    return {p.block("w1"), p.block("wz"), p.block("uz"), p.block("wr"),
            p.block("ur"), p.block("wc"), p.block("uc"), vec("b1", h),
            vec("bz", r),  vec("br", r),  vec("bc", r),  vec("wa", r),
            p.theta[p.block_info("ba").offset]};
}

struct GruStep {
    Eigen::VectorXd x, h_in, z, rg, c, h_prev, h_new;
};

void gru_forward(const GruView& m, GruStep& s) {
    s.h_in = (m.w1 * s.x + m.b1).array().tanh();
    s.z = (m.wz * s.h_in + m.uz * s.h_prev + m.bz).unaryExpr([](double a) { return sigmoid(a); });
    s.rg = (m.wr * s.h_in + m.ur * s.h_prev + m.br).unaryExpr([](double a) { return sigmoid(a); });
    s.c = (m.wc * s.h_in + m.uc * (s.rg.cwiseProduct(s.h_prev)) + m.bc).array().tanh();
    s.h_new = (1.0 - s.z.array()) * s.h_prev.array() + s.z.array() * s.c.array();
}

struct GradView {
    Eigen::Map<Eigen::MatrixXd> w1, wz, uz, wr, ur, wc, uc;
    Eigen::Map<Eigen::VectorXd> b1, bz, br, bc, wa;
    double* ba;
};

GradView grad_view(const ModelParams& p, std::vector<double>& grad) {
    auto mat = [&](const char* name) {
        const auto& b = p.block_info(name);
        return Eigen::Map<Eigen::MatrixXd>(grad.data() + b.offset, b.rows, b.cols);
    };
    auto vec = [&](const char* name) {
        const auto& b = p.block_info(name);
        return Eigen::Map<Eigen::VectorXd>(grad.data() + b.offset, b.rows);
    };
    return {mat("w1"), mat("wz"), mat("uz"), mat("wr"),
            mat("ur"), mat("wc"), mat("uc"), vec("b1"),
            vec("bz"), vec("br"), vec("bc"), vec("wa"),
            grad.data() + p.block_info("ba").offset};
}

// Backprop of one recurrent step; dh is the loss derivative w.r.t. h_new on
// entry and w.r.t. h_prev on exit.
void gru_backward(const GruView& m, const GruStep& s, GradView& g, Eigen::VectorXd& dh) {
    const Eigen::VectorXd dz = dh.cwiseProduct(s.c - s.h_prev);
    const Eigen::VectorXd dc = dh.cwiseProduct(s.z);
    Eigen::VectorXd dh_prev = dh.cwiseProduct(Eigen::VectorXd::Ones(dh.size()) - s.z);

    const Eigen::VectorXd dac =
        dc.cwiseProduct((1.0 - s.c.array().square()).matrix());
    g.wc += dac * s.h_in.transpose();
    g.uc += dac * (s.rg.cwiseProduct(s.h_prev)).transpose();
    g.bc += dac;
    const Eigen::VectorXd dq = m.uc.transpose() * dac;
    const Eigen::VectorXd drg = dq.cwiseProduct(s.h_prev);
    dh_prev += dq.cwiseProduct(s.rg);

    const Eigen::VectorXd dar =
        drg.cwiseProduct(s.rg.cwiseProduct((1.0 - s.rg.array()).matrix()));
    g.wr += dar * s.h_in.transpose();
    g.ur += dar * s.h_prev.transpose();
    g.br += dar;
    dh_prev += m.ur.transpose() * dar;

    const Eigen::VectorXd daz =
        dz.cwiseProduct(s.z.cwiseProduct((1.0 - s.z.array()).matrix()));
    g.wz += daz * s.h_in.transpose();
    g.uz += daz * s.h_prev.transpose();
    g.bz += daz;
    dh_prev += m.uz.transpose() * daz;

    const Eigen::VectorXd dh_in =
        m.wz.transpose() * daz + m.wr.transpose() * dar + m.wc.transpose() * dac;
    const Eigen::VectorXd da1 =
        dh_in.cwiseProduct((1.0 - s.h_in.array().square()).matrix());
    g.w1 += da1 * s.x.transpose();
    g.b1 += da1;

    dh = dh_prev;
}

// (hidden activations, pre-readout) of the static body.
double static_forward(const StaticView& m, const Eigen::VectorXd& x, Eigen::VectorXd& h_out) {
    h_out = (m.w1 * x + m.b1).array().tanh();
    return m.w2.dot(h_out) + m.b2;
}

NodeId child_of_edge(const GrowthRecord& rec, EdgeId e) {
    for (NodeId n = 0; n < rec.graph.num_nodes(); ++n)
        if (rec.parent_edge[n] == e) return n;
    return -1;
}

std::vector<NodeId> chain_to(const GrowthRecord& rec, NodeId node) {
    std::vector<NodeId> chain;
    for (NodeId n = node; n >= 0; n = rec.parent_node[n]) chain.push_back(n);
    std::reverse(chain.begin(), chain.end());
    return chain;
}

// Label of a node as it was just after assignment rank `threshold`.
struct HistoricalLabels {
    const GrowthRecord* rec;
    std::int64_t threshold;
    Label operator()(NodeId n) const {
        const std::int64_t o = rec->order[n];
        return (o >= 0 && o <= threshold) ? rec->assignment[n] : 0;
    }
};

// Replays the recurrent chain ending at `edge` inside `rec`; fills `steps`
// when a trace pointer is given. Returns the altitude at the final step.
double replay_chain(const ModelParams& params, const GrowthRecord& rec, const Image& image,
                    EdgeId edge, int truncation, std::vector<GruStep>* steps) {
    const NodeId child = child_of_edge(rec, edge);
    if (child < 0)
        throw std::logic_error("replay: edge is not a forest edge of the record");
    const std::vector<NodeId> chain = chain_to(rec, child);
    const int k = static_cast<int>(chain.size()) - 1;
    const int start = std::max(1, k - truncation + 1);
    const std::int64_t n_seeds = static_cast<std::int64_t>(rec.seeds.size());

    const GruView m = gru_view(params);
    const int f = params.feature_count();
    Eigen::VectorXd h_prev(params.recurrent_size);
    const auto h0 = rec.hidden_of(chain[start - 1]);
    for (int i = 0; i < params.recurrent_size; ++i) h_prev[i] = h0[i];

    GruStep s;
    s.x.resize(f);
    for (int i = start; i <= k; ++i) {
        const NodeId u = chain[i - 1];
        const NodeId v = chain[i];
        const EdgeId e = rec.parent_edge[v];
        const std::int64_t threshold = std::max(rec.order[u], n_seeds - 1);
        write_dynamic_features(params, image, u, v, rec.assignment[u],
                               HistoricalLabels{&rec, threshold}, s.x.data());
        s.h_prev = h_prev;
        gru_forward(m, s);
        h_prev = s.h_new;
        if (steps) steps->push_back(s);
    }
    return m.wa.dot(h_prev) + m.ba;
}

}  // namespace

std::string to_string(ModelArch arch) {
    switch (arch) {
        case ModelArch::BoundaryProb: return "g";
        case ModelArch::Static: return "static";
        case ModelArch::Dynamic: return "dynamic";
    }
    throw std::logic_error("unknown arch");
}

ModelArch arch_from_string(std::string_view s) {
    if (s == "g") return ModelArch::BoundaryProb;
    if (s == "static") return ModelArch::Static;
    if (s == "dynamic") return ModelArch::Dynamic;
    throw std::invalid_argument("unknown model architecture: " + std::string(s));
}

int ModelParams::feature_count() const {
    const int image_part = patch_values() * input_channels;
    switch (arch) {
        case ModelArch::BoundaryProb: return image_part;
        case ModelArch::Static: return image_part + 4;
        case ModelArch::Dynamic: return image_part + 4 + 3 * patch_values();
    }
    throw std::logic_error("unknown arch");
}

const ParamBlock& ModelParams::block_info(std::string_view name) const {
    for (const ParamBlock& b : layout)
        if (b.name == name) return b;
    throw std::invalid_argument("model: no parameter block named " + std::string(name));
}

Eigen::Map<const Eigen::MatrixXd> ModelParams::block(std::string_view name) const {
    const ParamBlock& b = block_info(name);
    return {theta.data() + b.offset, static_cast<Eigen::Index>(b.rows),
            static_cast<Eigen::Index>(b.cols)};
}

Eigen::Map<Eigen::MatrixXd> ModelParams::block(std::string_view name) {
    const ParamBlock& b = block_info(name);
    return {theta.data() + b.offset, static_cast<Eigen::Index>(b.rows),
            static_cast<Eigen::Index>(b.cols)};
}

ModelParams make_g_params(int image_channels, int patch_radius, int hidden_width,
                          std::uint64_t rng_seed) {
    ModelParams p = make_layout(ModelArch::BoundaryProb, image_channels, patch_radius,
                                hidden_width, 0);
    init_params(p, rng_seed);
    return p;
}

ModelParams make_static_params(int augmented_channels, int patch_radius, int hidden_width,
                               std::uint64_t rng_seed) {
    ModelParams p = make_layout(ModelArch::Static, augmented_channels, patch_radius,
                                hidden_width, 0);
    init_params(p, rng_seed);
    return p;
}

ModelParams make_dynamic_params(int augmented_channels, int patch_radius, int hidden_width,
                                int recurrent_size, std::uint64_t rng_seed) {
    if (recurrent_size < 1)
        throw std::invalid_argument("make_dynamic_params: recurrent_size must be positive");
    ModelParams p = make_layout(ModelArch::Dynamic, augmented_channels, patch_radius,
                                hidden_width, recurrent_size);
    init_params(p, rng_seed);
    return p;
}

void save_model(const std::filesystem::path& path, const ModelParams& params) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("save_model: cannot open " + path.string());
    os << "MSFSEG-MODEL v1\n";
    os << "arch = " << to_string(params.arch) << "\n";
    os << "patch_radius = " << params.patch_radius << "\n";
    os << "hidden_width = " << params.hidden_width << "\n";
    os << "recurrent_size = " << params.recurrent_size << "\n";
    os << "input_channels = " << params.input_channels << "\n";
    os << "blocks = ";
    for (std::size_t i = 0; i < params.layout.size(); ++i) {
        if (i) os << ',';
        os << params.layout[i].name << ':' << params.layout[i].rows << 'x'
           << params.layout[i].cols;
    }
    os << "\nend-header\n";
    Lwa1Array arr;
    arr.dtype = Lwa1Dtype::Float32;
    arr.height = 1;
    arr.width = static_cast<std::uint32_t>(params.theta.size());
    arr.channels = 1;
    arr.f32.reserve(params.theta.size());
    for (double v : params.theta) arr.f32.push_back(static_cast<float>(v));
    write_lwa1_stream(os, arr);
    if (!os) throw std::runtime_error("save_model: write failed: " + path.string());
}

ModelParams load_model(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_model: cannot open " + path.string());
    std::string line;
    if (!std::getline(is, line) || line != "MSFSEG-MODEL v1")
        throw std::runtime_error("load_model: bad header in " + path.string());
    std::string arch_s, blocks_s;
    int patch_radius = -1, hidden_width = -1, recurrent_size = -1, channels = -1;
    while (std::getline(is, line) && line != "end-header") {
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("load_model: malformed header line: " + line);
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t");
            const auto b = s.find_last_not_of(" \t");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key == "arch") arch_s = value;
        else if (key == "patch_radius") patch_radius = std::stoi(value);
        else if (key == "hidden_width") hidden_width = std::stoi(value);
        else if (key == "recurrent_size") recurrent_size = std::stoi(value);
        else if (key == "input_channels") channels = std::stoi(value);
        else if (key == "blocks") blocks_s = value;
        else throw std::runtime_error("load_model: unknown header key: " + key);
    }
    if (line != "end-header") throw std::runtime_error("load_model: missing end-header");
    ModelParams p = make_layout(arch_from_string(arch_s), channels, patch_radius, hidden_width,
                                recurrent_size);
    std::ostringstream expect;
    for (std::size_t i = 0; i < p.layout.size(); ++i) {
        if (i) expect << ',';
        expect << p.layout[i].name << ':' << p.layout[i].rows << 'x' << p.layout[i].cols;
    }
    if (expect.str() != blocks_s)
        throw std::runtime_error("load_model: block layout mismatch in " + path.string());
    const Lwa1Array arr = read_lwa1_stream(is);
    if (arr.dtype != Lwa1Dtype::Float32 || arr.count() != p.theta.size())
        throw std::runtime_error("load_model: payload mismatch in " + path.string());
    for (std::size_t i = 0; i < p.theta.size(); ++i) p.theta[i] = arr.f32[i];
    return p;
}

Image project_relative(const GridGraph& graph, std::span<const Label> assignment,
                       Label reference_label) {
    if (reference_label < 1)
        throw std::invalid_argument("project_relative: reference label must be >= 1");
    if (assignment.size() != static_cast<std::size_t>(graph.num_nodes()))
        throw std::invalid_argument("project_relative: assignment length != |V|");
    Image proj(graph, 3);
    for (NodeId n = 0; n < graph.num_nodes(); ++n) {
        const Label l = assignment[n];
        proj.at(n, 0) = l == reference_label ? 1.0 : 0.0;
        proj.at(n, 1) = l == 0 ? 1.0 : 0.0;
        proj.at(n, 2) = (l != 0 && l != reference_label) ? 1.0 : 0.0;
    }
    return proj;
}

std::vector<double> extract_patch(const Image& image, NodeId center, int radius) {
    if (radius < 0) throw std::invalid_argument("extract_patch: radius must be >= 0");
    if (center < 0 || center >= image.graph.num_nodes())
        throw std::out_of_range("extract_patch: node out of range");
    const int w = 2 * radius + 1;
    std::vector<double> out(static_cast<std::size_t>(w) * w * image.channels);
    write_image_patch(image, center, radius, out.data());
    return out;
}

double predict_g(const ModelParams& params, const Image& image, NodeId node) {
    if (params.arch != ModelArch::BoundaryProb)
        throw std::invalid_argument("predict_g: wrong architecture");
    if (image.channels != params.input_channels)
        throw std::invalid_argument("predict_g: channel mismatch");
    const StaticView m = static_view(params);
    Eigen::VectorXd x(params.feature_count());
    write_image_patch(image, node, params.patch_radius, x.data());
    Eigen::VectorXd h;
    return sigmoid(static_forward(m, x, h));
}

GTrainResult train_g(std::span<const std::pair<Image, Segmentation>> corpus,
                     const GTrainConfig& config) {
    if (corpus.empty()) throw std::invalid_argument("train_g: empty corpus");
    const int channels = corpus[0].first.channels;
    for (const auto& [img, gt] : corpus) {
        if (img.channels != channels)
            throw std::invalid_argument("train_g: inconsistent channel counts");
        if (!(img.graph == gt.graph))
            throw std::invalid_argument("train_g: image/segmentation dimension mismatch");
    }

    std::vector<std::vector<bool>> targets;
    targets.reserve(corpus.size());
    for (const auto& [img, gt] : corpus) targets.push_back(boundary_mask(gt));

    ModelParams p = make_g_params(channels, config.patch_radius, config.hidden_width,
                                  config.rng_seed);
    std::mt19937_64 gen(config.rng_seed ^ 0x9e3779b97f4a7c15ull);

    const int f = p.feature_count();
    std::vector<double> grad(p.theta.size(), 0.0);
    Eigen::VectorXd x(f), h;
    std::vector<double> trace;
    trace.reserve(config.steps);

    for (int step = 0; step < config.steps; ++step) {
        std::fill(grad.begin(), grad.end(), 0.0);
        double batch_loss = 0.0;
        const StaticView m = static_view(p);
        Eigen::Map<Eigen::MatrixXd> gw1(grad.data() + p.block_info("w1").offset,
                                        p.hidden_width, f);
        Eigen::Map<Eigen::VectorXd> gb1(grad.data() + p.block_info("b1").offset, p.hidden_width);
        Eigen::Map<Eigen::VectorXd> gw2(grad.data() + p.block_info("w2").offset, p.hidden_width);
        double& gb2 = grad[p.block_info("b2").offset];

        for (int b = 0; b < config.batch_size; ++b) {
            const std::size_t img_idx = static_cast<std::size_t>(gen() % corpus.size());
            const Image& img = corpus[img_idx].first;
            const NodeId node = static_cast<NodeId>(gen() % img.graph.num_nodes());
            const double y = targets[img_idx][node] ? 1.0 : 0.0;

            write_image_patch(img, node, p.patch_radius, x.data());
            const double pre = static_forward(m, x, h);
            const double prob = sigmoid(pre);
            batch_loss += -(y * std::log(std::max(prob, 1e-300)) +
                            (1.0 - y) * std::log(std::max(1.0 - prob, 1e-300)));

            const double dpre = prob - y;
            gw2 += dpre * h;
            gb2 += dpre;
            const Eigen::VectorXd da1 =
                (dpre * m.w2).cwiseProduct((1.0 - h.array().square()).matrix());
            gw1 += da1 * x.transpose();
            gb1 += da1;
        }

        const double scale = config.learning_rate / config.batch_size;
        for (std::size_t i = 0; i < p.theta.size(); ++i) p.theta[i] -= scale * grad[i];
        trace.push_back(batch_loss / config.batch_size);
        if (!std::isfinite(trace.back()))
            throw numeric_error("train_g: non-finite loss");
    }
    return {std::move(p), std::move(trace)};
}

Image augment(const Image& image, const ModelParams& g_params) {
    if (g_params.arch != ModelArch::BoundaryProb)
        throw std::invalid_argument("augment: expected a boundary-probability model");
    if (image.channels != g_params.input_channels)
        throw std::invalid_argument("augment: channel mismatch between image and g");
    Image out(image.graph, image.channels + 1);
    for (NodeId n = 0; n < image.graph.num_nodes(); ++n) {
        for (int c = 0; c < image.channels; ++c) out.at(n, c) = image.at(n, c);
        out.at(n, image.channels) = predict_g(g_params, image, n);
    }
    return out;
}

double predict_static(const ModelParams& params, const Image& image, EdgeId e, NodeId u,
                      NodeId v) {
    if (params.arch != ModelArch::Static)
        throw std::invalid_argument("predict_static: wrong architecture");
    if (image.channels != params.input_channels)
        throw std::invalid_argument("predict_static: channel mismatch");
    (void)e;
    const StaticView m = static_view(params);
    Eigen::VectorXd x(params.feature_count());
    write_static_features(params, image, u, v, x.data());
    Eigen::VectorXd h;
    return static_forward(m, x, h);
}

double predict_dynamic(const ModelParams& params, const Image& image, EdgeId e, NodeId u,
                       NodeId v, std::span<const Label> assignment,
                       std::span<const double> hidden_u, std::span<double> hidden_v) {
    if (params.arch != ModelArch::Dynamic)
        throw std::invalid_argument("predict_dynamic: wrong architecture");
    if (image.channels != params.input_channels)
        throw std::invalid_argument("predict_dynamic: channel mismatch");
    if (hidden_u.size() != static_cast<std::size_t>(params.recurrent_size) ||
        hidden_v.size() != static_cast<std::size_t>(params.recurrent_size))
        throw std::invalid_argument("predict_dynamic: hidden state length mismatch");
    if (assignment.size() != static_cast<std::size_t>(image.graph.num_nodes()))
        throw std::invalid_argument("predict_dynamic: assignment length != |V|");
    if (assignment[u] == 0)
        throw std::logic_error("predict_dynamic: source node is unassigned");
    (void)e;

    const GruView m = gru_view(params);
    GruStep s;
    s.x.resize(params.feature_count());
    write_dynamic_features(params, image, u, v, assignment[u],
                           [&](NodeId n) { return assignment[n]; }, s.x.data());
    s.h_prev.resize(params.recurrent_size);
    for (int i = 0; i < params.recurrent_size; ++i) s.h_prev[i] = hidden_u[i];
    gru_forward(m, s);
    for (int i = 0; i < params.recurrent_size; ++i) hidden_v[i] = s.h_new[i];
    return m.wa.dot(s.h_new) + m.ba;
}

double replay_altitude(const ModelParams& params, const GrowthRecord& record, const Image& image,
                       EdgeId edge, int truncation) {
    if (params.arch == ModelArch::Static) {
        if (!record.evaluated(edge))
            throw std::logic_error("replay: edge was never evaluated in the record");
        const NodeId child = child_of_edge(record, edge);
        if (child < 0)
            throw std::logic_error("replay: edge is not a forest edge of the record");
        return predict_static(params, image, edge, record.parent_node[child], child);
    }
    if (params.arch != ModelArch::Dynamic)
        throw std::invalid_argument("replay_altitude: unsupported architecture");
    if (record.hidden_size != params.recurrent_size)
        throw std::invalid_argument("replay_altitude: record hidden size != model r");
    return replay_chain(params, record, image, edge, truncation, nullptr);
}

double replay_structured_loss(const ModelParams& params, std::span<const double> weights,
                              const GrowthRecord& free_rec, const GrowthRecord& constrained_rec,
                              const Image& image, int truncation) {
    if (weights.size() != static_cast<std::size_t>(free_rec.graph.num_edges()))
        throw std::invalid_argument("replay_structured_loss: weight count != |E|");
    double loss = 0.0;
    for (EdgeId e = 0; e < static_cast<EdgeId>(weights.size()); ++e) {
        const double w = weights[e];
        if (w == 0.0) continue;
        const GrowthRecord& rec = w > 0.0 ? constrained_rec : free_rec;
        loss += w * replay_altitude(params, rec, image, e, truncation);
    }
    return loss;
}

std::vector<double> grad_structured(const ModelParams& params, std::span<const double> weights,
                                    const GrowthRecord& free_rec,
                                    const GrowthRecord& constrained_rec, const Image& image,
                                    int truncation) {
    if (weights.size() != static_cast<std::size_t>(free_rec.graph.num_edges()))
        throw std::invalid_argument("grad_structured: weight count != |E|");
    std::vector<double> grad(params.theta.size(), 0.0);

    if (params.arch == ModelArch::Static) {
        const StaticView m = static_view(params);
        Eigen::Map<Eigen::MatrixXd> gw1(grad.data() + params.block_info("w1").offset,
                                        params.hidden_width, params.feature_count());
        Eigen::Map<Eigen::VectorXd> gb1(grad.data() + params.block_info("b1").offset,
                                        params.hidden_width);
        Eigen::Map<Eigen::VectorXd> gw2(grad.data() + params.block_info("w2").offset,
                                        params.hidden_width);
        double& gb2 = grad[params.block_info("b2").offset];
        Eigen::VectorXd x(params.feature_count()), h;
        for (EdgeId e = 0; e < static_cast<EdgeId>(weights.size()); ++e) {
            const double w = weights[e];
            if (w == 0.0) continue;
            const GrowthRecord& rec = w > 0.0 ? constrained_rec : free_rec;
            const NodeId child = child_of_edge(rec, e);
            if (child < 0)
                throw std::logic_error("grad_structured: scored edge missing replay context");
            write_static_features(params, image, rec.parent_node[child], child, x.data());
            static_forward(m, x, h);
            gw2 += w * h;
            gb2 += w;
            const Eigen::VectorXd da1 =
                (w * m.w2).cwiseProduct((1.0 - h.array().square()).matrix());
            gw1 += da1 * x.transpose();
            gb1 += da1;
        }
        return grad;
    }

    if (params.arch != ModelArch::Dynamic)
        throw std::invalid_argument("grad_structured: unsupported architecture");

    const GruView m = gru_view(params);
    GradView g = grad_view(params, grad);
    std::vector<GruStep> steps;
    for (EdgeId e = 0; e < static_cast<EdgeId>(weights.size()); ++e) {
        const double w = weights[e];
        if (w == 0.0) continue;
        const GrowthRecord& rec = w > 0.0 ? constrained_rec : free_rec;
        steps.clear();
        replay_chain(params, rec, image, e, truncation, &steps);

        const Eigen::VectorXd& h_last = steps.back().h_new;
        g.wa += w * h_last;
        *g.ba += w;
        Eigen::VectorXd dh = w * m.wa;
        for (auto it = steps.rbegin(); it != steps.rend(); ++it) gru_backward(m, *it, g, dh);
    }
    return grad;
}

double finite_diff_check(const ModelParams& params,
                         const std::function<double(const ModelParams&)>& loss,
                         std::span<const double> analytic_grad, double epsilon,
                         int sample_coords, std::uint64_t rng_seed) {
    if (analytic_grad.size() != params.theta.size())
        throw std::invalid_argument("finite_diff_check: gradient length != |theta|");
    const std::size_t n = params.theta.size();
    std::vector<std::size_t> coords(n);
    for (std::size_t i = 0; i < n; ++i) coords[i] = i;
    if (static_cast<std::size_t>(sample_coords) < n) {
        std::mt19937_64 gen(rng_seed);
        for (std::size_t i = 0; i < static_cast<std::size_t>(sample_coords); ++i) {
            const std::size_t j = i + gen() % (n - i);
            std::swap(coords[i], coords[j]);
        }
        coords.resize(sample_coords);
    }

    ModelParams work = params;
    double max_rel = 0.0;
    for (std::size_t i : coords) {
        const double saved = work.theta[i];
        work.theta[i] = saved + epsilon;
        const double up = loss(work);
        work.theta[i] = saved - epsilon;
        const double down = loss(work);
        work.theta[i] = saved;
        const double fd = (up - down) / (2.0 * epsilon);
        const double a = analytic_grad[i];
        const double rel = std::abs(a - fd) / std::max(1e-8, std::abs(a) + std::abs(fd));
        max_rel = std::max(max_rel, rel);
    }
    return max_rel;
}

}  // namespace msfseg
