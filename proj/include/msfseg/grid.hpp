#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace msfseg {

using NodeId = std::int32_t;
using EdgeId = std::int32_t;
using Label = std::uint32_t;

/// Raised when a computation produces non-finite values; the CLI maps it to
/// its own exit code so callers can tell blow-ups from bad inputs.
struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// 4-connected grid graph. Nodes are indexed row-major (id = row*width+col).
/// Edges are indexed with all horizontal edges (r,c)-(r,c+1) first in
/// row-major order, followed by all vertical edges (r,c)-(r+1,c), also
/// row-major. This indexing is fixed so serialized edge arrays are portable.
class GridGraph {
public:
    GridGraph(int height, int width) : height_(height), width_(width) {
        if (height < 1 || width < 1)
            throw std::invalid_argument("GridGraph: height and width must be positive");
    }

    int height() const { return height_; }
    int width() const { return width_; }

    NodeId num_nodes() const { return static_cast<NodeId>(height_) * width_; }
    EdgeId num_edges() const {
        return static_cast<EdgeId>(height_) * (width_ - 1) +
               static_cast<EdgeId>(height_ - 1) * width_;
    }
    EdgeId num_horizontal_edges() const {
        return static_cast<EdgeId>(height_) * (width_ - 1);
    }

    NodeId node_at(int row, int col) const { return static_cast<NodeId>(row) * width_ + col; }
    int row_of(NodeId n) const { return n / width_; }
    int col_of(NodeId n) const { return n % width_; }

    /// Horizontal edge (r,c)-(r,c+1); requires c < width-1.
    EdgeId horizontal_edge(int row, int col) const {
        return static_cast<EdgeId>(row) * (width_ - 1) + col;
    }
    /// Vertical edge (r,c)-(r+1,c); requires r < height-1.
    EdgeId vertical_edge(int row, int col) const {
        return num_horizontal_edges() + static_cast<EdgeId>(row) * width_ + col;
    }

    bool is_horizontal(EdgeId e) const { return e < num_horizontal_edges(); }

    /// Canonical (lower id, higher id) endpoints of an edge.
    std::pair<NodeId, NodeId> edge_endpoints(EdgeId e) const {
        if (e < 0 || e >= num_edges())
            throw std::out_of_range("edge_endpoints: edge id out of range");
        if (is_horizontal(e)) {
            const int row = e / (width_ - 1);
            const int col = e % (width_ - 1);
            const NodeId u = node_at(row, col);
            return {u, u + 1};
        }
        const EdgeId v = e - num_horizontal_edges();
        const int row = v / width_;
        const int col = v % width_;
        const NodeId u = node_at(row, col);
        return {u, u + width_};
    }

    /// Edge id between two adjacent nodes; throws if not adjacent.
    EdgeId edge_between(NodeId a, NodeId b) const {
        if (a > b) std::swap(a, b);
        const int ra = row_of(a), ca = col_of(a);
        if (b == a + 1 && ca < width_ - 1) return horizontal_edge(ra, ca);
        if (b == a + width_) return vertical_edge(ra, ca);
        throw std::invalid_argument("edge_between: nodes are not adjacent");
    }

    struct Incidence {
        EdgeId edge;
        NodeId neighbor;
    };

    /// Incident edges of a node in left, right, up, down order (existing
    /// only). The fixed order makes tie-breaking downstream deterministic.
    struct IncidenceList {
        std::array<Incidence, 4> items;
        int count = 0;
        const Incidence* begin() const { return items.data(); }
        const Incidence* end() const { return items.data() + count; }
        int size() const { return count; }
        const Incidence& operator[](int i) const { return items[i]; }
    };

    IncidenceList incident_edges(NodeId n) const {
        if (n < 0 || n >= num_nodes())
            throw std::out_of_range("incident_edges: node id out of range");
        const int r = row_of(n), c = col_of(n);
        IncidenceList out;
        if (c > 0) out.items[out.count++] = {horizontal_edge(r, c - 1), n - 1};
        if (c < width_ - 1) out.items[out.count++] = {horizontal_edge(r, c), n + 1};
        if (r > 0) out.items[out.count++] = {vertical_edge(r - 1, c), n - width_};
        if (r < height_ - 1) out.items[out.count++] = {vertical_edge(r, c), n + width_};
        return out;
    }

    bool operator==(const GridGraph& o) const {
        return height_ == o.height_ && width_ == o.width_;
    }

private:
    int height_;
    int width_;
};

/// Multi-channel image on a grid graph; node-major, channel-innermost.
struct Image {
    GridGraph graph;
    int channels = 1;
    std::vector<double> data;

    Image(GridGraph g, int ch)
        : graph(g), channels(ch),
          data(static_cast<std::size_t>(g.num_nodes()) * ch, 0.0) {
        if (ch < 1) throw std::invalid_argument("Image: channels must be positive");
    }
    Image(GridGraph g, int ch, std::vector<double> d) : graph(g), channels(ch), data(std::move(d)) {
        if (ch < 1) throw std::invalid_argument("Image: channels must be positive");
        if (data.size() != static_cast<std::size_t>(g.num_nodes()) * ch)
            throw std::invalid_argument("Image: data length must be |V| * channels");
    }

    double at(NodeId n, int c) const { return data[static_cast<std::size_t>(n) * channels + c]; }
    double& at(NodeId n, int c) { return data[static_cast<std::size_t>(n) * channels + c]; }
};

/// Per-node labeling; label 0 marks an unassigned node. A complete
/// segmentation has no zeros.
struct Segmentation {
    GridGraph graph;
    std::vector<Label> labels;

    explicit Segmentation(GridGraph g)
        : graph(g), labels(static_cast<std::size_t>(g.num_nodes()), 0) {}
    Segmentation(GridGraph g, std::vector<Label> l) : graph(g), labels(std::move(l)) {
        if (labels.size() != static_cast<std::size_t>(g.num_nodes()))
            throw std::invalid_argument("Segmentation: labels length must be |V|");
    }

    bool complete() const {
        for (Label l : labels)
            if (l == 0) return false;
        return true;
    }
    Label max_label() const {
        Label m = 0;
        for (Label l : labels) m = l > m ? l : m;
        return m;
    }
};

/// Ordered seed list; labels must be distinct and consecutive 1..n.
struct SeedSet {
    struct Seed {
        NodeId node;
        Label label;
    };
    std::vector<Seed> seeds;

    std::size_t size() const { return seeds.size(); }

    /// Checks the SeedSet invariants against a graph.
    void validate(const GridGraph& g) const;
};

/// Edges whose endpoints carry different labels, ascending edge id.
/// Requires a complete segmentation.
std::vector<EdgeId> cut_set(const Segmentation& seg);

/// True for nodes with at least one incident cut edge.
std::vector<bool> boundary_mask(const Segmentation& seg);

}  // namespace msfseg
