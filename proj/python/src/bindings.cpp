// Python bindings for the msfseg core: grid types, region growing, the
// structured loss, synthetic data, and segmentation metrics. Arrays cross
// the boundary as numpy arrays (images HxWxC float64, labels HxW uint32,
// edge maps 1-D float64 in canonical edge order).

#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "msfseg/grid.hpp"
#include "msfseg/grow.hpp"
#include "msfseg/io.hpp"
#include "msfseg/metrics.hpp"
#include "msfseg/models.hpp"
#include "msfseg/oracles.hpp"
#include "msfseg/structured_loss.hpp"
#include "msfseg/synthdata.hpp"
#include "msfseg/trainer.hpp"

namespace py = pybind11;
using namespace msfseg;

namespace {

Image image_from_array(py::array_t<double, py::array::c_style | py::array::forcecast> arr) {
    if (arr.ndim() == 2) {
        Image img(GridGraph(static_cast<int>(arr.shape(0)), static_cast<int>(arr.shape(1))), 1);
        std::copy(arr.data(), arr.data() + arr.size(), img.data.begin());
        return img;
    }
    if (arr.ndim() == 3) {
        Image img(GridGraph(static_cast<int>(arr.shape(0)), static_cast<int>(arr.shape(1))),
                  static_cast<int>(arr.shape(2)));
        std::copy(arr.data(), arr.data() + arr.size(), img.data.begin());
        return img;
    }
    throw std::invalid_argument("image array must be HxW or HxWxC");
}

py::array_t<double> image_to_array(const Image& img) {
    py::array_t<double> arr({img.graph.height(), img.graph.width(), img.channels});
    std::copy(img.data.begin(), img.data.end(), arr.mutable_data());
    return arr;
}

Segmentation labels_from_array(
    py::array_t<std::uint32_t, py::array::c_style | py::array::forcecast> arr) {
    if (arr.ndim() != 2) throw std::invalid_argument("label array must be HxW");
    Segmentation seg(GridGraph(static_cast<int>(arr.shape(0)), static_cast<int>(arr.shape(1))));
    std::copy(arr.data(), arr.data() + arr.size(), seg.labels.begin());
    return seg;
}

py::array_t<std::uint32_t> labels_to_array(const Segmentation& seg) {
    py::array_t<std::uint32_t> arr({seg.graph.height(), seg.graph.width()});
    std::copy(seg.labels.begin(), seg.labels.end(), arr.mutable_data());
    return arr;
}

SeedSet seeds_from_list(const std::vector<std::tuple<int, int, Label>>& entries,
                        const GridGraph& g) {
    SeedSet seeds;
    for (const auto& [row, col, label] : entries) seeds.seeds.push_back({g.node_at(row, col), label});
    seeds.validate(g);
    return seeds;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Seeded minimum-spanning-forest segmentation with learnable altitudes";

    py::class_<GridGraph>(m, "GridGraph")
        .def(py::init<int, int>(), py::arg("height"), py::arg("width"))
        .def_property_readonly("height", &GridGraph::height)
        .def_property_readonly("width", &GridGraph::width)
        .def_property_readonly("num_nodes", &GridGraph::num_nodes)
        .def_property_readonly("num_edges", &GridGraph::num_edges)
        .def("edge_endpoints", &GridGraph::edge_endpoints, py::arg("edge"))
        .def("incident_edges", [](const GridGraph& g, NodeId n) {
            std::vector<std::pair<EdgeId, NodeId>> out;
            for (const auto& inc : g.incident_edges(n)) out.emplace_back(inc.edge, inc.neighbor);
            return out;
        }, py::arg("node"));

    py::class_<GrowthRecord>(m, "GrowthRecord")
        .def_property_readonly("labels",
                               [](const GrowthRecord& r) {
                                   return labels_to_array(segmentation_of(r));
                               })
        .def_property_readonly("path_max",
                               [](const GrowthRecord& r) {
                                   return py::array_t<double>(
                                       static_cast<py::ssize_t>(r.path_max.size()),
                                       r.path_max.data());
                               })
        .def_property_readonly("evaluated_altitude",
                               [](const GrowthRecord& r) {
                                   return py::array_t<double>(
                                       static_cast<py::ssize_t>(r.evaluated_altitude.size()),
                                       r.evaluated_altitude.data());
                               })
        .def("path_to_seed", [](const GrowthRecord& r, NodeId n) { return path_to_seed(r, n); },
             py::arg("node"));

    m.def(
        "grow",
        [](py::array_t<double> image, const std::vector<std::tuple<int, int, Label>>& seeds,
           py::array_t<double, py::array::c_style | py::array::forcecast> altitudes,
           const std::vector<EdgeId>& forbidden) {
            Image img = image_from_array(image);
            const SeedSet seed_set = seeds_from_list(seeds, img.graph);
            if (altitudes.size() != img.graph.num_edges())
                throw std::invalid_argument("altitudes must have one entry per edge");
            const StaticMapProvider provider(
                std::vector<double>(altitudes.data(), altitudes.data() + altitudes.size()));
            return grow(img.graph, img, seed_set, provider, forbidden);
        },
        py::arg("image"), py::arg("seeds"), py::arg("altitudes"),
        py::arg("forbidden") = std::vector<EdgeId>{},
        "Seeded watershed growth over fixed edge altitudes; seeds are (row, col, label)");

    m.def("msf_oracle",
          [](int height, int width,
             py::array_t<double, py::array::c_style | py::array::forcecast> altitudes,
             const std::vector<std::tuple<int, int, Label>>& seeds) {
              const GridGraph g(height, width);
              const SeedSet seed_set = seeds_from_list(seeds, g);
              const Segmentation seg = msf_oracle(
                  g, std::span<const double>(altitudes.data(), altitudes.size()), seed_set);
              return labels_to_array(seg);
          });

    m.def("cut_set", [](py::array_t<std::uint32_t> labels) {
        return cut_set(labels_from_array(labels));
    });
    m.def("boundary_mask", [](py::array_t<std::uint32_t> labels) {
        const Segmentation seg = labels_from_array(labels);
        const std::vector<bool> mask = boundary_mask(seg);
        py::array_t<bool> arr({seg.graph.height(), seg.graph.width()});
        for (std::size_t i = 0; i < mask.size(); ++i) arr.mutable_data()[i] = mask[i];
        return arr;
    });

    m.def("arand",
          [](py::array_t<std::uint32_t> pred, py::array_t<std::uint32_t> gt, double tolerance,
             bool adapted) {
              return arand(labels_from_array(pred), labels_from_array(gt), tolerance, adapted);
          },
          py::arg("pred"), py::arg("gt"), py::arg("tolerance") = 0.0,
          py::arg("adapted") = false);
    m.def("voi",
          [](py::array_t<std::uint32_t> pred, py::array_t<std::uint32_t> gt, double tolerance) {
              return voi(labels_from_array(pred), labels_from_array(gt), tolerance);
          },
          py::arg("pred"), py::arg("gt"), py::arg("tolerance") = 0.0);

    m.def("generate",
          [](int height, int width, double sigma_noise, double sigma_process, double sigma_blur,
             std::uint64_t seed) {
              SynthConfig cfg;
              cfg.height = height;
              cfg.width = width;
              cfg.sigma_noise = sigma_noise;
              cfg.sigma_process = sigma_process;
              cfg.sigma_blur = sigma_blur;
              cfg.rng_seed = seed;
              auto [img, gt] = generate(cfg);
              return py::make_tuple(image_to_array(img), labels_to_array(gt));
          },
          py::arg("height"), py::arg("width"), py::arg("sigma_noise") = 0.3,
          py::arg("sigma_process") = 0.0, py::arg("sigma_blur") = 1.0, py::arg("seed") = 0);

    m.def("seed_oracle", [](py::array_t<std::uint32_t> gt) {
        const Segmentation seg = labels_from_array(gt);
        const SeedSet seeds = seed_oracle(seg);
        std::vector<std::tuple<int, int, Label>> out;
        for (const auto& s : seeds.seeds)
            out.emplace_back(seg.graph.row_of(s.node), seg.graph.col_of(s.node), s.label);
        return out;
    });

    m.def("distance_transform", [](py::array_t<bool, py::array::c_style | py::array::forcecast> mask) {
        if (mask.ndim() != 2) throw std::invalid_argument("mask must be HxW");
        const GridGraph g(static_cast<int>(mask.shape(0)), static_cast<int>(mask.shape(1)));
        std::vector<bool> m_vec(mask.data(), mask.data() + mask.size());
        const std::vector<double> d = distance_transform(g, m_vec);
        py::array_t<double> arr({g.height(), g.width()});
        std::copy(d.begin(), d.end(), arr.mutable_data());
        return arr;
    });

    m.def("smooth_image", [](py::array_t<double> image, double sigma) {
        return image_to_array(smooth_image(image_from_array(image), sigma));
    });

    m.def("dtws_altitudes",
          [](py::array_t<double, py::array::c_style | py::array::forcecast> g_map,
             double threshold) {
              if (g_map.ndim() != 2) throw std::invalid_argument("g_map must be HxW");
              const GridGraph g(static_cast<int>(g_map.shape(0)),
                                static_cast<int>(g_map.shape(1)));
              return dtws_altitudes(
                  g, std::span<const double>(g_map.data(), g_map.size()), threshold);
          });

    m.def("save_image", [](const std::filesystem::path& p, py::array_t<double> img) {
        save_image(p, image_from_array(img));
    });
    m.def("load_image", [](const std::filesystem::path& p) { return image_to_array(load_image(p)); });
    m.def("save_labels", [](const std::filesystem::path& p, py::array_t<std::uint32_t> labels) {
        save_labels(p, labels_from_array(labels));
    });
    m.def("load_labels", [](const std::filesystem::path& p) { return labels_to_array(load_labels(p)); });
}
