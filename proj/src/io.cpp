#include "msfseg/io.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>

namespace msfseg {

namespace {

constexpr char kMagic[4] = {'L', 'W', 'A', '1'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw std::runtime_error("LWA1: truncated header");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void write_lwa1(const std::filesystem::path& path, const Lwa1Array& arr) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("LWA1: cannot open for writing: " + path.string());
    write_lwa1_stream(os, arr);
    if (!os) throw std::runtime_error("LWA1: write failed: " + path.string());
}

void write_lwa1_stream(std::ostream& os, const Lwa1Array& arr) {
    os.write(kMagic, 4);
    put_u32(os, kVersion);
    put_u32(os, static_cast<std::uint32_t>(arr.dtype));
    put_u32(os, arr.height);
    put_u32(os, arr.width);
    put_u32(os, arr.channels);
    if (arr.dtype == Lwa1Dtype::Float32) {
        if (arr.f32.size() != arr.count()) throw std::invalid_argument("LWA1: payload size mismatch");
        for (float v : arr.f32) {
            std::uint32_t bits;
            std::memcpy(&bits, &v, 4);
            put_u32(os, bits);
        }
    } else {
        if (arr.u32.size() != arr.count()) throw std::invalid_argument("LWA1: payload size mismatch");
        for (std::uint32_t v : arr.u32) put_u32(os, v);
    }
}

Lwa1Array read_lwa1(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("LWA1: cannot open: " + path.string());
    try {
        return read_lwa1_stream(is);
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string(e.what()) + " in " + path.string());
    }
}

Lwa1Array read_lwa1_stream(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("LWA1: bad magic");
    const std::uint32_t version = get_u32(is);
    if (version != kVersion) throw std::runtime_error("LWA1: unsupported version");
    Lwa1Array arr;
    arr.dtype = static_cast<Lwa1Dtype>(get_u32(is));
    if (arr.dtype != Lwa1Dtype::Float32 && arr.dtype != Lwa1Dtype::Uint32)
        throw std::runtime_error("LWA1: unknown dtype");
    arr.height = get_u32(is);
    arr.width = get_u32(is);
    arr.channels = get_u32(is);
    const std::size_t n = arr.count();
    if (arr.dtype == Lwa1Dtype::Float32) {
        arr.f32.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const std::uint32_t bits = get_u32(is);
            std::memcpy(&arr.f32[i], &bits, 4);
        }
    } else {
        arr.u32.resize(n);
        for (std::size_t i = 0; i < n; ++i) arr.u32[i] = get_u32(is);
    }
    return arr;
}

bool validate_lwa1_header(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) return false;
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0) return false;
    try {
        const std::uint32_t version = get_u32(is);
        const std::uint32_t dtype = get_u32(is);
        const std::uint32_t h = get_u32(is);
        const std::uint32_t w = get_u32(is);
        const std::uint32_t c = get_u32(is);
        if (version != kVersion || dtype > 1) return false;
        if (h == 0 || w == 0 || c == 0) return false;
    } catch (const std::exception&) {
        return false;
    }
    return true;
}

void save_image(const std::filesystem::path& path, const Image& img) {
    Lwa1Array arr;
    arr.dtype = Lwa1Dtype::Float32;
    arr.height = static_cast<std::uint32_t>(img.graph.height());
    arr.width = static_cast<std::uint32_t>(img.graph.width());
    arr.channels = static_cast<std::uint32_t>(img.channels);
    arr.f32.reserve(img.data.size());
    for (double v : img.data) arr.f32.push_back(static_cast<float>(v));
    write_lwa1(path, arr);
}

Image load_image(const std::filesystem::path& path) {
    const Lwa1Array arr = read_lwa1(path);
    if (arr.dtype != Lwa1Dtype::Float32)
        throw std::runtime_error("load_image: expected float32 array: " + path.string());
    Image img(GridGraph(static_cast<int>(arr.height), static_cast<int>(arr.width)),
              static_cast<int>(arr.channels));
    for (std::size_t i = 0; i < arr.f32.size(); ++i) img.data[i] = arr.f32[i];
    return img;
}

void save_labels(const std::filesystem::path& path, const Segmentation& seg) {
    Lwa1Array arr;
    arr.dtype = Lwa1Dtype::Uint32;
    arr.height = static_cast<std::uint32_t>(seg.graph.height());
    arr.width = static_cast<std::uint32_t>(seg.graph.width());
    arr.channels = 1;
    arr.u32.assign(seg.labels.begin(), seg.labels.end());
    write_lwa1(path, arr);
}

Segmentation load_labels(const std::filesystem::path& path) {
    const Lwa1Array arr = read_lwa1(path);
    if (arr.dtype != Lwa1Dtype::Uint32 || arr.channels != 1)
        throw std::runtime_error("load_labels: expected 1-channel uint32 array: " + path.string());
    return Segmentation(GridGraph(static_cast<int>(arr.height), static_cast<int>(arr.width)),
                        std::vector<Label>(arr.u32.begin(), arr.u32.end()));
}

void save_mask(const std::filesystem::path& path, const GridGraph& g, const std::vector<bool>& mask) {
    Lwa1Array arr;
    arr.dtype = Lwa1Dtype::Uint32;
    arr.height = static_cast<std::uint32_t>(g.height());
    arr.width = static_cast<std::uint32_t>(g.width());
    arr.channels = 1;
    arr.u32.reserve(mask.size());
    for (bool b : mask) arr.u32.push_back(b ? 1u : 0u);
    write_lwa1(path, arr);
}

void save_edge_map(const std::filesystem::path& path, std::span<const double> values) {
    Lwa1Array arr;
    arr.dtype = Lwa1Dtype::Float32;
    arr.height = 1;
    arr.width = static_cast<std::uint32_t>(values.size());
    arr.channels = 1;
    arr.f32.reserve(values.size());
    for (double v : values) arr.f32.push_back(static_cast<float>(v));
    write_lwa1(path, arr);
}

std::vector<double> load_edge_map(const std::filesystem::path& path) {
    const Lwa1Array arr = read_lwa1(path);
    if (arr.dtype != Lwa1Dtype::Float32 || arr.height != 1 || arr.channels != 1)
        throw std::runtime_error("load_edge_map: expected 1 x N x 1 float32 array");
    return std::vector<double>(arr.f32.begin(), arr.f32.end());
}

void save_seeds_csv(const std::filesystem::path& path, const GridGraph& g, const SeedSet& seeds) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
    os << "label,row,col\n";
    for (const auto& s : seeds.seeds)
        os << s.label << ',' << g.row_of(s.node) << ',' << g.col_of(s.node) << '\n';
}

SeedSet load_seeds_csv(const std::filesystem::path& path, const GridGraph& g) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open: " + path.string());
    std::string line;
    if (!std::getline(is, line) || line.rfind("label,row,col", 0) != 0)
        throw std::runtime_error("seeds csv: missing header in " + path.string());
    SeedSet set;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string f0, f1, f2;
        if (!std::getline(ss, f0, ',') || !std::getline(ss, f1, ',') || !std::getline(ss, f2, ','))
            throw std::runtime_error("seeds csv: malformed row: " + line);
        const Label label = static_cast<Label>(std::stoul(f0));
        const int row = std::stoi(f1);
        const int col = std::stoi(f2);
        set.seeds.push_back({g.node_at(row, col), label});
    }
    set.validate(g);
    return set;
}

}  // namespace msfseg
