#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "msfseg/grid.hpp"

namespace msfseg {

/// LWA1 array container: bytes 0-3 magic "LWA1", then little-endian u32
/// fields version(=1), dtype (0 = float32, 1 = uint32), height, width,
/// channels, then the row-major payload, channel-innermost.
enum class Lwa1Dtype : std::uint32_t { Float32 = 0, Uint32 = 1 };

struct Lwa1Array {
    Lwa1Dtype dtype = Lwa1Dtype::Float32;
    std::uint32_t height = 0;
    std::uint32_t width = 0;
    std::uint32_t channels = 0;
    std::vector<float> f32;        // populated when dtype == Float32
    std::vector<std::uint32_t> u32;  // populated when dtype == Uint32

    std::size_t count() const {
        return static_cast<std::size_t>(height) * width * channels;
    }
};

void write_lwa1(const std::filesystem::path& path, const Lwa1Array& arr);
Lwa1Array read_lwa1(const std::filesystem::path& path);

// Stream variants; the model file format embeds an LWA1 block after its
// text header.
void write_lwa1_stream(std::ostream& os, const Lwa1Array& arr);
Lwa1Array read_lwa1_stream(std::istream& is);

/// Cheap header check used by the CLI after writing each output.
bool validate_lwa1_header(const std::filesystem::path& path);

// Typed helpers over the container.
void save_image(const std::filesystem::path& path, const Image& img);
Image load_image(const std::filesystem::path& path);

void save_labels(const std::filesystem::path& path, const Segmentation& seg);
Segmentation load_labels(const std::filesystem::path& path);

void save_mask(const std::filesystem::path& path, const GridGraph& g, const std::vector<bool>& mask);

/// Edge-valued maps serialize as a 1 x |E| x 1 float32 array in canonical
/// edge order.
void save_edge_map(const std::filesystem::path& path, std::span<const double> values);
std::vector<double> load_edge_map(const std::filesystem::path& path);

// Seed CSV (header "label,row,col") and corpus manifest.
void save_seeds_csv(const std::filesystem::path& path, const GridGraph& g, const SeedSet& seeds);
SeedSet load_seeds_csv(const std::filesystem::path& path, const GridGraph& g);

}  // namespace msfseg
