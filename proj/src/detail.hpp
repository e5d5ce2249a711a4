#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace msfseg::detail {

/// Symmetric reflection of p into [0, n); folds repeatedly so windows wider
/// than the image stay defined.
inline int reflect_index(int p, int n) {
    if (n == 1) return 0;
    while (p < 0 || p >= n) {
        if (p < 0) p = -p - 1;
        if (p >= n) p = 2 * n - 1 - p;
    }
    return p;
}

/// 53-bit mantissa draw in [0,1); platform-stable unlike
/// std::uniform_real_distribution.
inline double uniform_unit(std::mt19937_64& gen) {
    return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

/// Box-Muller standard normals from explicit uniform draws, so streams are
/// reproducible across standard libraries.
class GaussianSampler {
public:
    explicit GaussianSampler(std::uint64_t seed) : gen_(seed) {}

    double next() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform_unit(gen_);
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        const double u2 = uniform_unit(gen_);
        const double mag = std::sqrt(-2.0 * std::log(u1));
        const double two_pi = 6.283185307179586476925286766559;
        spare_ = mag * std::sin(two_pi * u2);
        has_spare_ = true;
        return mag * std::cos(two_pi * u2);
    }

private:
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace msfseg::detail
