#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace acorsis {

namespace detail {

inline std::uint64_t splitmix64_next(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace detail

/// Fold an ordered list of 64-bit parts into one stream seed. Used to derive
/// independent, order-insensitive-to-scheduling streams per replicate: the
/// stream identity depends only on the parts, never on execution order.
inline std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts) {
    std::uint64_t h = 0x6a09e667f3bcc909ULL;
    for (std::uint64_t part : parts) {
        std::uint64_t s = h ^ part;
        h = detail::splitmix64_next(s);
    }
    return h;
}

/// Deterministic random stream: mt19937_64 core (bit-exact across platforms)
/// plus a polar-method normal sampler owned here so draws do not depend on
/// the standard library's unspecified normal_distribution.
class RngStream {
  public:
    explicit RngStream(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t bits() { return eng_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    /// Standard normal via Marsaglia polar; caches the spare deviate.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double factor = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * factor;
        has_spare_ = true;
        return u * factor;
    }

  private:
    std::mt19937_64 eng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace acorsis
