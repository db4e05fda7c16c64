#ifndef CDF_RNG_HPP
#define CDF_RNG_HPP

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace cdf {

/// splitmix64 step; used to derive independent seed streams.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Deterministic child seed for a named stream (per center, per repetition...).
/// Stable across platforms; never depends on evaluation order.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    return splitmix64(master ^ splitmix64(stream + 0x51ed2701a79b3d2fULL));
}

/// Deterministic generator. std::*_distribution is implementation-defined,
/// so all sampling is done here from raw xoshiro-style bits.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        // expand the seed into state via splitmix64
        std::uint64_t x = seed;
        for (auto& s : state_) {
            x = splitmix64(x);
            s = x;
        }
    }

    std::uint64_t next_u64() {
        // xoshiro256**
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform with zero mean and the requested standard deviation
    /// (half-width sigma * sqrt(3)).
    double uniform_sigma(double sigma) {
        const double half = sigma * std::sqrt(3.0);
        return uniform(-half, half);
    }

    /// Standard normal via Box-Muller.
    double normal() {
        const double u1 = 1.0 - uniform(); // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * std::numbers::pi * u2);
    }

    /// Uniform index in [0, n); n must be > 0.
    std::size_t index(std::size_t n) {
        return static_cast<std::size_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    /// In-place Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[index(i)]);
        }
    }

    /// k distinct indices drawn from [0, n), in draw order.
    std::vector<std::size_t> distinct_indices(std::size_t k, std::size_t n) {
        std::vector<std::size_t> pool(n);
        for (std::size_t i = 0; i < n; ++i) pool[i] = i;
        shuffle(pool);
        pool.resize(k);
        return pool;
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }
    std::uint64_t state_[4];
};

} // namespace cdf

#endif // CDF_RNG_HPP
