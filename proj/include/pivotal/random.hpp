#pragma once
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include <pivotal/core/matrix.hpp>

namespace pivotal {

/**
 * Counter-based pseudo random stream.
 *
 * Draw k of stream (seed, stream) is splitmix64(key + (k + 1) * 0x9E3779B97F4A7C15)
 * where key = splitmix64(seed ^ splitmix64(stream)). Any draw can be computed
 * without touching the others, so replicates keyed by (seed, index) use
 * disjoint streams with no shared state.
 *
 * Gaussians use the Box-Muller transform on two 53-bit uniforms; the pair is
 * consumed in order (cos branch first, then sin branch).
 */
class CounterRng
{
public:
    static constexpr std::uint64_t golden = 0x9E3779B97F4A7C15ULL;

    CounterRng(std::uint64_t seed, std::uint64_t stream)
        : key_(mix(seed ^ mix(stream)))
    {}

    static constexpr std::uint64_t mix(std::uint64_t z)
    {
        z += golden;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    std::uint64_t next_u64()
    {
        ++counter_;
        return mix(key_ + counter_ * golden);
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform()
    {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform integer in [0, bound) by rejection (unbiased).
    std::uint64_t uniform_index(std::uint64_t bound)
    {
        const std::uint64_t limit = bound * (UINT64_MAX / bound);
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % bound;
    }

    double gaussian()
    {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    /// rows x cols matrix of standard Gaussians, filled row by row.
    Matrix gaussian_matrix(Index rows, Index cols)
    {
        Matrix m(rows, cols);
        for (Index i = 0; i < rows; ++i)
            for (Index j = 0; j < cols; ++j) m(i, j) = gaussian();
        return m;
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// k distinct indices of [0, n), in draw order, via partial Fisher-Yates.
inline std::vector<Index> sample_without_replacement(CounterRng& rng, Index n, Index k)
{
    std::vector<Index> pool(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i;
    for (Index i = 0; i < k; ++i) {
        const auto j = i + static_cast<Index>(rng.uniform_index(static_cast<std::uint64_t>(n - i)));
        std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
    }
    pool.resize(static_cast<std::size_t>(k));
    return pool;
}

} // namespace pivotal
