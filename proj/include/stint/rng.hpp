#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "common.hpp"

namespace stint {

// Philox4x64-10 counter-based generator. A block is a pure function of
// (counter, key), so replicate r of a run seeded s can draw from its own
// stream key (s, r) with no shared state between threads.

namespace detail {

inline void mulhilo64(std::uint64_t a, std::uint64_t b,
                      std::uint64_t& hi, std::uint64_t& lo) {
    unsigned __int128 p = static_cast<unsigned __int128>(a) * b;
    hi = static_cast<std::uint64_t>(p >> 64);
    lo = static_cast<std::uint64_t>(p);
}

} // namespace detail

/// One Philox4x64-10 block. Counter word 0 is the fastest-moving index.
inline std::array<std::uint64_t, 4> philox4x64(std::array<std::uint64_t, 4> ctr,
                                               std::array<std::uint64_t, 2> key) {
    constexpr std::uint64_t kMul0 = 0xD2E7470EE14C6C93ULL;
    constexpr std::uint64_t kMul1 = 0xCA5A826395121157ULL;
    constexpr std::uint64_t kWeyl0 = 0x9E3779B97F4A7C15ULL;
    constexpr std::uint64_t kWeyl1 = 0xBB67AE8584CAA73BULL;

    for (int round = 0; round < 10; ++round) {
        std::uint64_t hi0, lo0, hi1, lo1;
        detail::mulhilo64(kMul0, ctr[0], hi0, lo0);
        detail::mulhilo64(kMul1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kWeyl0;
        key[1] += kWeyl1;
    }
    return ctr;
}

/// Stateless-keyed random stream: key = (seed, stream), counter = block index.
/// Distinct (seed, stream) pairs give independent streams; identical pairs
/// reproduce the identical sequence on any thread count.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream)
        : key_{seed, stream} {}

    std::uint64_t next_u64() {
        if (pos_ == 4) {
            buf_ = philox4x64({block_, 0, 0, 0}, key_);
            ++block_;
            pos_ = 0;
        }
        return buf_[pos_++];
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform double in (0, 1]; used for strictly positive waiting times.
    double uniform_open0() { return 1.0 - uniform01(); }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Unbiased integer in [0, n) via mask-and-reject.
    std::uint64_t below(std::uint64_t n) {
        if (n <= 1) return 0;
        std::uint64_t mask = ~std::uint64_t{0} >> countl_zero_(n - 1);
        for (;;) {
            std::uint64_t v = next_u64() & mask;
            if (v < n) return v;
        }
    }

    /// Poisson draw. Exact for any mean: inversion-free product method on
    /// chunks of at most 30 (sum of independent Poissons is Poisson).
    std::uint64_t poisson(double mean) {
        if (!(mean >= 0.0)) throw ComputeError("poisson mean must be nonnegative");
        std::uint64_t total = 0;
        while (mean > 30.0) {
            total += poisson_small_(30.0);
            mean -= 30.0;
        }
        return total + poisson_small_(mean);
    }

    /// In-place Fisher-Yates shuffle.
    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    static int countl_zero_(std::uint64_t x) {
        return x == 0 ? 64 : __builtin_clzll(x);
    }

    std::uint64_t poisson_small_(double mean) {
        if (mean <= 0.0) return 0;
        double limit = std::exp(-mean);
        double prod = 1.0;
        std::uint64_t k = 0;
        for (;;) {
            prod *= uniform_open0();
            if (prod <= limit) return k;
            ++k;
        }
    }

    std::array<std::uint64_t, 2> key_;
    std::array<std::uint64_t, 4> buf_{};
    std::uint64_t block_ = 0;
    int pos_ = 4;
};

} // namespace stint
