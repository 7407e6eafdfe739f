#pragma once

#include <cstdint>

namespace qgraph {

/// 64-bit linear congruential generator (Knuth's MMIX multiplier
/// 6364136223846793005 and increment 1442695040888963407), used everywhere a
/// reproducible stream is needed.
class Lcg64 {
public:
    explicit Lcg64(std::uint64_t seed = 1) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ = state_ * 6364136223846793005ull + 1442695040888963407ull;
        return state_;
    }

    /// Uniform double in [0, 1) from the top 53 bits.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform integer in [0, n).
    std::uint64_t next_below(std::uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

private:
    std::uint64_t state_;
};

} // namespace qgraph
