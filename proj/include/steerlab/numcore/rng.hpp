#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace steerlab::numcore {

// Deterministic splitmix64 stream. Identical seed gives an identical
// stream on every platform, which std::mt19937 + libstdc++ distributions
// do not guarantee, so all sampling goes through this.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ull;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53 bits of mantissa.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n). n must be > 0.
    std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

    // Standard normal via Box-Muller; fully deterministic.
    double next_normal() {
        double u1 = next_double();
        double u2 = next_double();
        while (u1 <= 0.0) {
            u1 = next_double();
        }
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    // Fisher-Yates shuffle of indices [0, n).
    std::vector<std::size_t> permutation(std::size_t n) {
        std::vector<std::size_t> idx(n);
        for (std::size_t i = 0; i < n; ++i) {
            idx[i] = i;
        }
        for (std::size_t i = n; i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(next_below(i));
            std::swap(idx[i - 1], idx[j]);
        }
        return idx;
    }

    // Independent child stream keyed by a label; used for per-record and
    // per-cell streams so parallel order never changes results.
    static SeededRng derive(std::uint64_t seed, const std::string& label);

    static constexpr const char* algorithm() { return "splitmix64"; }

private:
    std::uint64_t state_;
};

}  // namespace steerlab::numcore
