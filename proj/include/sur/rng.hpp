#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace sur {

// Portable random stream. std::mt19937_64 is bit-specified by the standard;
// the distributions layered on top are implemented here because the standard
// library's distributions are not reproducible across implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();
    // Uniform on [0, 1) with 53 random bits.
    double uniform();
    // Standard normal via Box-Muller; consumes two uniforms per pair.
    double normal();
    // Uniform integer on [0, n). n must be > 0.
    std::size_t uniform_index(std::size_t n);
    bool bernoulli(double p);

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// SplitMix64 finalizer; used to derive independent seeds from (seed, stream).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace sur
