#pragma once

#include <cstdint>
#include <vector>

namespace trait {

// Seeded PRNG with in-house distributions so that streams are reproducible
// byte-for-byte across standard libraries. mt19937_64 output is fully pinned
// by the standard; std::uniform_real_distribution and friends are not.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();

    // Uniform in [0, 1) with 53 random bits.
    double uniform();
    // Uniform in [lo, hi).
    double uniform(double lo, double hi);
    // Uniform integer in [0, n), n > 0.
    std::uint64_t uniform_index(std::uint64_t n);
    // Standard normal via Box-Muller (one draw per call, cached pair).
    double normal();
    double normal(double mean, double stddev);

    // Fisher-Yates permutation of {0, .., n-1}.
    std::vector<std::size_t> permutation(std::size_t n);
    // k distinct indices sampled from {0, .., n-1}, in draw order.
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

private:
    std::uint64_t state_[4]; // xoshiro-style core seeded via splitmix64
    bool has_cached_normal_ = false;
    double cached_normal_ = 0.0;
};

// Deterministic stream splitting: derive a sub-seed for a named role from a
// master seed. Same (seed, tag) always yields the same sub-seed.
std::uint64_t derive_seed(std::uint64_t master, const char* tag);

} // namespace trait
