#pragma once

#include <cstdint>
#include <random>

namespace denim {

// Seeded random source. Every randomized operation takes one of these
// explicitly; there is no global RNG state anywhere in the library.
//
// Two usage modes:
//   - stateful draws (normal(), uniform(), ...) advance the engine;
//   - child(salt) derives an independent stream from the *construction* seed,
//     regardless of how many draws were made. Derivation is what makes
//     per-image, per-vote and per-worker streams reproducible and lets
//     composite results (e.g. vote averages) be decomposed in tests.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), gen_(mix(seed)) {}

    std::uint64_t seed() const { return seed_; }

    // Independent stream derived from (seed, salt).
    Rng child(std::uint64_t salt) const { return Rng(mix(seed_ ^ (0x9e3779b97f4a7c15ull * (salt + 1)))); }

    double normal() { return normal_(gen_); }
    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen_); }
    double gamma(double shape, double scale) { return std::gamma_distribution<double>(shape, scale)(gen_); }

    // Uniform integer in [0, n).
    std::uint64_t next_index(std::uint64_t n) { return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(gen_); }

    bool coin() { return std::uniform_int_distribution<int>(0, 1)(gen_) == 1; }

    std::mt19937_64& engine() { return gen_; }

private:
    static std::uint64_t mix(std::uint64_t x) {
        // splitmix64 finalizer
        x += 0x9e3779b97f4a7c15ull;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
        return x ^ (x >> 31);
    }

    std::uint64_t seed_;
    std::mt19937_64 gen_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace denim
