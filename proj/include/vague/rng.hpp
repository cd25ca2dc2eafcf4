#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace vague::nn {

// Deterministic splittable PRNG (splitmix64 core).
//
// Every stochastic routine in this library takes an Rng explicitly; the same
// seed produces the same stream on every platform, which is what makes
// training runs and CLI outputs reproducible byte for byte.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : seed_(seed), state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform double in [0, 1), 53 bits of entropy.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform index in [0, n); n must be positive.
    std::size_t uniform_index(std::size_t n) {
        return static_cast<std::size_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    // Independent generator derived from this one's seed and a stream id.
    // Splitting is a pure function of (seed, stream): it does not advance
    // or depend on this generator's state.
    Rng split(std::uint64_t stream) const {
        std::uint64_t z = seed_ ^ ((stream + 1) * 0xD1B54A32D192ED03ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return Rng(z ^ (z >> 31));
    }

    std::uint64_t seed() const { return seed_; }

    // Fisher-Yates shuffle driven by this generator (std::shuffle is not
    // portable across standard library implementations).
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = uniform_index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

  private:
    std::uint64_t seed_;
    std::uint64_t state_;
};

} // namespace vague::nn
