#pragma once

#include <cstdint>
#include <random>

namespace coalsim {

/// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Sub-seed for replicate `index` of stream `stream` under `master`:
///   H(m, s, i) = mix64(mix64(mix64(m) ^ s) ^ i).
/// Replicates with the same (master, stream, index) see identical random
/// numbers whatever population size they simulate.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index);

/// Thin wrapper around a 64-bit Mersenne twister with the handful of
/// primitive draws the simulators need. All continuous draws are inverse-CDF
/// transforms of uniform01() so a run is reproducible from its seed alone.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, bound); Lemire's nearly-divisionless method.
    std::uint64_t uniform_index(std::uint64_t bound);

    /// Exp(rate) by inversion.
    double exponential(double rate);

    /// Standard normal (Box-Muller, one variate per call).
    double normal();

    std::mt19937_64& engine() { return engine_; }

  private:
    std::mt19937_64 engine_;
};

}  // namespace coalsim
