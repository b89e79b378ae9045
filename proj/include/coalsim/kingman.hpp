#pragma once

#include <cstddef>
#include <vector>

#include "coalsim/partition.hpp"
#include "coalsim/rng.hpp"

namespace coalsim {

struct CoalescentEvent {
    double time = 0.0;
    Partition partition;
};

/// Path of Kingman's n-coalescent. Starts implicitly at (0, singletons);
/// exactly n-1 binary merger events, strictly increasing times, last event
/// reaches the single block.
struct CoalescentPath {
    std::size_t n = 0;
    std::vector<CoalescentEvent> events;
};

/// The same path together with the jump times of the dominating counter: a
/// Poisson clock of rate n(n-1)/2 that is thinned to produce the mergers.
/// Every merger is a counter jump; the counter keeps ticking after the path
/// is absorbed. Counter jump m is Erlang(m, n(n-1)/2).
struct CountedCoalescentPath {
    CoalescentPath path;
    std::vector<double> counter_jumps;
};

/// n(n-1)/2.
double pair_count(std::size_t blocks);

/// Exact n-coalescent: Exp(k(k-1)/2) holding times by inversion, merging pair
/// uniform over the k(k-1)/2 pairs. Throws for n < 2.
CoalescentPath simulate_kingman(std::size_t n, Rng& rng);

/// Uniformized construction with at least `min_counter_jumps` counter jumps
/// (and always until absorption). Throws for n < 2.
CountedCoalescentPath simulate_kingman_counted(std::size_t n, std::size_t min_counter_jumps, Rng& rng);

enum class CdfKind { exponential, erlang };

/// Exponential CDF 1 - e^{-rate t}, or the Erlang(m, rate) CDF
///   1 - e^{-rate t} sum_{i<m} (rate t)^i / i!.
/// The shape m is ignored for the exponential. Throws for rate <= 0, m == 0
/// or t < 0.
double theoretical_cdf(CdfKind kind, double rate, unsigned m, double t);

}  // namespace coalsim
