#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "coalsim/genealogy.hpp"
#include "coalsim/particle.hpp"

namespace coalsim {

/// One forward-weights / backward-lineages simulation of an n-sample from a
/// population of N particles.
struct ReplicateSpec {
    std::size_t n = 2;
    std::size_t N = 100;
    ResamplingScheme scheme = ResamplingScheme::multinomial;
    WeightModelConfig weights;
    double t_max = 20.0;   // horizon in rescaled time
    double diag_t = 1.0;   // time at which the clock diagnostics are read
    std::size_t hard_cap = 1'000'000;
    bool record_clock = false;

    /// Throws std::invalid_argument on inconsistent fields.
    void validate() const;
};

/// c(tau(t)), sum_{r <= tau(t)} c(r)^2 and sum_{r <= tau(t)} D(r).
struct ClockDiagnostics {
    double c_tau = 0.0;
    double sum_c2 = 0.0;
    double sum_d = 0.0;
};

struct ReplicateResult {
    std::uint64_t seed = 0;
    GenealogyPath path;
    /// Rescaled jump times of the coupled counter Z, up to the last simulated
    /// generation.
    std::vector<double> counter_jumps;
    std::optional<ClockDiagnostics> diagnostics;
    std::size_t generations = 0;
    double end_time = 0.0;  // cum after the last simulated generation
    /// The hard cap was hit before the path ended or the diagnostics were read.
    bool censored = false;
    std::vector<ClockRecord> clock;  // only with record_clock
};

/// Runs one replicate from its own seed. Generation g (g = 1, 2, ...) holds
/// the parents of generation g - 1; weights evolve as a Markov chain in g.
/// The simulation stops once the sample has coalesced and the clock passed
/// diag_t, when the clock passes t_max, or at hard_cap generations.
/// Throws ConsistencyError when a generation violates 0 <= d <= c <= 1.
ReplicateResult simulate_replicate(const ReplicateSpec& spec, std::uint64_t seed);

/// Replicate r uses derive_seed(master, stream, r). N is not part of the
/// seed, so runs at different N share random streams replicate by replicate.
std::vector<ReplicateResult> run_replicates_serial(const ReplicateSpec& spec, std::uint64_t master,
                                                   std::uint64_t stream, std::size_t replicates);

/// OpenMP version; bit-identical to the serial one for any worker count.
/// workers == 0 uses the OpenMP default.
std::vector<ReplicateResult> run_replicates_parallel(const ReplicateSpec& spec, std::uint64_t master,
                                                     std::uint64_t stream, std::size_t replicates,
                                                     unsigned workers);

/// Kingman paths with counters, replicate r seeded like the above.
std::vector<CountedCoalescentPath> run_kingman_replicates(std::size_t n, std::size_t min_counter_jumps,
                                                          std::uint64_t master, std::uint64_t stream,
                                                          std::size_t replicates, unsigned workers);

}  // namespace coalsim
