#include "coalsim/replicates.hpp"

#include <cmath>
#include <exception>
#include <numeric>
#include <stdexcept>

#include <omp.h>

#include "coalsim/errors.hpp"
#include "coalsim/exactprob.hpp"
#include "coalsim/kingman.hpp"

namespace coalsim {

void ReplicateSpec::validate() const {
    if (n < 2) throw std::invalid_argument("sample size n must be at least 2");
    if (N < 2) throw std::invalid_argument("population N must be at least 2");
    if (n > N) throw std::invalid_argument("sample size exceeds population");
    if (!(t_max > 0.0) || !std::isfinite(t_max)) throw std::invalid_argument("t_max must be positive");
    if (!(diag_t > 0.0) || diag_t > t_max) throw std::invalid_argument("diag_t must lie in (0, t_max]");
    if (hard_cap == 0) throw std::invalid_argument("hard_cap must be positive");
    weights.potential.validate();
    if (weights.model == WeightModel::inherited_fitness && !(weights.heritability >= 0.0))
        throw std::invalid_argument("heritability must be non-negative");
}

namespace {

std::vector<std::uint32_t> draw_sample(std::size_t n, std::size_t N, Rng& rng) {
    std::vector<std::uint32_t> pool(N);
    std::iota(pool.begin(), pool.end(), 0u);
    for (std::size_t j = 0; j < n; ++j) std::swap(pool[j], pool[j + rng.uniform_index(N - j)]);
    pool.resize(n);
    return pool;
}

void check_rates(const CoalescenceRates& r, std::size_t g) {
    if (!(r.d >= 0.0 && r.d <= r.c && r.c <= 1.0))
        throw ConsistencyError("generation " + std::to_string(g) + " violates 0 <= d <= c <= 1 (c=" +
                               format_real(r.c) + ", d=" + format_real(r.d) + ")");
}

}  // namespace

ReplicateResult simulate_replicate(const ReplicateSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng(seed);
    ReplicateResult out;
    out.seed = seed;
    out.path.n = spec.n;
    out.path.population = spec.N;

    const auto sample = draw_sample(spec.n, spec.N, rng);
    LineageTracker tracker(sample);
    WeightState w = initial_weights(spec.weights, spec.N, rng);
    const bool static_weights =
        spec.weights.model == WeightModel::constant || spec.weights.model == WeightModel::point_mass;

    long double running = 0.0L;
    double cum = 0.0;
    long double sum_c2 = 0.0L;
    long double sum_d = 0.0L;
    bool coalesced = false;
    std::vector<std::uint32_t> scratch, parents;
    ParentAssignment full;

    std::size_t g = 0;
    while (true) {
        const bool diag_ready = out.diagnostics.has_value();
        if (coalesced && diag_ready) break;
        if (!coalesced && cum >= spec.t_max) {
            out.path.end = PathEnd::horizon;
            break;
        }
        if (g >= spec.hard_cap) {
            out.censored = true;
            if (!coalesced) out.path.end = PathEnd::censored;
            break;
        }
        ++g;
        const OffspringCounts nu = generate_offspring(spec.scheme, w, rng);
        const CoalescenceRates rates = coalescence_rates(nu);
        check_rates(rates, g);
        const double event_time = cum;
        running += rates.c;
        cum = static_cast<double>(running);
        sum_c2 += static_cast<long double>(rates.c) * rates.c;
        sum_d += rates.d;
        if (spec.record_clock) out.clock.push_back({g, rates.c, rates.d, cum});
        if (!diag_ready && cum >= spec.diag_t)
            out.diagnostics = ClockDiagnostics{rates.c, static_cast<double>(sum_c2), static_cast<double>(sum_d)};

        const std::size_t k = tracker.block_count();
        bool merged = false;
        if (!coalesced) {
            if (spec.weights.needs_parents()) {
                full = assign_parents(nu, rng);
                parents.clear();
                for (auto pos : tracker.positions()) parents.push_back(full.parents[pos]);
            } else {
                sample_lineage_parents(nu, k, rng, scratch, parents);
            }
            merged = tracker.step(parents);
            if (merged) {
                out.path.events.push_back({g, event_time, tracker.partition()});
                if (tracker.block_count() == 1) {
                    coalesced = true;
                    out.path.end = PathEnd::coalesced;
                    out.path.generations_traced = g;
                    out.path.end_time = cum;
                }
            }
        } else if (spec.weights.needs_parents()) {
            full = assign_parents(nu, rng);
        }

        // Counter of the coupled chain: it jumps with every partition change
        // and, otherwise, with probability (p_kk - p_nn) / p_kk.
        if (merged) {
            out.counter_jumps.push_back(event_time);
        } else {
            const auto identity = identity_probabilities(spec.n, nu);
            const double p_kk = identity[k];
            const double p_nn = identity[spec.n];
            if (p_kk > p_nn && rng.uniform01() * p_kk < p_kk - p_nn) out.counter_jumps.push_back(event_time);
        }

        if (!static_weights) w = evolve_weights(spec.weights, w, spec.weights.needs_parents() ? &full : nullptr, rng);
    }
    out.generations = g;
    out.end_time = cum;
    if (!coalesced) {
        out.path.generations_traced = g;
        out.path.end_time = cum;
    }
    return out;
}

std::vector<ReplicateResult> run_replicates_serial(const ReplicateSpec& spec, std::uint64_t master,
                                                   std::uint64_t stream, std::size_t replicates) {
    std::vector<ReplicateResult> results;
    results.reserve(replicates);
    for (std::size_t r = 0; r < replicates; ++r) results.push_back(simulate_replicate(spec, derive_seed(master, stream, r)));
    return results;
}

namespace {

// Runs body(r) for r < count on an OpenMP team and rethrows the exception of
// the lowest failing index, so failures are reported deterministically.
template <typename Body>
void parallel_for_replicates(std::size_t count, unsigned workers, Body body) {
    std::vector<std::exception_ptr> errors(count);
    const int threads = workers == 0 ? omp_get_max_threads() : static_cast<int>(workers);
    const auto total = static_cast<long long>(count);
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
    for (long long r = 0; r < total; ++r) {
        try {
            body(static_cast<std::size_t>(r));
        } catch (...) {
            errors[static_cast<std::size_t>(r)] = std::current_exception();
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace

std::vector<ReplicateResult> run_replicates_parallel(const ReplicateSpec& spec, std::uint64_t master,
                                                     std::uint64_t stream, std::size_t replicates,
                                                     unsigned workers) {
    spec.validate();
    std::vector<ReplicateResult> results(replicates);
    parallel_for_replicates(replicates, workers, [&](std::size_t r) {
        results[r] = simulate_replicate(spec, derive_seed(master, stream, r));
    });
    return results;
}

std::vector<CountedCoalescentPath> run_kingman_replicates(std::size_t n, std::size_t min_counter_jumps,
                                                          std::uint64_t master, std::uint64_t stream,
                                                          std::size_t replicates, unsigned workers) {
    std::vector<CountedCoalescentPath> paths(replicates);
    parallel_for_replicates(replicates, workers, [&](std::size_t r) {
        Rng rng(derive_seed(master, stream, r));
        paths[r] = simulate_kingman_counted(n, min_counter_jumps, rng);
    });
    return paths;
}

}  // namespace coalsim
