#include "coalsim/kingman.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

namespace coalsim {

namespace {

// Maps a uniform pair index in [0, k(k-1)/2) to blocks (i, j), i < j, in the
// enumeration order (0,1), (0,2), ..., (0,k-1), (1,2), ...
std::array<std::size_t, 2> pair_from_index(std::size_t k, std::size_t idx) {
    std::size_t i = 0;
    while (idx >= k - 1 - i) {
        idx -= k - 1 - i;
        ++i;
    }
    return {i, i + 1 + idx};
}

Partition merge_random_pair(const Partition& p, Rng& rng) {
    const std::size_t k = p.block_count();
    const auto pairs = static_cast<std::uint64_t>(k * (k - 1) / 2);
    const auto ij = pair_from_index(k, static_cast<std::size_t>(rng.uniform_index(pairs)));
    return merge_blocks(p, ij);
}

}  // namespace

double pair_count(std::size_t blocks) {
    return 0.5 * static_cast<double>(blocks) * static_cast<double>(blocks - 1);
}

CoalescentPath simulate_kingman(std::size_t n, Rng& rng) {
    if (n < 2) throw std::invalid_argument("n-coalescent needs n >= 2");
    CoalescentPath path{n, {}};
    path.events.reserve(n - 1);
    Partition state = Partition::singletons(n);
    double time = 0.0;
    while (state.block_count() > 1) {
        time += rng.exponential(pair_count(state.block_count()));
        state = merge_random_pair(state, rng);
        path.events.push_back({time, state});
    }
    return path;
}

CountedCoalescentPath simulate_kingman_counted(std::size_t n, std::size_t min_counter_jumps, Rng& rng) {
    if (n < 2) throw std::invalid_argument("n-coalescent needs n >= 2");
    const double alpha = pair_count(n);
    CountedCoalescentPath out{{n, {}}, {}};
    Partition state = Partition::singletons(n);
    double time = 0.0;
    while (state.block_count() > 1 || out.counter_jumps.size() < min_counter_jumps) {
        time += rng.exponential(alpha);
        out.counter_jumps.push_back(time);
        if (state.block_count() > 1 && rng.uniform01() * alpha < pair_count(state.block_count())) {
            state = merge_random_pair(state, rng);
            out.path.events.push_back({time, state});
        }
    }
    return out;
}

double theoretical_cdf(CdfKind kind, double rate, unsigned m, double t) {
    if (!(rate > 0.0)) throw std::invalid_argument("rate must be positive");
    if (t < 0.0) throw std::invalid_argument("t must be non-negative");
    const double x = rate * t;
    if (kind == CdfKind::exponential) return -std::expm1(-x);
    if (m == 0) throw std::invalid_argument("Erlang shape must be >= 1");
    if (m == 1) return -std::expm1(-x);
    double term = 1.0;
    double sum = 1.0;
    for (unsigned i = 1; i < m; ++i) {
        term *= x / static_cast<double>(i);
        sum += term;
    }
    const double cdf = 1.0 - std::exp(-x) * sum;
    return cdf < 0.0 ? 0.0 : (cdf > 1.0 ? 1.0 : cdf);
}

}  // namespace coalsim
