#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "coalsim/genealogy.hpp"
#include "coalsim/kingman.hpp"
#include "coalsim/replicates.hpp"

namespace coalsim {

/// One-sample Kolmogorov-Smirnov distance sup_x |F_R(x) - F(x)|, evaluated
/// at the sorted samples with both one-sided gaps. Throws for an empty sample.
double ks_statistic(std::span<const double> samples, const std::function<double(double)>& cdf);

/// Quantile q of the KS statistic under the null for a sample of size R.
/// The null law does not depend on the (continuous) target, so it is
/// estimated from `trials` uniform samples.
double ks_null_quantile(std::size_t R, double q, std::size_t trials, std::uint64_t seed);

inline constexpr std::size_t kMinTestReplicates = 100;

struct LevelTest {
    std::size_t blocks = 0;  // level k
    double rate = 0.0;       // k(k-1)/2
    std::size_t samples = 0;
    double ks = 0.0;
};

struct HoldingTimeTest {
    /// Level n first, down to level 2.
    std::vector<LevelTest> levels;
    /// Sample correlation of the sojourns at levels k and k-1, for
    /// k = n..3, over paths that visited both.
    std::vector<double> consecutive_correlation;
};

/// KS of the sojourn at each level k = n..2 against Exp(k(k-1)/2), over
/// the paths that entered level k and left it. The first entry is the first
/// holding time against Exp(n(n-1)/2). Levels with fewer than
/// kMinTestReplicates samples are reported with ks = 1. Throws if fewer than
/// kMinTestReplicates paths are given.
HoldingTimeTest holding_time_test(std::span<const PathStatistics> paths, std::size_t n);
/// The same with every level tested against one `rate`.
HoldingTimeTest holding_time_test(std::span<const PathStatistics> paths, std::size_t n, double rate);

/// KS of the m-th jump time of the coupled counter against
/// Erlang(m, n(n-1)/2), over the sequences with at least m jumps. Throws if
/// fewer than kMinTestReplicates sequences qualify or m == 0.
struct JumpTimeTest {
    unsigned m = 0;
    std::size_t samples = 0;
    double ks = 0.0;
};
JumpTimeTest jump_time_test(std::span<const std::vector<double>> counter_jumps, std::size_t n, unsigned m);

/// A merger is multiple when some new block absorbs three or more old ones,
/// or two or more new blocks form in the same event.
bool is_multiple_merger(const Partition& before, const Partition& after);

struct MergerFraction {
    std::size_t events = 0;
    std::size_t multiple = 0;
    double fraction() const { return events ? static_cast<double>(multiple) / static_cast<double>(events) : 0.0; }
};

/// Throws when the paths contain no events at all.
MergerFraction multiple_merger_fraction(std::span<const GenealogyPath> paths);
MergerFraction multiple_merger_fraction(std::span<const CoalescentPath> paths);

struct MeanEstimate {
    double mean = 0.0;
    double stderr_ = 0.0;
};

MeanEstimate mean_estimate(std::span<const double> values);

struct AsymptoticRow {
    std::size_t N = 0;
    std::size_t used = 0;
    std::size_t censored = 0;
    MeanEstimate c_tau;
    MeanEstimate sum_c2;
    MeanEstimate sum_d;
};

struct AsymptoticDiagnostics {
    std::vector<AsymptoticRow> rows;  // in the given N order
    bool c_tau_decreasing = false;
    bool sum_c2_decreasing = false;
    bool sum_d_decreasing = false;
};

/// Per-N means of the clock diagnostics; replicates without diagnostics are
/// excluded and counted. Verdicts are "strictly decreasing along the rows".
AsymptoticDiagnostics asymptotic_diagnostics(std::span<const std::size_t> N_grid,
                                             std::span<const std::vector<ReplicateResult>> runs);

bool strictly_decreasing(std::span<const double> values);

/// Generator of Kingman's n-coalescent over enumerate_partitions(n).
std::vector<std::vector<double>> kingman_generator(std::size_t n);

/// exp(tQ) by scaling and squaring with a Taylor series truncated once the
/// tail bound falls below 1e-12.
std::vector<std::vector<double>> matrix_exponential(const std::vector<std::vector<double>>& Q, double t);

/// Law of the n-coalescent at time t started from the singletons, indexed
/// like enumerate_partitions(n). Throws for n > 6.
std::vector<double> kingman_marginal(std::size_t n, double t);

/// State of a Kingman path at time t.
Partition state_at(const CoalescentPath& path, double t);

inline constexpr std::size_t kMinFddReplicates = 1000;

/// Total-variation distance between the empirical law of the path at each
/// time and the exact Kingman marginal. Throws for n > 6 or fewer than
/// kMinFddReplicates paths.
std::vector<double> fdd_compare(std::span<const GenealogyPath> paths, std::size_t n, std::span<const double> times);
std::vector<double> fdd_compare(std::span<const CoalescentPath> paths, std::size_t n, std::span<const double> times);

/// Empirical q-quantile by linear interpolation of the sorted sample.
double quantile(std::vector<double> values, double q);

}  // namespace coalsim
