#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "coalsim/exactprob.hpp"
#include "coalsim/genealogy.hpp"
#include "coalsim/particle.hpp"

namespace coalsim {

/// Outcome of evaluating one inequality over many inputs. Margins are
/// rhs - lhs for "lhs <= rhs" plus a rounding allowance (zero for the checks
/// done in exact arithmetic), so violations == 0 implies worst_margin >= 0.
struct BoundReport {
    std::string name;
    std::size_t trials = 0;
    std::size_t violations = 0;
    double worst_margin = std::numeric_limits<double>::infinity();
    std::string witness;
    std::map<std::string, double> constants;  // fitted constants, if any

    /// Records one evaluation. The witness always describes the input with
    /// the smallest margin; `describe` only runs when that changes.
    template <typename Describe>
    void record(double margin, Describe describe) {
        ++trials;
        if (margin < 0.0) ++violations;
        if (margin < worst_margin) {
            worst_margin = margin;
            witness = describe();
        }
    }
};

/// Adds `from` into `into` (same inequality, more trials).
void absorb(BoundReport& into, const BoundReport& from);

/// Rounding allowance used by the floating-point checkers.
inline constexpr double kBoundSlack = 1e-12;

/// Properties of a clock: (a) 0 <= d <= c <= 1 per generation,
/// (b) t - (s+1) 1{s>0} <= sum_{r=tau(s)+1}^{tau(t)} c(r) <= t + 1 and
/// (c) tau(t) >= t per grid pair (s, t). Returns the three reports in that
/// order. Throws std::invalid_argument for a pair with t <= s and
/// HorizonExceeded when the clock never reaches t.
std::vector<BoundReport> check_cn_properties(const CoalescenceClock& clock,
                                             std::span<const std::pair<double, double>> grid);

/// Envelopes of p_kk over a corpus:
///   lower  p_kk >= 1 - C(k,2) N^{k-2}/(N-2)_{k-2} [c + B_k d],
///          B_k = K (k-1)! (k-2) exp(2 sqrt(2(k-2))), smallest K >= 0 fitted;
///   upper  p_kk <= 1 - (1 - M/N) C(k,2) [c - C(k-1,2) d], largest
///          1 - M/N fitted per N with M >= 0.
/// Rows with N <= 2 or N < k are skipped. Fitted K and every M_N are in
/// `constants` (keys "K" and "M_N=<N>"). Returns {lower, upper}.
std::vector<BoundReport> check_identity_envelopes(std::span<const OffspringCounts> corpus, std::size_t k);

/// Sum over distinct ordered l-tuples of a window of values: l! e_l(values).
long double distinct_product_sum(std::span<const long double> values, unsigned l);

/// Sum-product inequalities on one clock for the window (tau(s), tau(t)]:
///   6a_window  S_l(c) <= (t - s + 1)^l
///   6a_outer   (t - s + 1)^l <= (t + 1)^l
///   6b_lower   [(t-s)^l - (c(tau(s)) + C(l,2) sum c^2)(t+1)^l] 1{c(tau(s)) <= t-s} <= S_l(c)
///   6b_upper   S_l(c) <= (t-s)^l + c(tau(t)) (t+1)^l
///   7          S_l(c + B d) <= S_l(c) + (sum d)(t+1)^{l-1} (1+B)^l
///   8          S_l(c - B d) >= S_l(c) - (sum d)(t+1)^{l-1} (1+B)^l
/// with 7 and 8 taken over the window (0, tau(t)]. Throws for t <= s, s < 0,
/// l == 0, B <= 0 or an empty window.
std::vector<BoundReport> check_sum_product_bounds(const CoalescenceClock& clock, double s, double t, unsigned l,
                                                  double B);

/// p_{k+1} <= p_k for k < k_max on every row, in exact integer arithmetic:
/// (k+1) e_{k+1} <= (N - k) e_k. Throws if k_max exceeds some row's N.
BoundReport check_block_monotonicity(std::span<const OffspringCounts> corpus, std::size_t k_max);

/// sum w^3 / sum w^2: the ratio of conditional triple- to pair-merger
/// probabilities under multinomial resampling with weights w.
template <typename T>
struct MergerCondition {
    T lhs_ratio;
    bool passes(const T& b_N) const { return lhs_ratio <= b_N; }
};

template <typename T>
MergerCondition<T> check_merger_condition(std::span<const T> w) {
    T square{0};
    T cube{0};
    for (const T& v : w) {
        square += v * v;
        cube += v * v * v;
    }
    if (square == T{0}) throw std::invalid_argument("merger condition needs a non-zero weight");
    return {cube / square};
}

MergerCondition<double> check_merger_condition(const WeightState& w);

/// Monte Carlo estimate of E[sum (nu_i)_3/(N)_3] / E[sum (nu_i)_2/(N)_2]
/// under any scheme, for schemes without a closed form.
double estimate_merger_ratio(ResamplingScheme scheme, const WeightState& w, std::size_t draws, Rng& rng);

/// Random offspring rows: population sizes drawn from `sizes`, weights drawn
/// from a mix of equal, uniform, lognormal and sparse potentials, counts from
/// a mix of schemes. Reproducible from `seed`.
std::vector<OffspringCounts> random_offspring_corpus(std::size_t rows, std::span<const std::size_t> sizes,
                                                     std::uint64_t seed);

/// Clock of a simulated population run until cum >= t_end.
CoalescenceClock simulate_clock(std::size_t N, ResamplingScheme scheme, const WeightModelConfig& weights,
                                double t_end, std::uint64_t seed);

struct BoundsSuiteConfig {
    std::size_t corpus_size = 10'000;
    std::size_t clocks = 20;
    std::size_t grid_pairs = 1000;       // cn-property windows, over all clocks
    std::size_t sum_product_combos = 1000;
    std::uint64_t seed = 1;
};

/// Every explicit inequality on a reproducible corpus, in a fixed order.
std::vector<BoundReport> run_bounds_suite(const BoundsSuiteConfig& config);

}  // namespace coalsim
