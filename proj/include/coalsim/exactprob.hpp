#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "coalsim/particle.hpp"
#include "coalsim/partition.hpp"
#include "coalsim/rng.hpp"

namespace coalsim {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

/// Offspring counts of consecutive reverse-time generations; element 0 is
/// generation 1 (the parents of the sampled generation).
struct Environment {
    std::vector<OffspringCounts> generations;

    std::size_t population() const { return generations.empty() ? 0 : generations.front().population(); }
    /// Throws unless every generation is valid and all share one N.
    void validate() const;
};

/// State of the coupled chain: jump counter z and partition s.
struct CoupledState {
    std::uint64_t z = 0;
    Partition s = Partition::singletons(1);

    friend bool operator==(const CoupledState&, const CoupledState&) = default;
};

inline constexpr std::size_t kMaxProfileBlocks = 12;

/// sum over distinct (i_1..i_m) of prod_j (nu_{i_j})_{b_j}, by a dynamic
/// programme over particles and the subset of profile entries already
/// placed: O(N 2^m m). Throws for m > kMaxProfileBlocks.
BigInt profile_weight_exact(std::span<const std::uint32_t> profile, const OffspringCounts& nu);
long double profile_weight(std::span<const std::uint32_t> profile, const OffspringCounts& nu);

/// (N)_k as an exact integer.
BigInt falling_factorial_exact(std::uint64_t N, std::uint64_t k);

/// Probability that the genealogy moves from xi to eta in one generation
/// with offspring counts nu:
///   p = (1/(N)_{|xi|}) sum_{distinct i_1..i_{|eta|}} prod_j (nu_{i_j})_{b_j}
/// and 0 when eta is not a coarsening of xi.
double transition_probability(const Partition& xi, const Partition& eta, const OffspringCounts& nu);
Rational transition_probability_exact(const Partition& xi, const Partition& eta, const OffspringCounts& nu);

/// Probability that k lineages all have distinct parents:
/// k! e_k(nu) / (N)_k, with e_k the elementary symmetric polynomial,
/// in O(N k). Throws unless 1 <= k <= N.
double identity_probability(std::size_t k, const OffspringCounts& nu);
Rational identity_probability_exact(std::size_t k, const OffspringCounts& nu);

/// identity probabilities for every k = 0..k_max in one pass; entry 0 is 1.
std::vector<double> identity_probabilities(std::size_t k_max, const OffspringCounts& nu);

/// e_0..e_{k_max} of nu as exact integers.
std::vector<BigInt> elementary_symmetric_exact(std::size_t k_max, const OffspringCounts& nu);

/// Largest one-step jump probability over partitions of n elements, which is
/// attained at the singletons: 1 - identity_probability(n, nu). Throws for n > N.
double max_jump_probability(std::size_t n, const OffspringCounts& nu);

/// Transition law of the coupled chain from `state` under nu, split into
///   stay            (z, s)        probability 1 - p_t
///   counter_only    (z + 1, s)    probability p_ss + p_t - 1
///   moves[i]        (z + 1, eta)  probability p_{s,eta}, eta != s
struct CoupledRow {
    double stay = 0.0;
    double counter_only = 0.0;
    std::vector<Partition> targets;
    std::vector<double> moves;
};

/// Builds the row and checks it sums to 1 within 1e-12 (ConsistencyError
/// otherwise). The counter-only mass is computed as p_ss - p_singletons,
/// which is exactly zero when s is the singletons partition.
CoupledRow coupled_row(const Partition& s, const OffspringCounts& nu);

/// One step of the coupled chain.
CoupledState coupled_step(const CoupledState& state, const OffspringCounts& nu, Rng& rng);

/// Coupled chain in a fixed environment with every row precomputed, for
/// repeated runs. States are indexed by enumerate_partitions(n).
class CoupledChainKernel {
  public:
    CoupledChainKernel(std::size_t n, const Environment& env);

    std::size_t n() const { return n_; }
    std::size_t steps() const { return rows_.size(); }
    const std::vector<Partition>& states() const { return states_; }

    /// Trajectory (Z_t, S_t) for t = 0..steps(). Throws ConsistencyError if
    /// S changes without Z incrementing.
    std::vector<CoupledState> run(Rng& rng) const;

  private:
    struct Outcome {
        double cumulative;
        std::uint32_t z_increment;
        std::uint32_t target;
    };
    std::size_t n_;
    std::vector<Partition> states_;
    std::vector<std::vector<std::vector<Outcome>>> rows_;  // [generation][state]
};

std::vector<CoupledState> simulate_coupled(std::size_t n, const Environment& env, Rng& rng);

/// Full one-step transition matrix over enumerate_partitions(n).
struct TransitionMatrix {
    std::vector<Partition> states;
    std::vector<std::vector<double>> p;
};

TransitionMatrix transition_matrix(std::size_t n, const OffspringCounts& nu);

/// CSV with a header row of partition labels and one row per source state.
void write_transition_csv(std::ostream& out, const TransitionMatrix& m);

}  // namespace coalsim
