#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "coalsim/rng.hpp"

namespace coalsim {

/// Offspring counts nu^(1:N) of one generation: non-negative, summing to N.
struct OffspringCounts {
    std::vector<std::uint32_t> counts;

    std::size_t population() const { return counts.size(); }

    /// Throws std::invalid_argument unless the counts sum to their length
    /// and that length is at least 1.
    static OffspringCounts from(std::vector<std::uint32_t> counts);
    void validate() const;

    friend bool operator==(const OffspringCounts&, const OffspringCounts&) = default;
};

/// parents[j] is the (0-based) parent of child j.
struct ParentAssignment {
    std::vector<std::uint32_t> parents;
};

/// Normalized resampling weights plus the potentials they came from.
struct WeightState {
    std::vector<double> weights;
    std::vector<double> potentials;
    /// Set when every weight is exactly 1/N, which lets samplers use the
    /// equal-weight fast path.
    bool uniform = false;

    std::size_t population() const { return weights.size(); }

    static WeightState uniform_weights(std::size_t N);
    /// Normalizes non-negative potentials with long double accumulation.
    /// Throws if any is negative or non-finite, or all are zero.
    static WeightState from_potentials(std::vector<double> potentials);
    /// Throws unless weights are non-negative and sum to 1 within 1e-12.
    void validate() const;
};

inline constexpr double kWeightTolerance = 1e-12;

enum class ResamplingScheme { multinomial, residual, stratified, systematic, wright_fisher };

enum class WeightModel { constant, iid_potential, inherited_fitness, point_mass };

enum class PotentialKind { lognormal, uniform, two_point };

/// lognormal: exp(sigma Z). uniform: U(low, high). two_point: high with
/// probability p_high, otherwise low.
struct PotentialDistribution {
    PotentialKind kind = PotentialKind::uniform;
    double sigma = 0.5;
    double low = 0.5;
    double high = 2.0;
    double p_high = 0.5;

    double sample(Rng& rng) const;
    void validate() const;

    friend bool operator==(const PotentialDistribution&, const PotentialDistribution&) = default;
};

struct WeightModelConfig {
    WeightModel model = WeightModel::constant;
    PotentialDistribution potential;
    /// inherited_fitness only: new potential = (parent potential)^h * fresh draw.
    double heritability = 0.0;

    bool needs_parents() const { return model == WeightModel::inherited_fitness; }

    friend bool operator==(const WeightModelConfig&, const WeightModelConfig&) = default;
};

std::string_view to_string(ResamplingScheme s);
std::string_view to_string(WeightModel m);
std::string_view to_string(PotentialKind k);
std::optional<ResamplingScheme> parse_scheme(std::string_view name);
std::optional<WeightModel> parse_weight_model(std::string_view name);
std::optional<PotentialKind> parse_potential_kind(std::string_view name);

/// Draws offspring counts of the N = w.population() individuals.
///   multinomial   nu ~ Multinomial(N, w)
///   residual      floor(N w_i) copies, remainder multinomial on the residuals
///   stratified    one uniform point in each stratum [k/N, (k+1)/N)
///   systematic    a single uniform offset shared by all strata
///   wright_fisher multinomial with equal weights, w ignored
/// Inverse-CDF lookups use half-open intervals [W_{i-1}, W_i) in particle
/// index order. Throws for N < 2 or invalid weights.
OffspringCounts generate_offspring(ResamplingScheme scheme, const WeightState& w, Rng& rng);

/// Uniform assignment consistent with nu: the multiset with nu_i copies of i
/// under a uniform random permutation (Fisher-Yates).
ParentAssignment assign_parents(const OffspringCounts& nu, Rng& rng);

/// Parents of k distinct children: the first k entries of a uniform
/// permutation of the parent multiset. Same joint law as reading any k fixed
/// positions of assign_parents, at O(N + k) cost. `scratch` is reused.
void sample_lineage_parents(const OffspringCounts& nu, std::size_t k, Rng& rng,
                            std::vector<std::uint32_t>& scratch, std::vector<std::uint32_t>& out);

/// Weights for the first simulated generation.
WeightState initial_weights(const WeightModelConfig& config, std::size_t N, Rng& rng);

/// Weights of the next generation. `parents` is required (non-null) for
/// inherited_fitness, where slot j inherits from slot parents[j].
WeightState evolve_weights(const WeightModelConfig& config, const WeightState& prev,
                           const ParentAssignment* parents, Rng& rng);

}  // namespace coalsim
