#include "coalsim/exactprob.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <string>

#include "coalsim/errors.hpp"
#include "coalsim/genealogy.hpp"

namespace coalsim {

namespace {

constexpr double kRowTolerance = 1e-12;

template <typename T>
T falling(std::uint64_t x, std::uint64_t k) {
    T out = 1;
    for (std::uint64_t i = 0; i < k; ++i) {
        if (x <= i) return T(0);
        out *= T(x - i);
    }
    return out;
}

template <typename T>
T profile_weight_impl(std::span<const std::uint32_t> profile, const OffspringCounts& nu) {
    const std::size_t m = profile.size();
    if (m > kMaxProfileBlocks) throw std::invalid_argument("merge profile too long for the exact evaluator");
    const std::size_t full = (std::size_t{1} << m) - 1;
    std::vector<T> dp(full + 1, T(0));
    dp[0] = 1;
    std::vector<T> factor(m);
    for (std::uint64_t v : nu.counts) {
        bool any = false;
        for (std::size_t j = 0; j < m; ++j) {
            factor[j] = falling<T>(v, profile[j]);
            any = any || factor[j] != T(0);
        }
        if (!any) continue;
        // Descending masks: every source value is still the pre-particle one.
        for (std::size_t mask = full; mask-- > 0;) {
            if (dp[mask] == T(0)) continue;
            for (std::size_t j = 0; j < m; ++j) {
                const std::size_t bit = std::size_t{1} << j;
                if (mask & bit) continue;
                if (factor[j] != T(0)) dp[mask | bit] += dp[mask] * factor[j];
            }
        }
    }
    return dp[full];
}

// Coefficients of prod_i (1 + nu_i x) up to x^k_max. Equal counts are
// grouped, so each distinct value v with multiplicity m contributes the
// binomial expansion of (1 + v x)^m in one step.
template <typename T>
std::vector<T> elementary_symmetric(std::size_t k_max, const OffspringCounts& nu) {
    std::vector<std::uint64_t> multiplicity;
    for (std::uint64_t v : nu.counts) {
        if (v >= multiplicity.size()) multiplicity.resize(v + 1, 0);
        ++multiplicity[v];
    }
    std::vector<T> e(k_max + 1, T(0)), term(k_max + 1);
    e[0] = 1;
    for (std::uint64_t v = 1; v < multiplicity.size(); ++v) {
        const std::uint64_t m = multiplicity[v];
        if (m == 0) continue;
        // term[j] = C(m, j) v^j
        term[0] = 1;
        const std::size_t top = static_cast<std::size_t>(std::min<std::uint64_t>(m, k_max));
        for (std::size_t j = 1; j <= top; ++j) term[j] = term[j - 1] * T(v) * T(m - j + 1) / T(j);
        for (std::size_t j = k_max; j >= 1; --j) {
            T sum = e[j];
            for (std::size_t i = 1; i <= std::min(j, top); ++i) sum += e[j - i] * term[i];
            e[j] = sum;
        }
    }
    return e;
}

void check_k(std::size_t k, const OffspringCounts& nu) {
    if (k < 1 || k > nu.population()) throw std::invalid_argument("block count must lie in [1, N]");
}

}  // namespace

void Environment::validate() const {
    if (generations.empty()) throw std::invalid_argument("environment has no generations");
    const std::size_t N = generations.front().population();
    for (const auto& nu : generations) {
        nu.validate();
        if (nu.population() != N) throw std::invalid_argument("environment generations differ in N");
    }
}

BigInt profile_weight_exact(std::span<const std::uint32_t> profile, const OffspringCounts& nu) {
    return profile_weight_impl<BigInt>(profile, nu);
}

long double profile_weight(std::span<const std::uint32_t> profile, const OffspringCounts& nu) {
    return profile_weight_impl<long double>(profile, nu);
}

BigInt falling_factorial_exact(std::uint64_t N, std::uint64_t k) { return falling<BigInt>(N, k); }

double transition_probability(const Partition& xi, const Partition& eta, const OffspringCounts& nu) {
    const auto profile = merge_profile(xi, eta);
    if (!profile) return 0.0;
    if (xi.block_count() > nu.population()) throw std::invalid_argument("more lineages than individuals");
    const long double numerator = profile_weight(profile->counts, nu);
    const long double denominator = falling<long double>(nu.population(), xi.block_count());
    return static_cast<double>(numerator / denominator);
}

Rational transition_probability_exact(const Partition& xi, const Partition& eta, const OffspringCounts& nu) {
    const auto profile = merge_profile(xi, eta);
    if (!profile) return Rational(0);
    if (xi.block_count() > nu.population()) throw std::invalid_argument("more lineages than individuals");
    return Rational(profile_weight_exact(profile->counts, nu), falling_factorial_exact(nu.population(), xi.block_count()));
}

std::vector<BigInt> elementary_symmetric_exact(std::size_t k_max, const OffspringCounts& nu) {
    return elementary_symmetric<BigInt>(k_max, nu);
}

std::vector<double> identity_probabilities(std::size_t k_max, const OffspringCounts& nu) {
    if (k_max > nu.population()) throw std::invalid_argument("block count must lie in [1, N]");
    const auto e = elementary_symmetric<long double>(k_max, nu);
    std::vector<double> p(k_max + 1);
    // k! e_k / (N)_k, built up as a product of ratios to stay in range.
    long double scale = 1.0L;  // k! / (N)_k
    const auto N = static_cast<long double>(nu.population());
    for (std::size_t k = 0; k <= k_max; ++k) {
        if (k > 0) scale *= static_cast<long double>(k) / (N - static_cast<long double>(k - 1));
        p[k] = static_cast<double>(std::min(1.0L, e[k] * scale));
    }
    return p;
}

double identity_probability(std::size_t k, const OffspringCounts& nu) {
    check_k(k, nu);
    return identity_probabilities(k, nu)[k];
}

Rational identity_probability_exact(std::size_t k, const OffspringCounts& nu) {
    check_k(k, nu);
    const auto e = elementary_symmetric_exact(k, nu);
    BigInt k_factorial = 1;
    for (std::size_t i = 2; i <= k; ++i) k_factorial *= i;
    return Rational(k_factorial * e[k], falling_factorial_exact(nu.population(), k));
}

double max_jump_probability(std::size_t n, const OffspringCounts& nu) {
    if (n > nu.population()) throw std::invalid_argument("sample larger than population");
    return 1.0 - identity_probability(n, nu);
}

CoupledRow coupled_row(const Partition& s, const OffspringCounts& nu) {
    const std::size_t n = s.n();
    if (n > nu.population()) throw std::invalid_argument("sample larger than population");
    const auto identity = identity_probabilities(n, nu);
    const double p_singletons = identity[n];
    const double p_stay_partition = identity[s.block_count()];

    CoupledRow row;
    row.stay = p_singletons;  // 1 - p_t
    double counter_only = p_stay_partition - p_singletons;
    if (counter_only < -kRowTolerance) throw ConsistencyError("identity probability increased with block count");
    row.counter_only = std::max(counter_only, 0.0);

    long double total = static_cast<long double>(row.stay) + row.counter_only;
    for (const auto& eta : enumerate_partitions(n)) {
        if (eta == s || !merge_profile(s, eta)) continue;
        const double p = transition_probability(s, eta, nu);
        if (p == 0.0) continue;
        row.targets.push_back(eta);
        row.moves.push_back(p);
        total += p;
    }
    if (std::fabs(static_cast<double>(total - 1.0L)) > kRowTolerance)
        throw ConsistencyError("coupled transition row sums to " + format_real(static_cast<double>(total)));
    return row;
}

CoupledState coupled_step(const CoupledState& state, const OffspringCounts& nu, Rng& rng) {
    const CoupledRow row = coupled_row(state.s, nu);
    const double u = rng.uniform01();
    double acc = row.stay;
    if (u < acc) return state;
    acc += row.counter_only;
    if (u < acc || row.targets.empty()) return {state.z + 1, state.s};
    for (std::size_t i = 0; i < row.targets.size(); ++i) {
        acc += row.moves[i];
        if (u < acc) return {state.z + 1, row.targets[i]};
    }
    return {state.z + 1, row.targets.back()};
}

CoupledChainKernel::CoupledChainKernel(std::size_t n, const Environment& env)
    : n_(n), states_(enumerate_partitions(n)) {
    env.validate();
    if (n > env.population()) throw std::invalid_argument("sample larger than population");
    auto index_of = [this](const Partition& p) {
        auto it = std::lower_bound(states_.begin(), states_.end(), p);
        return static_cast<std::uint32_t>(it - states_.begin());
    };
    rows_.reserve(env.generations.size());
    for (const auto& nu : env.generations) {
        std::vector<std::vector<Outcome>> per_state;
        per_state.reserve(states_.size());
        for (std::size_t s = 0; s < states_.size(); ++s) {
            const CoupledRow row = coupled_row(states_[s], nu);
            std::vector<Outcome> outcomes;
            double acc = row.stay;
            outcomes.push_back({acc, 0, static_cast<std::uint32_t>(s)});
            acc += row.counter_only;
            outcomes.push_back({acc, 1, static_cast<std::uint32_t>(s)});
            for (std::size_t i = 0; i < row.targets.size(); ++i) {
                acc += row.moves[i];
                outcomes.push_back({acc, 1, index_of(row.targets[i])});
            }
            outcomes.back().cumulative = 2.0;  // absorbs rounding in the last bin
            per_state.push_back(std::move(outcomes));
        }
        rows_.push_back(std::move(per_state));
    }
}

std::vector<CoupledState> CoupledChainKernel::run(Rng& rng) const {
    std::vector<CoupledState> path;
    path.reserve(rows_.size() + 1);
    // The singletons partition is last in lexicographic label order.
    auto state = static_cast<std::uint32_t>(states_.size() - 1);
    std::uint64_t z = 0;
    path.push_back({z, states_[state]});
    for (const auto& generation : rows_) {
        const auto& outcomes = generation[state];
        const double u = rng.uniform01();
        const auto it = std::find_if(outcomes.begin(), outcomes.end(), [u](const Outcome& o) { return u < o.cumulative; });
        if (it->target != state && it->z_increment == 0) throw ConsistencyError("partition changed without a counter jump");
        z += it->z_increment;
        state = it->target;
        path.push_back({z, states_[state]});
    }
    return path;
}

std::vector<CoupledState> simulate_coupled(std::size_t n, const Environment& env, Rng& rng) {
    return CoupledChainKernel(n, env).run(rng);
}

TransitionMatrix transition_matrix(std::size_t n, const OffspringCounts& nu) {
    TransitionMatrix m;
    m.states = enumerate_partitions(n);
    m.p.assign(m.states.size(), std::vector<double>(m.states.size(), 0.0));
    for (std::size_t i = 0; i < m.states.size(); ++i)
        for (std::size_t j = 0; j < m.states.size(); ++j) m.p[i][j] = transition_probability(m.states[i], m.states[j], nu);
    return m;
}

void write_transition_csv(std::ostream& out, const TransitionMatrix& m) {
    out << "from";
    for (const auto& s : m.states) out << ",\"" << s.to_string() << '"';
    out << '\n';
    for (std::size_t i = 0; i < m.states.size(); ++i) {
        out << '"' << m.states[i].to_string() << '"';
        for (double p : m.p[i]) out << ',' << format_real(p);
        out << '\n';
    }
}

}  // namespace coalsim
