#include "coalsim/particle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace coalsim {

OffspringCounts OffspringCounts::from(std::vector<std::uint32_t> counts) {
    OffspringCounts nu{std::move(counts)};
    nu.validate();
    return nu;
}

void OffspringCounts::validate() const {
    if (counts.empty()) throw std::invalid_argument("offspring counts must be non-empty");
    const std::uint64_t total = std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
    if (total != counts.size())
        throw std::invalid_argument("offspring counts sum to " + std::to_string(total) + ", expected " +
                                    std::to_string(counts.size()));
}

WeightState WeightState::uniform_weights(std::size_t N) {
    if (N == 0) throw std::invalid_argument("population must be positive");
    WeightState w;
    w.weights.assign(N, 1.0 / static_cast<double>(N));
    w.potentials.assign(N, 1.0);
    w.uniform = true;
    return w;
}

WeightState WeightState::from_potentials(std::vector<double> potentials) {
    if (potentials.empty()) throw std::invalid_argument("population must be positive");
    long double total = 0.0L;
    for (double g : potentials) {
        if (!(g >= 0.0) || !std::isfinite(g)) throw std::invalid_argument("potentials must be finite and non-negative");
        total += g;
    }
    if (!(total > 0.0L)) throw std::invalid_argument("all potentials are zero");
    WeightState w;
    w.weights.resize(potentials.size());
    for (std::size_t i = 0; i < potentials.size(); ++i)
        w.weights[i] = static_cast<double>(static_cast<long double>(potentials[i]) / total);
    w.potentials = std::move(potentials);
    return w;
}

void WeightState::validate() const {
    if (weights.empty()) throw std::invalid_argument("weights must be non-empty");
    long double total = 0.0L;
    for (double v : weights) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("weights must be finite and non-negative");
        total += v;
    }
    if (std::fabs(static_cast<double>(total - 1.0L)) > kWeightTolerance)
        throw std::invalid_argument("weights are not normalized");
}

double PotentialDistribution::sample(Rng& rng) const {
    switch (kind) {
        case PotentialKind::lognormal: return std::exp(sigma * rng.normal());
        case PotentialKind::uniform: return low + (high - low) * rng.uniform01();
        case PotentialKind::two_point: return rng.uniform01() < p_high ? high : low;
    }
    return 1.0;
}

void PotentialDistribution::validate() const {
    switch (kind) {
        case PotentialKind::lognormal:
            if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("lognormal sigma must be >= 0");
            break;
        case PotentialKind::uniform:
            if (!(low >= 0.0 && high > low)) throw std::invalid_argument("uniform potential needs 0 <= low < high");
            break;
        case PotentialKind::two_point:
            if (!(low >= 0.0 && high >= 0.0 && (low > 0.0 || high > 0.0)))
                throw std::invalid_argument("two_point potential needs non-negative values, not both zero");
            if (!(p_high >= 0.0 && p_high <= 1.0)) throw std::invalid_argument("two_point p_high must lie in [0, 1]");
            break;
    }
}

std::string_view to_string(ResamplingScheme s) {
    switch (s) {
        case ResamplingScheme::multinomial: return "multinomial";
        case ResamplingScheme::residual: return "residual";
        case ResamplingScheme::stratified: return "stratified";
        case ResamplingScheme::systematic: return "systematic";
        case ResamplingScheme::wright_fisher: return "wright_fisher";
    }
    return "?";
}

std::string_view to_string(WeightModel m) {
    switch (m) {
        case WeightModel::constant: return "constant";
        case WeightModel::iid_potential: return "iid_potential";
        case WeightModel::inherited_fitness: return "inherited_fitness";
        case WeightModel::point_mass: return "point_mass";
    }
    return "?";
}

std::string_view to_string(PotentialKind k) {
    switch (k) {
        case PotentialKind::lognormal: return "lognormal";
        case PotentialKind::uniform: return "uniform";
        case PotentialKind::two_point: return "two_point";
    }
    return "?";
}

std::optional<ResamplingScheme> parse_scheme(std::string_view name) {
    for (auto s : {ResamplingScheme::multinomial, ResamplingScheme::residual, ResamplingScheme::stratified,
                   ResamplingScheme::systematic, ResamplingScheme::wright_fisher})
        if (to_string(s) == name) return s;
    return std::nullopt;
}

std::optional<WeightModel> parse_weight_model(std::string_view name) {
    for (auto m : {WeightModel::constant, WeightModel::iid_potential, WeightModel::inherited_fitness,
                   WeightModel::point_mass})
        if (to_string(m) == name) return m;
    return std::nullopt;
}

std::optional<PotentialKind> parse_potential_kind(std::string_view name) {
    for (auto k : {PotentialKind::lognormal, PotentialKind::uniform, PotentialKind::two_point})
        if (to_string(k) == name) return k;
    return std::nullopt;
}

namespace {

std::size_t last_positive_index(std::span<const double> mass) {
    std::size_t i = mass.size() - 1;
    while (i > 0 && mass[i] == 0.0) --i;
    return i;
}

void multinomial_equal(std::size_t draws, std::vector<std::uint32_t>& counts, Rng& rng) {
    const std::size_t N = counts.size();
    for (std::size_t k = 0; k < draws; ++k) ++counts[rng.uniform_index(N)];
}

// Multinomial(draws, p) with p proportional to `mass` (total `total`), by
// walking the sorted uniforms obtained from normalized exponential spacings.
void multinomial_general(std::size_t draws, std::span<const double> mass, long double total,
                         std::vector<std::uint32_t>& counts, Rng& rng) {
    if (draws == 0) return;
    std::vector<double> spacing(draws + 1);
    long double spacing_total = 0.0L;
    for (auto& e : spacing) {
        e = -std::log1p(-rng.uniform01());
        spacing_total += e;
    }
    const std::size_t N = mass.size();
    std::size_t i = 0;
    long double cum = mass[0];
    long double point = 0.0L;
    const long double scale = total / spacing_total;
    const std::size_t last_positive = last_positive_index(mass);
    for (std::size_t k = 0; k < draws; ++k) {
        point += spacing[k] * scale;
        while (point >= cum && i + 1 < N) cum += mass[++i];
        // Zero-mass particles can only be hit through rounding at a boundary.
        while (mass[i] == 0.0 && i < last_positive) cum += mass[++i];
        ++counts[std::min(i, last_positive)];
    }
}

// One point per stratum [k, k+1) on the N-scaled cumulative weights.
template <typename Offset>
void stratified_walk(const WeightState& w, std::vector<std::uint32_t>& counts, Offset offset) {
    const std::size_t N = w.population();
    const auto scale = static_cast<long double>(N);
    const std::size_t last_positive = last_positive_index(w.weights);
    std::size_t i = 0;
    long double cum = w.weights[0] * scale;
    for (std::size_t k = 0; k < N; ++k) {
        const long double point = static_cast<long double>(k) + offset();
        while (point >= cum && i + 1 < N) cum += w.weights[++i] * scale;
        while (w.weights[i] == 0.0 && i < last_positive) cum += w.weights[++i] * scale;
        ++counts[std::min(i, last_positive)];
    }
}

}  // namespace

OffspringCounts generate_offspring(ResamplingScheme scheme, const WeightState& w, Rng& rng) {
    const std::size_t N = w.population();
    if (N < 2) throw std::invalid_argument("population must be at least 2");
    if (!w.uniform) w.validate();
    OffspringCounts nu{std::vector<std::uint32_t>(N, 0)};

    switch (scheme) {
        case ResamplingScheme::wright_fisher:
            multinomial_equal(N, nu.counts, rng);
            break;
        case ResamplingScheme::multinomial:
            if (w.uniform) multinomial_equal(N, nu.counts, rng);
            else multinomial_general(N, w.weights, 1.0L, nu.counts, rng);
            break;
        case ResamplingScheme::residual: {
            std::vector<double> residual(N);
            std::size_t placed = 0;
            long double residual_total = 0.0L;
            for (std::size_t i = 0; i < N; ++i) {
                const double expected = w.weights[i] * static_cast<double>(N);
                const double whole = std::floor(expected);
                nu.counts[i] = static_cast<std::uint32_t>(whole);
                placed += nu.counts[i];
                residual[i] = expected - whole;
                residual_total += residual[i];
            }
            if (placed > N) throw std::logic_error("residual resampling overshoot");
            if (placed < N) multinomial_general(N - placed, residual, residual_total, nu.counts, rng);
            break;
        }
        case ResamplingScheme::stratified:
            stratified_walk(w, nu.counts, [&rng] { return static_cast<long double>(rng.uniform01()); });
            break;
        case ResamplingScheme::systematic: {
            const long double u = rng.uniform01();
            stratified_walk(w, nu.counts, [u] { return u; });
            break;
        }
    }
    return nu;
}

ParentAssignment assign_parents(const OffspringCounts& nu, Rng& rng) {
    nu.validate();
    const std::size_t N = nu.population();
    ParentAssignment a;
    a.parents.reserve(N);
    for (std::size_t i = 0; i < N; ++i) a.parents.insert(a.parents.end(), nu.counts[i], static_cast<std::uint32_t>(i));
    for (std::size_t j = N - 1; j > 0; --j) std::swap(a.parents[j], a.parents[rng.uniform_index(j + 1)]);
    return a;
}

void sample_lineage_parents(const OffspringCounts& nu, std::size_t k, Rng& rng,
                            std::vector<std::uint32_t>& scratch, std::vector<std::uint32_t>& out) {
    const std::size_t N = nu.population();
    if (k > N) throw std::invalid_argument("more lineages than individuals");
    // Partial Fisher-Yates on the virtual multiset array: only the k touched
    // slots are tracked, and slot owners come from the prefix sums in scratch.
    scratch.resize(N + 1);
    scratch[0] = 0;
    for (std::size_t i = 0; i < N; ++i) scratch[i + 1] = scratch[i] + nu.counts[i];
    std::vector<std::pair<std::size_t, std::size_t>> moved;  // slot, content
    moved.reserve(k);
    auto content = [&](std::size_t slot) {
        for (const auto& [s, c] : moved)
            if (s == slot) return c;
        return slot;
    };
    out.resize(k);
    for (std::size_t j = 0; j < k; ++j) {
        const std::size_t r = j + rng.uniform_index(N - j);
        const std::size_t picked = content(r);
        const std::size_t displaced = content(j);
        bool found = false;
        for (auto& [s, c] : moved)
            if (s == r) c = displaced, found = true;
        if (!found) moved.emplace_back(r, displaced);
        const auto it = std::upper_bound(scratch.begin(), scratch.end(), static_cast<std::uint32_t>(picked));
        out[j] = static_cast<std::uint32_t>(it - scratch.begin() - 1);
    }
}

WeightState initial_weights(const WeightModelConfig& config, std::size_t N, Rng& rng) {
    switch (config.model) {
        case WeightModel::constant: return WeightState::uniform_weights(N);
        case WeightModel::point_mass: {
            std::vector<double> g(N, 0.0);
            g[0] = 1.0;
            return WeightState::from_potentials(std::move(g));
        }
        case WeightModel::iid_potential:
        case WeightModel::inherited_fitness: {
            std::vector<double> g(N);
            for (auto& v : g) v = config.potential.sample(rng);
            return WeightState::from_potentials(std::move(g));
        }
    }
    throw std::logic_error("unknown weight model");
}

WeightState evolve_weights(const WeightModelConfig& config, const WeightState& prev,
                           const ParentAssignment* parents, Rng& rng) {
    const std::size_t N = prev.population();
    if (config.model != WeightModel::inherited_fitness) return initial_weights(config, N, rng);

    if (parents == nullptr || parents->parents.size() != N)
        throw std::invalid_argument("inherited_fitness needs a full parent assignment");
    std::vector<double> g(N);
    double largest = 0.0;
    for (std::size_t j = 0; j < N; ++j) {
        const double inherited = std::pow(prev.potentials[parents->parents[j]], config.heritability);
        g[j] = inherited * config.potential.sample(rng);
        largest = std::max(largest, g[j]);
    }
    // Rescaling all potentials leaves the weights unchanged and keeps the
    // multiplicative chain away from under/overflow.
    if (largest > 0.0)
        for (auto& v : g) v /= largest;
    return WeightState::from_potentials(std::move(g));
}

}  // namespace coalsim
