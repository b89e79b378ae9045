#include "coalsim/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "coalsim/errors.hpp"
#include "coalsim/rng.hpp"

namespace coalsim {

void absorb(BoundReport& into, const BoundReport& from) {
    if (into.name.empty()) into.name = from.name;
    into.trials += from.trials;
    into.violations += from.violations;
    if (from.worst_margin < into.worst_margin) {
        into.worst_margin = from.worst_margin;
        into.witness = from.witness;
    }
    for (const auto& [key, value] : from.constants) into.constants[key] = value;
}

namespace {

double slack(double a, double b) { return kBoundSlack * std::max({1.0, std::fabs(a), std::fabs(b)}); }

std::string describe_nu(const OffspringCounts& nu) {
    std::ostringstream out;
    out << "N=" << nu.population() << " nu=[";
    for (std::size_t i = 0; i < nu.counts.size(); ++i) out << (i ? "," : "") << nu.counts[i];
    out << ']';
    return out.str();
}

double to_double(const Rational& r) { return r.convert_to<double>(); }

struct ExactRates {
    Rational c;
    Rational d;
};

ExactRates exact_rates(const OffspringCounts& nu) {
    const BigInt N = nu.population();
    BigInt pair = 0;
    BigInt square_sum = 0;
    for (std::uint64_t v : nu.counts) {
        pair += BigInt(v) * (v > 0 ? v - 1 : 0);
        square_sum += BigInt(v) * v;
    }
    BigInt multiple = 0;
    for (std::uint64_t v : nu.counts) {
        if (v < 2) continue;
        multiple += BigInt(v) * (v - 1) * (N * v + square_sum - BigInt(v) * v);
    }
    const BigInt falling2 = N * (N - 1);
    return {Rational(pair, falling2), Rational(multiple, N * N * falling2)};
}

BigInt binomial2(std::size_t k) { return BigInt(k) * (k > 0 ? k - 1 : 0) / 2; }

}  // namespace

std::vector<BoundReport> check_cn_properties(const CoalescenceClock& clock,
                                             std::span<const std::pair<double, double>> grid) {
    if (clock.generations() == 0) throw std::invalid_argument("clock is empty");
    BoundReport a;
    a.name = "cn_property_a";
    BoundReport b;
    b.name = "cn_property_b";
    BoundReport c;
    c.name = "cn_property_c";
    for (const auto& r : clock.records()) {
        const double margin = std::min({r.d, r.c - r.d, 1.0 - r.c});
        a.record(margin, [&] {
            return "generation " + std::to_string(r.generation) + ": c=" + format_real(r.c) + " d=" + format_real(r.d);
        });
    }
    for (const auto& [s, t] : grid) {
        if (!(t > s) || s < 0.0) throw std::invalid_argument("grid pairs need 0 <= s < t");
        const std::size_t tau_s = s > 0.0 ? tau_inverse_clock(clock, s) : 0;
        const std::size_t tau_t = tau_inverse_clock(clock, t);
        const double window = clock.cum(tau_t) - clock.cum(tau_s);
        const double lower = t - (s > 0.0 ? s + 1.0 : 0.0);
        const double upper = t + 1.0;
        const double margin = std::min(window - lower + slack(window, lower), upper - window + slack(window, upper));
        auto where = [&] { return "s=" + format_real(s) + " t=" + format_real(t) + " window=" + format_real(window); };
        b.record(margin, where);
        c.record(static_cast<double>(tau_t) - t, where);
    }
    return {a, b, c};
}

std::vector<BoundReport> check_identity_envelopes(std::span<const OffspringCounts> corpus, std::size_t k) {
    if (k < 2) throw std::invalid_argument("envelopes need k >= 2");
    BoundReport lower;
    lower.name = "envelope_lower_k" + std::to_string(k);
    BoundReport upper;
    upper.name = "envelope_upper_k" + std::to_string(k);
    const BigInt pairs = binomial2(k);
    const BigInt pairs_minus = binomial2(k - 1);
    double beta = 1.0;  // B_k / K
    for (std::size_t i = 2; i < k; ++i) beta *= static_cast<double>(i);
    beta *= static_cast<double>(k - 2) * std::exp(2.0 * std::sqrt(2.0 * static_cast<double>(k - 2)));

    struct Row {
        const OffspringCounts* nu;
        double lower_scale;   // C F beta d
        double lower_excess;  // (1 - p) - C F c
        double K_needed;
        double gamma_needed;  // +inf when q <= 0
        double q;
        double one_minus_p;
    };
    std::vector<Row> rows;
    double K = 0.0;
    std::map<std::size_t, double> gamma;
    for (const auto& nu : corpus) {
        const std::size_t N = nu.population();
        if (N <= 2 || N < k) continue;
        const Rational p = identity_probability_exact(k, nu);
        const ExactRates r = exact_rates(nu);
        Rational F(BigInt(1));
        for (std::size_t i = 0; i < k - 2; ++i) F *= Rational(BigInt(N), BigInt(N - 2 - i));
        const Rational excess = (Rational(1) - p) - Rational(pairs) * F * r.c;
        Row row{&nu, to_double(Rational(pairs) * F * r.d) * beta, to_double(excess), 0.0,
                std::numeric_limits<double>::infinity(), 0.0, to_double(Rational(1) - p)};
        if (excess > 0) {
            if (r.d == 0 || k == 2) {
                row.K_needed = std::numeric_limits<double>::infinity();
            } else {
                row.K_needed = to_double(excess / (Rational(pairs) * F * r.d)) / beta;
                K = std::max(K, row.K_needed);
            }
        }
        const Rational q = Rational(pairs) * (r.c - Rational(pairs_minus) * r.d);
        row.q = to_double(q);
        if (q > 0) {
            row.gamma_needed = to_double((Rational(1) - p) / q);
            auto [it, fresh] = gamma.emplace(N, row.gamma_needed);
            if (!fresh) it->second = std::min(it->second, row.gamma_needed);
        }
        rows.push_back(row);
    }

    lower.constants["K"] = K;
    std::map<std::size_t, double> fitted_gamma;
    for (const auto& [N, g] : gamma) {
        const double M = std::max(0.0, static_cast<double>(N) * (1.0 - g));
        upper.constants["M_N=" + std::to_string(N)] = M;
        fitted_gamma[N] = 1.0 - M / static_cast<double>(N);
    }

    for (const auto& row : rows) {
        auto who = [&] { return describe_nu(*row.nu); };
        double lower_margin;
        if (std::isinf(row.K_needed)) lower_margin = -row.lower_excess;
        else if (row.lower_excess > 0.0) lower_margin = row.lower_scale * (K - row.K_needed);
        else lower_margin = -row.lower_excess + row.lower_scale * K;
        lower.record(lower_margin, who);

        const std::size_t N = row.nu->population();
        const double g = fitted_gamma.count(N) ? fitted_gamma[N] : 1.0;
        double upper_margin;
        if (std::isinf(row.gamma_needed)) upper_margin = row.one_minus_p - g * row.q;
        else upper_margin = row.q * (row.gamma_needed - g);
        upper.record(upper_margin, who);
    }
    return {lower, upper};
}

long double distinct_product_sum(std::span<const long double> values, unsigned l) {
    std::vector<long double> e(l + 1, 0.0L);
    e[0] = 1.0L;
    for (long double v : values)
        for (unsigned j = l; j >= 1; --j) e[j] += e[j - 1] * v;
    long double factorial = 1.0L;
    for (unsigned i = 2; i <= l; ++i) factorial *= i;
    return factorial * e[l];
}

std::vector<BoundReport> check_sum_product_bounds(const CoalescenceClock& clock, double s, double t, unsigned l,
                                                  double B) {
    if (!(t > s) || s < 0.0) throw std::invalid_argument("sum-product window needs 0 <= s < t");
    if (l == 0) throw std::invalid_argument("l must be at least 1");
    if (!(B > 0.0)) throw std::invalid_argument("B must be positive");
    const std::size_t tau_s = s > 0.0 ? tau_inverse_clock(clock, s) : 0;
    const std::size_t tau_t = tau_inverse_clock(clock, t);
    if (tau_t <= tau_s) throw std::invalid_argument("sum-product window is empty");

    std::vector<long double> window;
    long double sum_c2 = 0.0L;
    for (std::size_t r = tau_s + 1; r <= tau_t; ++r) {
        const long double c = clock.c(r);
        window.push_back(c);
        sum_c2 += c * c;
    }
    std::vector<long double> full_c, plus, minus;
    long double sum_d = 0.0L;
    for (std::size_t r = 1; r <= tau_t; ++r) {
        const long double c = clock.c(r);
        const long double d = clock.d(r);
        full_c.push_back(c);
        plus.push_back(c + B * d);
        minus.push_back(c - B * d);
        sum_d += d;
    }

    const long double L = l;
    const long double S = distinct_product_sum(window, l);
    const long double outer = std::pow(static_cast<long double>(t) + 1.0L, L);
    const long double middle = std::pow(static_cast<long double>(t - s) + 1.0L, L);
    const long double gap = std::pow(static_cast<long double>(t - s), L);
    const long double c_tau_s = clock.c(tau_s);
    const long double c_tau_t = clock.c(tau_t);
    const long double pairs_l = L * (L - 1.0L) / 2.0L;

    auto describe = [&] {
        return "s=" + format_real(s) + " t=" + format_real(t) + " l=" + std::to_string(l) + " B=" + format_real(B) +
               " window=(" + std::to_string(tau_s) + "," + std::to_string(tau_t) + "]";
    };
    auto margin = [](long double lhs, long double rhs) {
        return static_cast<double>(rhs - lhs) + slack(static_cast<double>(lhs), static_cast<double>(rhs));
    };

    std::vector<BoundReport> out(6);
    out[0].name = "sumprod_6a_window";
    out[0].record(margin(S, middle), describe);
    out[1].name = "sumprod_6a_outer";
    out[1].record(margin(middle, outer), describe);

    out[2].name = "sumprod_6b_lower";
    const long double lower6b =
        c_tau_s <= static_cast<long double>(t - s) ? gap - (c_tau_s + pairs_l * sum_c2) * outer : 0.0L;
    out[2].record(margin(lower6b, S), describe);
    out[3].name = "sumprod_6b_upper";
    out[3].record(margin(S, gap + c_tau_t * outer), describe);

    const long double S_full = distinct_product_sum(full_c, l);
    const long double d_term = sum_d * std::pow(static_cast<long double>(t) + 1.0L, L - 1.0L) *
                               std::pow(1.0L + static_cast<long double>(B), L);
    out[4].name = "sumprod_7";
    out[4].record(margin(distinct_product_sum(plus, l), S_full + d_term), describe);
    out[5].name = "sumprod_8";
    out[5].record(margin(S_full - d_term, distinct_product_sum(minus, l)), describe);
    return out;
}

BoundReport check_block_monotonicity(std::span<const OffspringCounts> corpus, std::size_t k_max) {
    BoundReport report;
    report.name = "block_monotonicity";
    for (const auto& nu : corpus) {
        const std::size_t N = nu.population();
        if (k_max > N) throw std::invalid_argument("k_max exceeds the population of a corpus row");
        const auto e = elementary_symmetric_exact(k_max, nu);
        const auto p = identity_probabilities(k_max, nu);
        for (std::size_t k = 1; k < k_max; ++k) {
            const bool violated = BigInt(k + 1) * e[k + 1] > BigInt(N - k) * e[k];
            const double diff = p[k] - p[k + 1];
            const double m = violated ? -std::max(std::fabs(diff), std::numeric_limits<double>::min())
                                      : std::max(diff, 0.0);
            report.record(m, [&] { return "k=" + std::to_string(k) + " " + describe_nu(nu); });
        }
    }
    return report;
}

MergerCondition<double> check_merger_condition(const WeightState& w) {
    return check_merger_condition(std::span<const double>(w.weights));
}

double estimate_merger_ratio(ResamplingScheme scheme, const WeightState& w, std::size_t draws, Rng& rng) {
    const auto N = static_cast<long double>(w.population());
    long double triple = 0.0L;
    long double pair = 0.0L;
    for (std::size_t i = 0; i < draws; ++i) {
        const auto nu = generate_offspring(scheme, w, rng);
        for (std::uint64_t v : nu.counts) {
            if (v < 2) continue;
            const long double x = v;
            pair += x * (x - 1.0L);
            triple += x * (x - 1.0L) * (x - 2.0L);
        }
    }
    if (pair == 0.0L) throw std::invalid_argument("no pair mergers in the Monte Carlo sample");
    return static_cast<double>((triple / (N * (N - 1.0L) * (N - 2.0L))) / (pair / (N * (N - 1.0L))));
}

std::vector<OffspringCounts> random_offspring_corpus(std::size_t rows, std::span<const std::size_t> sizes,
                                                     std::uint64_t seed) {
    if (sizes.empty()) throw std::invalid_argument("corpus needs at least one population size");
    constexpr ResamplingScheme schemes[] = {ResamplingScheme::multinomial, ResamplingScheme::residual,
                                            ResamplingScheme::stratified, ResamplingScheme::systematic,
                                            ResamplingScheme::wright_fisher};
    std::vector<OffspringCounts> corpus;
    corpus.reserve(rows);
    for (std::size_t i = 0; i < rows; ++i) {
        Rng rng(derive_seed(seed, 0xB0D5, i));
        const std::size_t N = sizes[rng.uniform_index(sizes.size())];
        std::vector<double> g(N);
        switch (rng.uniform_index(5)) {
            case 0: std::fill(g.begin(), g.end(), 1.0); break;
            case 1: for (auto& v : g) v = 0.5 + 1.5 * rng.uniform01(); break;
            case 2: for (auto& v : g) v = std::exp(rng.normal()); break;
            case 3:
                for (auto& v : g) v = rng.uniform01() < 0.1 ? 1.0 : 0.0;
                g[rng.uniform_index(N)] = 1.0;
                break;
            default:
                std::fill(g.begin(), g.end(), 1.0);
                g[0] = static_cast<double>(N) * (1.0 + 4.0 * rng.uniform01());
                break;
        }
        const auto w = WeightState::from_potentials(std::move(g));
        corpus.push_back(generate_offspring(schemes[rng.uniform_index(5)], w, rng));
    }
    return corpus;
}

CoalescenceClock simulate_clock(std::size_t N, ResamplingScheme scheme, const WeightModelConfig& weights,
                                double t_end, std::uint64_t seed) {
    constexpr std::size_t kMaxGenerations = 10'000'000;
    Rng rng(seed);
    CoalescenceClock clock;
    WeightState w = initial_weights(weights, N, rng);
    while (clock.generations() == 0 || clock.cum(clock.generations()) < t_end) {
        if (clock.generations() >= kMaxGenerations)
            throw HorizonExceeded("clock did not reach " + format_real(t_end) + " within the generation cap");
        const auto nu = generate_offspring(scheme, w, rng);
        clock.append(coalescence_rates(nu));
        if (weights.needs_parents()) {
            const auto a = assign_parents(nu, rng);
            w = evolve_weights(weights, w, &a, rng);
        } else if (weights.model == WeightModel::iid_potential) {
            w = evolve_weights(weights, w, nullptr, rng);
        }
    }
    return clock;
}

std::vector<BoundReport> run_bounds_suite(const BoundsSuiteConfig& config) {
    std::vector<BoundReport> reports;
    Rng rng(derive_seed(config.seed, 0xB5, 0));

    // Exact row sums of the transition law for small populations.
    {
        const std::size_t small_sizes[] = {2, 3, 4, 5, 6, 7, 8};
        const auto corpus = random_offspring_corpus(std::min<std::size_t>(config.corpus_size, 200), small_sizes,
                                                    derive_seed(config.seed, 1, 0));
        BoundReport rows;
        rows.name = "row_stochastic";
        for (const auto& nu : corpus) {
            for (std::size_t n = 1; n <= std::min<std::size_t>(4, nu.population()); ++n) {
                for (const auto& xi : enumerate_partitions(n)) {
                    Rational total = 0;
                    for (const auto& eta : enumerate_partitions(n)) total += transition_probability_exact(xi, eta, nu);
                    rows.record(total == 1 ? 0.0 : -std::fabs(to_double(total - 1)) - 1e-300,
                                [&] { return xi.to_string() + " " + describe_nu(nu); });
                }
            }
        }
        reports.push_back(rows);
    }

    const std::size_t sizes[] = {3, 5, 8, 12, 20, 50, 100, 200};
    const auto corpus = random_offspring_corpus(config.corpus_size, sizes, derive_seed(config.seed, 2, 0));
    BoundReport monotone;
    monotone.name = "block_monotonicity";
    for (const auto& nu : corpus) {
        const OffspringCounts one[] = {nu};
        absorb(monotone, check_block_monotonicity(one, std::min<std::size_t>(nu.population(), 12)));
    }
    reports.push_back(monotone);

    std::vector<OffspringCounts> large;
    for (const auto& nu : corpus)
        if (nu.population() >= 50) large.push_back(nu);
    for (std::size_t k = 2; k <= 4; ++k)
        for (auto& r : check_identity_envelopes(large, k)) reports.push_back(std::move(r));

    // Simulated clocks, alternating neutral and selective populations.
    constexpr double kClockEnd = 6.0;
    const std::size_t clock_sizes[] = {10, 50, 200};
    std::vector<CoalescenceClock> clocks;
    for (std::size_t i = 0; i < config.clocks; ++i) {
        WeightModelConfig weights;
        if (i % 2 == 1) {
            weights.model = WeightModel::iid_potential;
            weights.potential = PotentialDistribution{.kind = PotentialKind::uniform, .low = 0.5, .high = 2.0};
        }
        const auto scheme = i % 4 == 3 ? ResamplingScheme::systematic : ResamplingScheme::multinomial;
        clocks.push_back(simulate_clock(clock_sizes[i % 3], scheme, weights, kClockEnd, derive_seed(config.seed, 3, i)));
    }
    if (clocks.empty()) return reports;

    BoundReport prop_a, prop_b, prop_c;
    for (std::size_t i = 0; i < clocks.size(); ++i) {
        const std::size_t share = config.grid_pairs / clocks.size() + (i < config.grid_pairs % clocks.size() ? 1 : 0);
        std::vector<std::pair<double, double>> grid;
        for (std::size_t j = 0; j < share; ++j) {
            const double s = rng.uniform01() < 0.2 ? 0.0 : 3.0 * rng.uniform01();
            grid.emplace_back(s, s + 0.01 + 2.99 * rng.uniform01());
        }
        const auto r = check_cn_properties(clocks[i], grid);
        absorb(prop_a, r[0]);
        absorb(prop_b, r[1]);
        absorb(prop_c, r[2]);
    }
    reports.push_back(prop_a);
    reports.push_back(prop_b);
    reports.push_back(prop_c);

    std::vector<BoundReport> sumprod(6);
    for (std::size_t done = 0; done < config.sum_product_combos;) {
        const auto& clock = clocks[rng.uniform_index(clocks.size())];
        const double s = rng.uniform01() < 0.2 ? 0.0 : 3.0 * rng.uniform01();
        const double t = s + 0.01 + 2.99 * rng.uniform01();
        const auto l = static_cast<unsigned>(1 + rng.uniform_index(5));
        const double B = 3.0 * (1.0 - rng.uniform01());  // (0, 3]
        const std::size_t tau_s = s > 0.0 ? tau_inverse_clock(clock, s) : 0;
        if (tau_inverse_clock(clock, t) <= tau_s) continue;
        const auto r = check_sum_product_bounds(clock, s, t, l, B);
        for (std::size_t i = 0; i < r.size(); ++i) absorb(sumprod[i], r[i]);
        ++done;
    }
    for (auto& r : sumprod) reports.push_back(std::move(r));
    return reports;
}

}  // namespace coalsim
