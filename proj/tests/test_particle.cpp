#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "coalsim/particle.hpp"

using namespace coalsim;

namespace {

const ResamplingScheme kSchemes[] = {ResamplingScheme::multinomial, ResamplingScheme::residual,
                                     ResamplingScheme::stratified, ResamplingScheme::systematic,
                                     ResamplingScheme::wright_fisher};

WeightState random_weights(std::size_t N, Rng& rng) {
    std::vector<double> g(N);
    for (auto& x : g) x = 0.1 + rng.uniform01() * (rng.uniform01() < 0.1 ? 20.0 : 1.0);
    return WeightState::from_potentials(g);
}

double falling(double x, int k) {
    double r = 1.0;
    for (int i = 0; i < k; ++i) r *= x - i;
    return r;
}

// Two-sample Kolmogorov-Smirnov distance.
double ks_two_sample(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::fabs(double(i) / a.size() - double(j) / b.size()));
    }
    return d;
}

// 1% critical value of the two-sample KS distance.
double ks_two_sample_critical(std::size_t n, std::size_t m) {
    return 1.628 * std::sqrt(double(n + m) / double(n * m));
}

struct Moments {
    double mean = 0.0, se = 0.0;
};

Moments moments(const std::vector<double>& x) {
    double s = 0.0, s2 = 0.0;
    for (double v : x) s += v, s2 += v * v;
    const double n = double(x.size());
    const double mean = s / n;
    return {mean, std::sqrt(std::max(0.0, s2 / n - mean * mean) / n)};
}

}  // namespace

TEST_CASE("offspring counts validation") {
    CHECK_NOTHROW(OffspringCounts::from({2, 0, 1}));
    CHECK_THROWS_AS(OffspringCounts::from({2, 2, 1}), std::invalid_argument);
    CHECK_THROWS_AS(OffspringCounts::from({}), std::invalid_argument);
}

TEST_CASE("weights") {
    const auto w = WeightState::from_potentials({1.0, 3.0});
    CHECK(w.weights[0] == doctest::Approx(0.25));
    CHECK(w.weights[1] == doctest::Approx(0.75));
    CHECK_FALSE(w.uniform);
    CHECK(WeightState::uniform_weights(4).uniform);
    CHECK_THROWS(WeightState::from_potentials({1.0, -1.0}));
    CHECK_THROWS(WeightState::from_potentials({0.0, 0.0}));
    CHECK_THROWS(WeightState::from_potentials({1.0, std::nan("")}));

    // Extended-precision normalization keeps the sum within tolerance.
    Rng rng(4);
    const auto big = random_weights(100'000, rng);
    long double total = 0.0L;
    for (double x : big.weights) total += x;
    CHECK(std::fabs(static_cast<double>(total) - 1.0) < kWeightTolerance);
}

TEST_CASE("every scheme returns N offspring") {
    Rng rng(5);
    for (int trial = 0; trial < 400; ++trial) {
        const std::size_t N = 2 + rng.uniform_index(300);
        const auto w = trial % 3 == 0 ? WeightState::uniform_weights(N) : random_weights(N, rng);
        for (auto scheme : kSchemes) {
            const auto nu = generate_offspring(scheme, w, rng);
            REQUIRE(nu.population() == N);
            CHECK(std::accumulate(nu.counts.begin(), nu.counts.end(), std::size_t{0}) == N);
        }
    }
}

TEST_CASE("scheme argument checks") {
    Rng rng(6);
    CHECK_THROWS(generate_offspring(ResamplingScheme::multinomial, WeightState::uniform_weights(1), rng));
    WeightState bad;
    bad.weights = {0.3, 0.3, 0.3};
    bad.potentials = {1, 1, 1};
    for (auto scheme : kSchemes)
        if (scheme != ResamplingScheme::wright_fisher) CHECK_THROWS(generate_offspring(scheme, bad, rng));
}

TEST_CASE("systematic with equal weights is deterministic") {
    Rng rng(7);
    for (std::size_t N : {2u, 7u, 100u, 1000u}) {
        const auto nu = generate_offspring(ResamplingScheme::systematic, WeightState::uniform_weights(N), rng);
        CHECK(std::all_of(nu.counts.begin(), nu.counts.end(), [](auto v) { return v == 1; }));
    }
}

TEST_CASE("point mass weights") {
    Rng rng(8);
    std::vector<double> g(20, 0.0);
    g[0] = 1.0;
    const auto w = WeightState::from_potentials(g);
    for (auto scheme : kSchemes) {
        if (scheme == ResamplingScheme::wright_fisher) continue;
        const auto nu = generate_offspring(scheme, w, rng);
        CHECK(nu.counts[0] == 20);
    }
}

TEST_CASE("residual and systematic counts stay near N w") {
    Rng rng(9);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t N = 2 + rng.uniform_index(200);
        const auto w = random_weights(N, rng);
        const auto res = generate_offspring(ResamplingScheme::residual, w, rng);
        const auto sys = generate_offspring(ResamplingScheme::systematic, w, rng);
        const auto str = generate_offspring(ResamplingScheme::stratified, w, rng);
        std::size_t floors = 0;
        for (std::size_t i = 0; i < N; ++i) floors += static_cast<std::size_t>(std::floor(N * w.weights[i]));
        for (std::size_t i = 0; i < N; ++i) {
            const double target = N * w.weights[i];
            CHECK(res.counts[i] >= std::floor(target));
            CHECK(res.counts[i] <= std::floor(target) + double(N - floors));
            CHECK(sys.counts[i] >= std::floor(target) - 1e-9);
            CHECK(sys.counts[i] <= std::ceil(target) + 1e-9);
            CHECK(std::fabs(str.counts[i] - target) < 2.0);
        }
    }
}

TEST_CASE("multinomial factorial moments") {
    SUBCASE("uniform weights, N = 100") {
        Rng rng(10);
        const std::size_t N = 100;
        const auto w = WeightState::uniform_weights(N);
        std::vector<double> c;
        for (int r = 0; r < 100'000; ++r) {
            const auto nu = generate_offspring(ResamplingScheme::multinomial, w, rng);
            double s = 0.0;
            for (auto v : nu.counts) s += falling(v, 2);
            c.push_back(s / falling(N, 2));
        }
        const auto m = moments(c);
        CHECK(std::fabs(m.mean - 0.01) < 5.0 * m.se);
    }
    SUBCASE("unequal weights") {
        Rng rng(11);
        const std::size_t N = 30;
        const auto w = random_weights(N, rng);
        double sw2 = 0.0, sw3 = 0.0;
        for (double x : w.weights) sw2 += x * x, sw3 += x * x * x;
        std::vector<double> pair, triple;
        for (int r = 0; r < 100'000; ++r) {
            const auto nu = generate_offspring(ResamplingScheme::multinomial, w, rng);
            double s2 = 0.0, s3 = 0.0;
            for (auto v : nu.counts) s2 += falling(v, 2), s3 += falling(v, 3);
            pair.push_back(s2 / falling(N, 2));
            triple.push_back(s3 / falling(N, 3));
        }
        const auto m2 = moments(pair), m3 = moments(triple);
        CHECK(std::fabs(m2.mean - sw2) < 5.0 * m2.se);
        CHECK(std::fabs(m3.mean - sw3) < 5.0 * m3.se);
    }
}

TEST_CASE("exchangeability of offspring counts") {
    Rng rng(12);
    const auto w = WeightState::uniform_weights(50);
    std::vector<double> first, second;
    for (int r = 0; r < 20'000; ++r) {
        const auto nu = generate_offspring(ResamplingScheme::multinomial, w, rng);
        first.push_back(nu.counts[0]);
        second.push_back(nu.counts[1]);
    }
    CHECK(ks_two_sample(first, second) < ks_two_sample_critical(first.size(), second.size()));
}

TEST_CASE("parent assignment") {
    Rng rng(13);
    SUBCASE("forced") {
        const auto a = assign_parents(OffspringCounts::from({5, 0, 0, 0, 0}), rng);
        CHECK(std::all_of(a.parents.begin(), a.parents.end(), [](auto p) { return p == 0; }));
        CHECK(assign_parents(OffspringCounts::from({2, 0}), rng).parents == std::vector<std::uint32_t>{0, 0});
    }
    SUBCASE("recount reproduces nu") {
        for (int trial = 0; trial < 300; ++trial) {
            const std::size_t N = 2 + rng.uniform_index(100);
            const auto nu = generate_offspring(ResamplingScheme::multinomial, random_weights(N, rng), rng);
            const auto a = assign_parents(nu, rng);
            std::vector<std::uint32_t> recount(N, 0);
            for (auto p : a.parents) ++recount[p];
            CHECK(recount == nu.counts);
        }
    }
    SUBCASE("all ones gives a uniform permutation") {
        std::map<std::vector<std::uint32_t>, int> seen;
        const int R = 60'000;
        for (int r = 0; r < R; ++r) ++seen[assign_parents(OffspringCounts::from({1, 1, 1}), rng).parents];
        CHECK(seen.size() == 6);
        const double p = 1.0 / 6.0, se = std::sqrt(p * (1 - p) / R);
        for (const auto& [perm, count] : seen) {
            CHECK(std::is_permutation(perm.begin(), perm.end(), std::vector<std::uint32_t>{0, 1, 2}.begin()));
            CHECK(std::fabs(double(count) / R - p) < 5 * se);
        }
    }
    CHECK_THROWS(assign_parents(OffspringCounts{{3, 0}}, rng));
}

TEST_CASE("lineage parents follow the assignment law") {
    // Parents of two fixed children: P(a, b) = nu_a (nu_b - [a == b]) / (N (N - 1)).
    const auto nu = OffspringCounts::from({2, 1, 1, 0});
    const double N = 4;
    Rng rng(14);
    const int R = 200'000;
    std::map<std::pair<int, int>, int> partial, full;
    std::vector<std::uint32_t> scratch, out;
    for (int r = 0; r < R; ++r) {
        sample_lineage_parents(nu, 2, rng, scratch, out);
        ++partial[{int(out[0]), int(out[1])}];
        const auto a = assign_parents(nu, rng);
        ++full[{int(a.parents[0]), int(a.parents[1])}];
    }
    for (int x = 0; x < 4; ++x)
        for (int y = 0; y < 4; ++y) {
            const double p = nu.counts[x] * (double(nu.counts[y]) - (x == y)) / (N * (N - 1));
            const double se = std::sqrt(std::max(p * (1 - p), 1e-12) / R);
            CHECK(std::fabs(partial[{x, y}] / double(R) - p) <= 5 * se);
            CHECK(std::fabs(full[{x, y}] / double(R) - p) <= 5 * se);
        }
    CHECK_THROWS(sample_lineage_parents(nu, 5, rng, scratch, out));
}

TEST_CASE("weight evolution") {
    Rng rng(15);
    WeightModelConfig constant;
    const auto w0 = initial_weights(constant, 10, rng);
    CHECK(w0.uniform);
    CHECK(evolve_weights(constant, random_weights(10, rng), nullptr, rng).uniform);

    SUBCASE("degenerate potential gives equal weights") {
        WeightModelConfig iid;
        iid.model = WeightModel::iid_potential;
        iid.potential.kind = PotentialKind::two_point;
        iid.potential.low = 1.5;
        iid.potential.high = 1.5;
        const auto w = evolve_weights(iid, WeightState::uniform_weights(8), nullptr, rng);
        for (double x : w.weights) CHECK(x == doctest::Approx(1.0 / 8));
    }

    SUBCASE("heritability zero matches iid weights") {
        WeightModelConfig iid;
        iid.model = WeightModel::iid_potential;
        iid.potential.kind = PotentialKind::lognormal;
        iid.potential.sigma = 0.7;
        WeightModelConfig inherited = iid;
        inherited.model = WeightModel::inherited_fitness;
        inherited.heritability = 0.0;
        std::vector<double> a, b;
        const std::size_t N = 40;
        auto wa = initial_weights(iid, N, rng);
        auto wb = initial_weights(inherited, N, rng);
        for (int g = 0; g < 500; ++g) {
            const auto nu = generate_offspring(ResamplingScheme::multinomial, wb, rng);
            const auto parents = assign_parents(nu, rng);
            wa = evolve_weights(iid, wa, nullptr, rng);
            wb = evolve_weights(inherited, wb, &parents, rng);
            a.push_back(wa.weights[g % N]);
            b.push_back(wb.weights[g % N]);
        }
        CHECK(ks_two_sample(a, b) < ks_two_sample_critical(a.size(), b.size()));
    }

    SUBCASE("inherited fitness needs parents") {
        WeightModelConfig inherited;
        inherited.model = WeightModel::inherited_fitness;
        inherited.heritability = 0.5;
        CHECK(inherited.needs_parents());
        CHECK_THROWS(evolve_weights(inherited, WeightState::uniform_weights(4), nullptr, rng));
    }

    SUBCASE("potential parameters are checked") {
        PotentialDistribution p;
        p.kind = PotentialKind::uniform;
        p.low = 2.0;
        p.high = 1.0;
        CHECK_THROWS(p.validate());
        p.kind = PotentialKind::two_point;
        p.low = 0.0;
        p.high = 0.0;
        CHECK_THROWS(p.validate());
    }
}

TEST_CASE("names round-trip") {
    for (auto s : kSchemes) CHECK(parse_scheme(to_string(s)) == s);
    for (auto m : {WeightModel::constant, WeightModel::iid_potential, WeightModel::inherited_fitness,
                   WeightModel::point_mass})
        CHECK(parse_weight_model(to_string(m)) == m);
    for (auto k : {PotentialKind::lognormal, PotentialKind::uniform, PotentialKind::two_point})
        CHECK(parse_potential_kind(to_string(k)) == k);
    CHECK_FALSE(parse_scheme("bogus").has_value());
}
