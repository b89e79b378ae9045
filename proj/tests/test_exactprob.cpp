#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <functional>
#include <map>
#include <sstream>

#include "coalsim/errors.hpp"
#include "coalsim/exactprob.hpp"

using namespace coalsim;

namespace {

Partition P(std::size_t n, std::vector<std::vector<std::uint32_t>> one_based) {
    for (auto& b : one_based)
        for (auto& x : b) --x;
    return Partition::from_blocks(n, one_based);
}

OffspringCounts random_nu(std::size_t N, Rng& rng) {
    std::vector<std::uint32_t> c(N, 0);
    const std::size_t support = 1 + rng.uniform_index(N);
    for (std::size_t j = 0; j < N; ++j) ++c[rng.uniform_index(support)];
    return OffspringCounts::from(c);
}

// Probability of moving from xi to eta, by listing every ordered choice of
// distinct child slots for the blocks of xi in the parent multiset and
// reading off which blocks share a parent.
Rational by_assignment(const Partition& xi, const Partition& eta, const OffspringCounts& nu) {
    std::vector<std::uint32_t> multiset;
    for (std::uint32_t i = 0; i < nu.counts.size(); ++i) multiset.insert(multiset.end(), nu.counts[i], i);
    const std::size_t k = xi.block_count(), N = multiset.size();
    std::vector<std::size_t> slot(k);
    std::vector<bool> used(N, false);
    BigInt hits = 0, total = 0;
    std::function<void(std::size_t)> rec = [&](std::size_t j) {
        if (j == k) {
            ++total;
            std::vector<std::uint32_t> labels(xi.n());
            for (std::size_t e = 0; e < xi.n(); ++e) labels[e] = multiset[slot[xi.block_of(e)]];
            if (Partition::from_labels(labels) == eta) ++hits;
            return;
        }
        for (std::size_t s = 0; s < N; ++s) {
            if (used[s]) continue;
            used[s] = true;
            slot[j] = s;
            rec(j + 1);
            used[s] = false;
        }
    };
    rec(0);
    return Rational(hits, total);
}

// e_k by summing over all k-subsets.
BigInt e_by_subsets(const OffspringCounts& nu, std::size_t k) {
    BigInt total = 0;
    const std::size_t N = nu.population();
    std::vector<std::size_t> idx(k);
    std::function<void(std::size_t, std::size_t, BigInt)> rec = [&](std::size_t from, std::size_t depth, BigInt prod) {
        if (depth == k) {
            total += prod;
            return;
        }
        for (std::size_t i = from; i < N; ++i) rec(i + 1, depth + 1, prod * nu.counts[i]);
    };
    rec(0, 0, BigInt(1));
    return total;
}

}  // namespace

TEST_CASE("transition probabilities by hand") {
    const auto ones = OffspringCounts::from({1, 1, 1});
    for (const auto& xi : enumerate_partitions(3)) CHECK(transition_probability_exact(xi, xi, ones) == 1);

    const auto nu = OffspringCounts::from({2, 1, 0});
    const auto delta2 = make_singletons(2);
    CHECK(transition_probability_exact(delta2, delta2, nu) == Rational(2, 3));
    CHECK(transition_probability_exact(delta2, Partition::single_block(2), nu) == Rational(1, 3));
    CHECK(transition_probability(delta2, delta2, nu) == doctest::Approx(2.0 / 3));

    // Not a coarsening: probability zero.
    CHECK(transition_probability_exact(P(3, {{1, 2}, {3}}), P(3, {{1, 3}, {2}}), nu) == 0);
}

TEST_CASE("dynamic programme matches slot enumeration") {
    Rng rng(2);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t N = 1 + rng.uniform_index(7);
        const auto nu = random_nu(N, rng);
        const std::size_t n = 1 + rng.uniform_index(std::min<std::size_t>(N, 4));
        const auto parts = enumerate_partitions(n);
        for (const auto& xi : parts)
            for (const auto& eta : parts) {
                const auto exact = transition_probability_exact(xi, eta, nu);
                CHECK(exact == by_assignment(xi, eta, nu));
                CHECK(transition_probability(xi, eta, nu) == doctest::Approx(exact.convert_to<double>()).epsilon(1e-12));
            }
    }
}

TEST_CASE("profile guard") {
    const auto nu = OffspringCounts::from(std::vector<std::uint32_t>(20, 1));
    const std::vector<std::uint32_t> profile(kMaxProfileBlocks + 1, 1);
    CHECK_THROWS(profile_weight_exact(profile, nu));
}

TEST_CASE("identity probabilities") {
    const auto nu = OffspringCounts::from({2, 1, 0});
    CHECK(identity_probability_exact(1, nu) == 1);
    CHECK(identity_probability_exact(2, nu) == Rational(2, 3));
    CHECK(identity_probability_exact(3, nu) == 0);
    CHECK(identity_probability_exact(2, OffspringCounts::from({2, 2, 0, 0})) == Rational(2, 3));
    CHECK(identity_probability(2, nu) == doctest::Approx(2.0 / 3));
    CHECK_THROWS(identity_probability(0, nu));
    CHECK_THROWS(identity_probability(4, nu));

    Rng rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t N = 1 + rng.uniform_index(10);
        const auto nu2 = random_nu(N, rng);
        const std::size_t k_max = std::min<std::size_t>(N, 5);
        const auto e = elementary_symmetric_exact(k_max, nu2);
        for (std::size_t k = 0; k <= k_max; ++k) CHECK(e[k] == e_by_subsets(nu2, k));
        for (std::size_t k = 1; k <= std::min<std::size_t>(k_max, 4); ++k) {
            const auto xi = enumerate_partitions(4)[rng.uniform_index(15)];
            if (xi.block_count() != k) continue;
            CHECK(identity_probability_exact(k, nu2) == transition_probability_exact(xi, xi, nu2));
        }
    }

    // Floating point against exact on large populations.
    for (std::size_t N : {100u, 1000u, 5000u}) {
        const auto big = random_nu(N, rng);
        const auto p = identity_probabilities(8, big);
        CHECK(p[0] == 1.0);
        for (std::size_t k = 1; k <= 8; ++k)
            CHECK(p[k] == doctest::Approx(identity_probability_exact(k, big).convert_to<double>()).epsilon(1e-12));
    }
}

TEST_CASE("maximal jump probability") {
    CHECK(max_jump_probability(3, OffspringCounts::from({1, 1, 1, 1})) == 0.0);
    CHECK(max_jump_probability(2, OffspringCounts::from({2, 1, 0})) == doctest::Approx(1.0 / 3));
    CHECK(max_jump_probability(2, OffspringCounts::from({5, 0, 0, 0, 0})) == 1.0);
    CHECK_THROWS(max_jump_probability(4, OffspringCounts::from({2, 1, 0})));
}

TEST_CASE("coupled rows") {
    Rng rng(4);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t N = 3 + rng.uniform_index(10);
        const auto nu = random_nu(N, rng);
        const std::size_t n = 2 + rng.uniform_index(std::min<std::size_t>(N, 5) - 1);
        const auto row_delta = coupled_row(make_singletons(n), nu);
        CHECK(row_delta.counter_only == 0.0);
        for (const auto& s : enumerate_partitions(n)) {
            const auto row = coupled_row(s, nu);
            CHECK(row.counter_only >= 0.0);
            double total = row.stay + row.counter_only;
            for (double m : row.moves) total += m;
            CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(row.stay == doctest::Approx(identity_probability(n, nu)).epsilon(1e-14));
        }
    }
    const auto ones = OffspringCounts::from({1, 1, 1, 1});
    const auto row = coupled_row(P(3, {{1, 3}, {2}}), ones);
    CHECK(row.stay == 1.0);
    CHECK(row.counter_only == 0.0);
}

TEST_CASE("coupled step law") {
    // One step from {{1},{2},{3}} under a fixed nu, against the exact row.
    const auto nu = OffspringCounts::from({3, 1, 1, 0, 0});
    const auto s = make_singletons(3);
    const auto parts = enumerate_partitions(3);
    Rng rng(5);
    const int R = 1'000'000;
    std::map<Partition, int> seen;
    int z_up = 0;
    for (int r = 0; r < R; ++r) {
        const auto next = coupled_step(CoupledState{0, s}, nu, rng);
        CHECK(next.z <= 1);
        if (!(next.s == s)) CHECK(next.z == 1);
        z_up += int(next.z);
        ++seen[next.s];
    }
    double tv = 0.0;
    for (const auto& eta : parts) {
        const double p = transition_probability_exact(s, eta, nu).convert_to<double>();
        tv += std::fabs(seen[eta] / double(R) - p);
    }
    CHECK(tv / 2 < 0.005);
    CHECK(std::fabs(z_up / double(R) - max_jump_probability(3, nu)) < 0.005);
}

TEST_CASE("coupled chain trajectories") {
    Environment flat;
    flat.generations.assign(5, OffspringCounts::from({1, 1, 1, 1}));
    Rng rng(6);
    const auto path = simulate_coupled(3, flat, rng);
    REQUIRE(path.size() == 6);
    for (const auto& st : path) CHECK(st == (CoupledState{0, make_singletons(3)}));

    Environment env;
    for (int g = 0; g < 8; ++g) env.generations.push_back(random_nu(6, rng));
    const CoupledChainKernel kernel(4, env);
    for (int r = 0; r < 5000; ++r) {
        const auto traj = kernel.run(rng);
        std::size_t changes = 0;
        for (std::size_t t = 1; t < traj.size(); ++t) {
            CHECK(traj[t].z >= traj[t - 1].z);
            CHECK(traj[t].z - traj[t - 1].z <= 1);
            if (!(traj[t].s == traj[t - 1].s)) {
                ++changes;
                CHECK(traj[t].z == traj[t - 1].z + 1);
            }
        }
        CHECK(changes <= traj.back().z);
    }

    Environment mixed;
    mixed.generations = {OffspringCounts::from({1, 1}), OffspringCounts::from({3, 0, 0})};
    CHECK_THROWS(mixed.validate());
    CHECK_THROWS(Environment{}.validate());
}

TEST_CASE("transition matrix export") {
    const auto m = transition_matrix(3, OffspringCounts::from({2, 1, 1, 0}));
    REQUIRE(m.states.size() == 5);
    for (const auto& row : m.p) {
        double s = 0.0;
        for (double v : row) s += v;
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
    std::ostringstream out;
    write_transition_csv(out, m);
    std::string header;
    std::getline(std::istringstream(out.str()) >> std::ws, header);
    CHECK(header.find("{{1},{2},{3}}") != std::string::npos);
}

TEST_CASE("falling factorial") {
    CHECK(falling_factorial_exact(8, 3) == 336);
    CHECK(falling_factorial_exact(3, 4) == 0);
    CHECK(falling_factorial_exact(5, 0) == 1);
}
