#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <set>

#include "coalsim/partition.hpp"
#include "coalsim/rng.hpp"

using namespace coalsim;

namespace {

// Bell numbers from the Bell triangle.
std::vector<std::uint64_t> bell_triangle(std::size_t n_max) {
    std::vector<std::uint64_t> bell{1};
    std::vector<std::uint64_t> row{1};
    for (std::size_t i = 1; i <= n_max; ++i) {
        std::vector<std::uint64_t> next{row.back()};
        for (auto v : row) next.push_back(next.back() + v);
        bell.push_back(next.front());
        row = next;
    }
    return bell;
}

Partition P(std::size_t n, std::vector<std::vector<std::uint32_t>> one_based) {
    for (auto& b : one_based)
        for (auto& x : b) --x;
    return Partition::from_blocks(n, one_based);
}

}  // namespace

TEST_CASE("singletons") {
    CHECK(make_singletons(3).to_string() == "{{1},{2},{3}}");
    CHECK(make_singletons(1).to_string() == "{{1}}");
    const auto p = make_singletons(5);
    CHECK(p.block_count() == 5);
    for (std::size_t i = 0; i < 5; ++i) CHECK(p.blocks()[i] == std::vector<std::uint32_t>{static_cast<std::uint32_t>(i)});
    CHECK_THROWS(make_singletons(0));
}

TEST_CASE("merge blocks") {
    const std::size_t first_two[] = {0, 1};
    CHECK(merge_blocks(make_singletons(3), first_two).to_string() == "{{1,2},{3}}");
    CHECK(merge_blocks(P(3, {{1, 2}, {3}}), first_two).to_string() == "{{1,2,3}}");
    const std::size_t three[] = {0, 2, 3};
    CHECK(merge_blocks(make_singletons(4), three).to_string() == "{{1,3,4},{2}}");

    const std::size_t one[] = {1};
    const std::size_t twice[] = {1, 1};
    const std::size_t out_of_range[] = {0, 3};
    CHECK_THROWS_AS(merge_blocks(make_singletons(3), one), std::invalid_argument);
    CHECK_THROWS_AS(merge_blocks(make_singletons(3), twice), std::invalid_argument);
    CHECK_THROWS_AS(merge_blocks(make_singletons(3), out_of_range), std::invalid_argument);
}

TEST_CASE("merge lowers the block count by |which| - 1") {
    Rng rng(3);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = 2 + rng.uniform_index(8);
        auto parts = enumerate_partitions(n);
        const auto& p = parts[rng.uniform_index(parts.size())];
        if (p.block_count() < 2) continue;
        std::vector<std::size_t> which;
        for (std::size_t b = 0; b < p.block_count(); ++b)
            if (rng.uniform01() < 0.5) which.push_back(b);
        if (which.size() < 2) continue;
        const auto q = merge_blocks(p, which);
        CHECK(q.block_count() == p.block_count() - which.size() + 1);
        CHECK(merge_profile(p, q).has_value());
    }
}

TEST_CASE("merge profile") {
    CHECK(merge_profile(make_singletons(3), P(3, {{1, 2}, {3}}))->counts == std::vector<std::uint32_t>{2, 1});
    CHECK(merge_profile(make_singletons(4), Partition::single_block(4))->counts == std::vector<std::uint32_t>{4});
    CHECK_FALSE(merge_profile(P(3, {{1, 2}, {3}}), P(3, {{1, 3}, {2}})).has_value());
    CHECK_THROWS_AS(merge_profile(make_singletons(3), make_singletons(4)), std::invalid_argument);

    for (const auto& xi : enumerate_partitions(5)) {
        const auto b = merge_profile(xi, xi);
        REQUIRE(b.has_value());
        CHECK(b->counts == std::vector<std::uint32_t>(xi.block_count(), 1));
    }
}

TEST_CASE("merging along a profile reproduces the coarser partition") {
    const auto parts = enumerate_partitions(5);
    std::size_t pairs = 0;
    for (const auto& xi : parts)
        for (const auto& eta : parts) {
            const auto b = merge_profile(xi, eta);
            if (!b) continue;
            ++pairs;
            std::uint32_t total = 0;
            for (auto v : b->counts) total += v;
            CHECK(total == xi.block_count());
            Partition cur = xi;
            for (const auto& block : eta.blocks()) {
                std::set<std::size_t> which;
                for (auto x : block) which.insert(cur.block_of(x));
                if (which.size() < 2) continue;
                const std::vector<std::size_t> idx(which.begin(), which.end());
                cur = merge_blocks(cur, idx);
            }
            CHECK(cur == eta);
        }
    CHECK(pairs > parts.size());
}

TEST_CASE("enumeration") {
    const auto bell = bell_triangle(10);
    CHECK(enumerate_partitions(1).size() == 1);
    CHECK(enumerate_partitions(3).size() == 5);
    CHECK(enumerate_partitions(4).size() == 15);
    for (std::size_t n = 1; n <= 9; ++n) {
        const auto parts = enumerate_partitions(n);
        CHECK(parts.size() == bell[n]);
        CHECK(bell_number(n) == bell[n]);
        CHECK(std::is_sorted(parts.begin(), parts.end()));
        CHECK(std::adjacent_find(parts.begin(), parts.end()) == parts.end());
        CHECK(std::find(parts.begin(), parts.end(), make_singletons(n)) != parts.end());
        CHECK(std::find(parts.begin(), parts.end(), Partition::single_block(n)) != parts.end());
        for (const auto& p : parts) CHECK(Partition::from_labels(p.labels()) == p);
    }
    CHECK_THROWS(enumerate_partitions(0));
    CHECK_THROWS(enumerate_partitions(kMaxEnumerableN + 1));
}

TEST_CASE("canonical form") {
    const std::uint32_t labels[] = {7, 3, 7, 9};
    const auto p = Partition::from_labels(labels);
    CHECK(p.to_string() == "{{1,3},{2},{4}}");
    CHECK(p == P(4, {{4}, {2}, {3, 1}}));
    CHECK_THROWS(Partition::from_blocks(3, {{0, 1}}));
    CHECK_THROWS(Partition::from_blocks(3, {{0, 1}, {1, 2}}));
    CHECK_THROWS(Partition::from_blocks(3, {{0, 1, 2}, {}}));
}
