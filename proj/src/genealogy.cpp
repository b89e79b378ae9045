#include "coalsim/genealogy.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "coalsim/errors.hpp"

namespace coalsim {

CoalescenceRates coalescence_rates(const OffspringCounts& nu) {
    const std::size_t N = nu.population();
    if (N < 2) throw std::invalid_argument("coalescence rates need N >= 2");
    using u128 = unsigned __int128;
    u128 pair = 0;
    u128 square_sum = 0;
    for (std::uint64_t v : nu.counts) {
        if (v >= 2) pair += v * (v - 1);
        square_sum += v * v;
    }
    u128 multiple = 0;
    const u128 n128 = N;
    for (std::uint64_t v : nu.counts) {
        if (v < 2) continue;
        multiple += u128{v * (v - 1)} * (n128 * v + square_sum - u128{v} * v);
    }
    if (multiple > n128 * n128 * pair) throw ConsistencyError("multiple-merger bound exceeds pair-merger probability");

    const long double falling2 = static_cast<long double>(N) * static_cast<long double>(N - 1);
    CoalescenceRates r;
    r.c = static_cast<double>(static_cast<long double>(pair) / falling2);
    if (pair > 0) {
        const auto ratio = static_cast<double>(static_cast<long double>(multiple) /
                                               (static_cast<long double>(n128 * n128 * pair)));
        r.d = r.c * std::min(ratio, 1.0);
    }
    return r;
}

CoalescenceClock CoalescenceClock::from_rates(std::span<const double> c, std::span<const double> d) {
    if (c.size() != d.size()) throw std::invalid_argument("c and d sequences differ in length");
    CoalescenceClock clock;
    for (std::size_t i = 0; i < c.size(); ++i) clock.append(c[i], d[i]);
    return clock;
}

void CoalescenceClock::append(double c, double d) {
    if (!std::isfinite(c) || !std::isfinite(d)) throw std::invalid_argument("clock rates must be finite");
    running_ += c;
    records_.push_back({records_.size() + 1, c, d, static_cast<double>(running_)});
}

std::optional<std::size_t> CoalescenceClock::tau(double t) const {
    if (t <= 0.0) return 0;
    auto it = std::lower_bound(records_.begin(), records_.end(), t,
                               [](const ClockRecord& r, double value) { return r.cum < value; });
    if (it == records_.end()) return std::nullopt;
    return it->generation;
}

void CoalescenceClock::write_csv(std::ostream& out) const {
    out << "generation,c,d,cum\n";
    for (const auto& r : records_)
        out << r.generation << ',' << format_real(r.c) << ',' << format_real(r.d) << ',' << format_real(r.cum) << '\n';
}

std::size_t tau_inverse_clock(const CoalescenceClock& clock, double t) {
    auto g = clock.tau(t);
    if (!g)
        throw HorizonExceeded("clock covers " + std::to_string(clock.generations()) +
                              " generations and never reaches rescaled time " + format_real(t));
    return *g;
}

std::string_view to_string(PathEnd e) {
    switch (e) {
        case PathEnd::coalesced: return "coalesced";
        case PathEnd::horizon: return "horizon";
        case PathEnd::censored: return "censored";
    }
    return "?";
}

Partition GenealogyPath::state_at(double u) const {
    const GenealogyEvent* last = nullptr;
    for (const auto& e : events) {
        if (e.rescaled_time > u) break;
        last = &e;
    }
    return last ? last->partition : Partition::singletons(n);
}

LineageTracker::LineageTracker(std::span<const std::uint32_t> sample_positions)
    : partition_(Partition::singletons(sample_positions.size())),
      positions_(sample_positions.begin(), sample_positions.end()) {
    auto sorted = positions_;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw std::invalid_argument("sample positions must be distinct");
}

bool LineageTracker::step(std::span<const std::uint32_t> block_parents) {
    if (block_parents.size() != positions_.size()) throw std::invalid_argument("one parent per block required");
    bool met = false;
    for (std::size_t a = 0; a < block_parents.size() && !met; ++a)
        for (std::size_t b = a + 1; b < block_parents.size(); ++b)
            if (block_parents[a] == block_parents[b]) {
                met = true;
                break;
            }
    if (!met) {
        positions_.assign(block_parents.begin(), block_parents.end());
        return false;
    }
    std::vector<std::uint32_t> labels(partition_.n());
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = block_parents[partition_.block_of(i)];
    partition_ = Partition::from_labels(labels);
    positions_.assign(partition_.block_count(), 0);
    for (std::size_t i = 0; i < labels.size(); ++i) positions_[partition_.block_of(i)] = labels[i];
    return true;
}

GenealogyPath trace_genealogy(std::span<const std::uint32_t> sample, std::span<const ParentAssignment> assignments,
                              const CoalescenceClock& clock, double horizon_t) {
    LineageTracker tracker(sample);
    GenealogyPath path;
    path.n = sample.size();
    path.population = assignments.empty() ? 0 : assignments.front().parents.size();
    const auto limit = clock.tau(horizon_t);
    const std::size_t available = std::min(assignments.size(), clock.generations());

    std::vector<std::uint32_t> parents;
    std::size_t g = 0;
    while (true) {
        if (tracker.block_count() == 1) {
            path.end = PathEnd::coalesced;
            break;
        }
        if (limit && g >= *limit) {
            path.end = PathEnd::horizon;
            break;
        }
        if (g >= available) {
            path.end = PathEnd::censored;
            break;
        }
        ++g;
        const auto& a = assignments[g - 1].parents;
        parents.clear();
        for (auto pos : tracker.positions()) {
            if (pos >= a.size()) throw std::invalid_argument("lineage position outside the population");
            parents.push_back(a[pos]);
        }
        if (tracker.step(parents)) path.events.push_back({g, clock.event_time(g), tracker.partition()});
    }
    path.generations_traced = g;
    path.end_time = clock.cum(g);
    return path;
}

namespace {

struct Jump {
    double time;
    std::size_t blocks_after;
};

PathStatistics statistics_from_jumps(std::size_t n, const std::vector<Jump>& jumps, bool coalesced, double end_time) {
    PathStatistics s;
    s.level_sojourns.assign(n + 1, std::nullopt);
    for (std::size_t k = 2; k <= n; ++k) s.level_sojourns[k] = 0.0;

    double prev_time = 0.0;
    std::size_t blocks = n;
    for (const auto& j : jumps) {
        const double hold = j.time - prev_time;
        s.jump_times.push_back(j.time);
        s.holding_times.push_back(hold);
        s.total_branch_length += static_cast<double>(blocks) * hold;
        if (blocks >= 2) s.level_sojourns[blocks] = hold;
        s.merger_sizes.push_back(blocks - j.blocks_after);
        prev_time = j.time;
        blocks = j.blocks_after;
    }
    if (coalesced) {
        s.tmrca = prev_time;
    } else {
        s.total_branch_length += static_cast<double>(blocks) * (end_time - prev_time);
        for (std::size_t k = 2; k <= blocks; ++k) s.level_sojourns[k] = std::nullopt;
    }
    if (!s.jump_times.empty()) s.first_jump_gap = s.jump_times.front();
    for (std::size_t i = 1; i < s.jump_times.size(); ++i)
        s.min_jump_gap = std::min(s.min_jump_gap, s.jump_times[i] - s.jump_times[i - 1]);
    return s;
}

template <typename Event, typename TimeOf>
std::string newick_from_events(std::size_t n, const std::vector<Event>& events, TimeOf time_of) {
    struct Node {
        std::string text;
        double time;
    };
    std::vector<Node> nodes;
    for (std::size_t i = 0; i < n; ++i) nodes.push_back({std::to_string(i + 1), 0.0});
    Partition current = Partition::singletons(n);
    for (const auto& e : events) {
        const double t = time_of(e);
        const Partition& next = e.partition;
        if (!merge_profile(current, next)) throw std::invalid_argument("path partitions do not form a coarsening chain");
        // Children of each new block, in canonical order of the old blocks.
        std::vector<std::vector<std::size_t>> children(next.block_count());
        std::vector<bool> seen(current.block_count(), false);
        for (std::size_t i = 0; i < n; ++i) {
            const auto old_block = current.block_of(i);
            if (seen[old_block]) continue;
            seen[old_block] = true;
            children[next.block_of(i)].push_back(old_block);
        }
        std::vector<Node> merged(next.block_count());
        for (std::size_t b = 0; b < children.size(); ++b) {
            if (children[b].size() == 1) {
                merged[b] = std::move(nodes[children[b][0]]);
                continue;
            }
            std::string text = "(";
            for (std::size_t k = 0; k < children[b].size(); ++k) {
                const auto& child = nodes[children[b][k]];
                if (k) text += ',';
                text += child.text + ':' + format_real(t - child.time);
            }
            text += ')';
            merged[b] = {std::move(text), t};
        }
        nodes = std::move(merged);
        current = next;
    }
    if (nodes.size() != 1) throw std::invalid_argument("Newick export needs a fully coalesced path");
    return nodes[0].text + ";";
}

}  // namespace

PathStatistics path_statistics(const GenealogyPath& path) {
    std::vector<Jump> jumps;
    for (const auto& e : path.events) jumps.push_back({e.rescaled_time, e.partition.block_count()});
    return statistics_from_jumps(path.n, jumps, path.end == PathEnd::coalesced, path.end_time);
}

PathStatistics path_statistics(const CoalescentPath& path) {
    std::vector<Jump> jumps;
    for (const auto& e : path.events) jumps.push_back({e.time, e.partition.block_count()});
    const bool coalesced = !path.events.empty() ? path.events.back().partition.block_count() == 1 : path.n == 1;
    return statistics_from_jumps(path.n, jumps, coalesced, jumps.empty() ? 0.0 : jumps.back().time);
}

std::string to_newick(const GenealogyPath& path) {
    if (path.end != PathEnd::coalesced) throw std::invalid_argument("Newick export needs a fully coalesced path");
    return newick_from_events(path.n, path.events, [](const GenealogyEvent& e) { return e.rescaled_time; });
}

std::string to_newick(const CoalescentPath& path) {
    return newick_from_events(path.n, path.events, [](const CoalescentEvent& e) { return e.time; });
}

std::string format_real(double x) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    std::string s(buf, ptr);
    if (std::isfinite(x) && s.find_first_of(".e") == std::string::npos) s += ".0";
    return s;
}

}  // namespace coalsim
