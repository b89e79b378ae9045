#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "coalsim/kingman.hpp"
#include "coalsim/particle.hpp"
#include "coalsim/partition.hpp"

namespace coalsim {

/// Conditional pair-merger probability c and multiple-merger bound d of one
/// generation:
///   c = sum_i (nu_i)_2 / (N)_2
///   d = sum_i (nu_i)_2 { nu_i + (1/N) sum_{j != i} nu_j^2 } / (N (N)_2)
/// Numerators are accumulated in exact integer arithmetic; d is formed as
/// c times a ratio <= 1, so d <= c survives rounding.
struct CoalescenceRates {
    double c = 0.0;
    double d = 0.0;
};

CoalescenceRates coalescence_rates(const OffspringCounts& nu);

struct ClockRecord {
    std::size_t generation = 0;  // 1-based
    double c = 0.0;
    double d = 0.0;
    double cum = 0.0;  // sum_{r <= generation} c(r)
};

/// Per-generation (c, d) with the running sum of c that drives the random
/// time change. Generation 0 is implicit with c = d = cum = 0.
class CoalescenceClock {
  public:
    CoalescenceClock() = default;
    /// Hand-built clock; values are stored as given (checkers may then flag them).
    static CoalescenceClock from_rates(std::span<const double> c, std::span<const double> d);

    void append(double c, double d);
    void append(const CoalescenceRates& r) { append(r.c, r.d); }

    std::size_t generations() const { return records_.size(); }
    const std::vector<ClockRecord>& records() const { return records_; }

    /// cum after g generations; cum(0) = 0. Requires g <= generations().
    double cum(std::size_t g) const { return g == 0 ? 0.0 : records_[g - 1].cum; }
    /// c of generation g; c(0) = 0.
    double c(std::size_t g) const { return g == 0 ? 0.0 : records_[g - 1].c; }
    double d(std::size_t g) const { return g == 0 ? 0.0 : records_[g - 1].d; }

    /// inf{ s >= 0 : cum(s) >= t }, or nullopt when the recorded generations
    /// never reach t. tau(t) = 0 for t <= 0.
    std::optional<std::size_t> tau(double t) const;

    /// Rescaled time at which a change at generation g is placed:
    /// inf{ u : tau(u) >= g } = cum(g - 1).
    double event_time(std::size_t g) const { return cum(g - 1); }

    /// CSV rows "generation,c,d,cum" with a header line.
    void write_csv(std::ostream& out) const;

  private:
    std::vector<ClockRecord> records_;
    long double running_ = 0.0L;
};

/// tau as a hard query: throws HorizonExceeded when the clock is too short.
std::size_t tau_inverse_clock(const CoalescenceClock& clock, double t);

struct GenealogyEvent {
    std::size_t generation = 0;
    double rescaled_time = 0.0;
    Partition partition;
};

enum class PathEnd {
    coalesced,  // reached a single block
    horizon,    // reached tau(t_max) first
    censored,   // ran out of generations (hard cap or exhausted input) first
};

std::string_view to_string(PathEnd e);

/// Partition-valued path of the sample genealogy in reverse time. The value
/// at rescaled time u is the partition of the last event with time <= u.
struct GenealogyPath {
    std::size_t n = 0;
    std::size_t population = 0;
    std::vector<GenealogyEvent> events;
    PathEnd end = PathEnd::censored;
    std::size_t generations_traced = 0;
    double end_time = 0.0;  // rescaled time covered by the traced generations

    Partition state_at(double u) const;
};

/// Follows sample lineages backwards, one generation at a time. Block k of
/// the current partition sits on individual positions()[k].
class LineageTracker {
  public:
    explicit LineageTracker(std::span<const std::uint32_t> sample_positions);

    const Partition& partition() const { return partition_; }
    std::span<const std::uint32_t> positions() const { return positions_; }
    std::size_t block_count() const { return positions_.size(); }

    /// Moves block k to block_parents[k]. Returns true when at least two
    /// blocks met in a common parent (the partition coarsened).
    bool step(std::span<const std::uint32_t> block_parents);

  private:
    Partition partition_;
    std::vector<std::uint32_t> positions_;
};

/// Traces the genealogy of the sampled individuals through explicit parent
/// assignments (assignments[g-1] holds generation g). Stops on coalescence,
/// on reaching tau(horizon_t), or when assignments or clock run out; the last
/// case returns a path flagged as censored.
GenealogyPath trace_genealogy(std::span<const std::uint32_t> sample, std::span<const ParentAssignment> assignments,
                              const CoalescenceClock& clock, double horizon_t);

struct PathStatistics {
    std::vector<double> holding_times;
    std::vector<double> jump_times;
    std::optional<double> tmrca;
    double total_branch_length = 0.0;
    /// Smallest gap between consecutive jumps; +inf with fewer than two jumps.
    double min_jump_gap = std::numeric_limits<double>::infinity();
    /// Gap from time 0 to the first jump; +inf without jumps.
    double first_jump_gap = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> merger_sizes;
    /// level_sojourns[k] is the time spent with exactly k blocks (0 when the
    /// level was skipped by a multiple merger), for k = 2..n; nullopt when
    /// the path ended before leaving level k. Indices 0 and 1 are unused.
    std::vector<std::optional<double>> level_sojourns;
};

PathStatistics path_statistics(const GenealogyPath& path);
PathStatistics path_statistics(const CoalescentPath& path);

/// Rooted Newick tree with rescaled branch lengths and 1-based leaf labels;
/// multiple mergers become multifurcations. Throws std::invalid_argument for
/// paths that did not reach a single block.
std::string to_newick(const GenealogyPath& path);
std::string to_newick(const CoalescentPath& path);

/// Shortest round-trip decimal, always with a fractional part ("1.0").
std::string format_real(double x);

}  // namespace coalsim
