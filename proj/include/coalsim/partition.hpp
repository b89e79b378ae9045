#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace coalsim {

/// A set partition of {0, ..., n-1}.
///
/// Stored as a restricted growth string: label(i) is the index of the block
/// containing element i, and blocks are numbered in order of their least
/// element. That numbering is the canonical block order, so two partitions
/// are equal exactly when their label vectors are equal.
///
/// Elements are 0-based in the API; textual rendering is 1-based, e.g.
/// "{{1,2},{3}}".
class Partition {
  public:
    /// All-singletons partition of n elements. Throws for n == 0.
    static Partition singletons(std::size_t n);
    /// Single block containing all n elements.
    static Partition single_block(std::size_t n);
    /// Builds from arbitrary block labels (any integers); canonicalizes.
    static Partition from_labels(std::span<const std::uint32_t> labels);
    /// Builds from explicit blocks of 0-based elements. Throws unless the
    /// blocks are disjoint, non-empty and cover {0..n-1}.
    static Partition from_blocks(std::size_t n, const std::vector<std::vector<std::uint32_t>>& blocks);

    std::size_t n() const { return labels_.size(); }
    std::size_t block_count() const { return block_count_; }
    std::uint32_t block_of(std::size_t element) const { return labels_[element]; }
    std::span<const std::uint32_t> labels() const { return labels_; }

    /// Blocks in canonical order, elements ascending.
    std::vector<std::vector<std::uint32_t>> blocks() const;
    /// Size of every block, canonical order.
    std::vector<std::uint32_t> block_sizes() const;

    bool is_singletons() const { return block_count_ == labels_.size(); }

    std::string to_string() const;

    friend bool operator==(const Partition&, const Partition&) = default;
    friend auto operator<=>(const Partition& a, const Partition& b) { return a.labels_ <=> b.labels_; }

  private:
    explicit Partition(std::vector<std::uint32_t> labels, std::size_t blocks)
        : labels_(std::move(labels)), block_count_(blocks) {}

    std::vector<std::uint32_t> labels_;
    std::size_t block_count_ = 0;
};

/// b_i = number of blocks of the finer partition merged into block i of the
/// coarser one (coarser blocks in canonical order).
struct MergeProfile {
    std::vector<std::uint32_t> counts;

    friend bool operator==(const MergeProfile&, const MergeProfile&) = default;
};

Partition make_singletons(std::size_t n);

/// Unions the blocks with the given (0-based, canonical) indices.
/// Throws std::invalid_argument for fewer than two distinct indices or an
/// index out of range.
Partition merge_blocks(const Partition& p, std::span<const std::size_t> which);

/// Profile of eta relative to xi, or nullopt when eta is not obtainable from
/// xi by merging blocks. Throws std::invalid_argument if the sizes differ.
std::optional<MergeProfile> merge_profile(const Partition& xi, const Partition& eta);

inline constexpr std::size_t kMaxEnumerableN = 10;

/// Every partition of {0..n-1} once, in lexicographic order of the label
/// vector. Throws for n == 0 or n > kMaxEnumerableN.
std::vector<Partition> enumerate_partitions(std::size_t n);

/// Bell number B(n), exact for n <= 25.
std::uint64_t bell_number(std::size_t n);

}  // namespace coalsim
