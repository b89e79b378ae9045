#include "coalsim/partition.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_map>

namespace coalsim {

Partition Partition::singletons(std::size_t n) {
    if (n == 0) throw std::invalid_argument("partition size must be positive");
    std::vector<std::uint32_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<std::uint32_t>(i);
    return Partition(std::move(labels), n);
}

Partition Partition::single_block(std::size_t n) {
    if (n == 0) throw std::invalid_argument("partition size must be positive");
    return Partition(std::vector<std::uint32_t>(n, 0), 1);
}

Partition Partition::from_labels(std::span<const std::uint32_t> labels) {
    if (labels.empty()) throw std::invalid_argument("partition size must be positive");
    std::unordered_map<std::uint32_t, std::uint32_t> relabel;
    std::vector<std::uint32_t> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto [it, inserted] = relabel.try_emplace(labels[i], static_cast<std::uint32_t>(relabel.size()));
        out[i] = it->second;
    }
    const std::size_t blocks = relabel.size();
    return Partition(std::move(out), blocks);
}

Partition Partition::from_blocks(std::size_t n, const std::vector<std::vector<std::uint32_t>>& blocks) {
    if (n == 0) throw std::invalid_argument("partition size must be positive");
    constexpr std::uint32_t unset = ~std::uint32_t{0};
    std::vector<std::uint32_t> labels(n, unset);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        if (blocks[b].empty()) throw std::invalid_argument("empty block");
        for (auto e : blocks[b]) {
            if (e >= n) throw std::invalid_argument("block element out of range");
            if (labels[e] != unset) throw std::invalid_argument("blocks are not disjoint");
            labels[e] = static_cast<std::uint32_t>(b);
        }
    }
    if (std::find(labels.begin(), labels.end(), unset) != labels.end())
        throw std::invalid_argument("blocks do not cover all elements");
    return from_labels(labels);
}

std::vector<std::vector<std::uint32_t>> Partition::blocks() const {
    std::vector<std::vector<std::uint32_t>> out(block_count_);
    for (std::size_t i = 0; i < labels_.size(); ++i) out[labels_[i]].push_back(static_cast<std::uint32_t>(i));
    return out;
}

std::vector<std::uint32_t> Partition::block_sizes() const {
    std::vector<std::uint32_t> sizes(block_count_, 0);
    for (auto l : labels_) ++sizes[l];
    return sizes;
}

std::string Partition::to_string() const {
    std::string s = "{";
    const auto bs = blocks();
    for (std::size_t b = 0; b < bs.size(); ++b) {
        if (b) s += ',';
        s += '{';
        for (std::size_t k = 0; k < bs[b].size(); ++k) {
            if (k) s += ',';
            s += std::to_string(bs[b][k] + 1);
        }
        s += '}';
    }
    s += '}';
    return s;
}

Partition make_singletons(std::size_t n) { return Partition::singletons(n); }

Partition merge_blocks(const Partition& p, std::span<const std::size_t> which) {
    std::vector<std::size_t> idx(which.begin(), which.end());
    std::sort(idx.begin(), idx.end());
    idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
    if (idx.size() < 2) throw std::invalid_argument("merge needs at least two distinct blocks");
    if (idx.back() >= p.block_count()) throw std::invalid_argument("block index out of range");

    const auto target = static_cast<std::uint32_t>(idx.front());
    std::vector<std::uint32_t> labels(p.labels().begin(), p.labels().end());
    for (auto& l : labels) {
        if (std::binary_search(idx.begin(), idx.end(), static_cast<std::size_t>(l))) l = target;
    }
    return Partition::from_labels(labels);
}

std::optional<MergeProfile> merge_profile(const Partition& xi, const Partition& eta) {
    if (xi.n() != eta.n()) throw std::invalid_argument("partitions of different sets");
    // Each xi-block must map into a single eta-block.
    constexpr std::uint32_t unset = ~std::uint32_t{0};
    std::vector<std::uint32_t> image(xi.block_count(), unset);
    for (std::size_t i = 0; i < xi.n(); ++i) {
        auto& m = image[xi.block_of(i)];
        if (m == unset) m = eta.block_of(i);
        else if (m != eta.block_of(i)) return std::nullopt;
    }
    MergeProfile profile{std::vector<std::uint32_t>(eta.block_count(), 0)};
    for (auto m : image) ++profile.counts[m];
    return profile;
}

std::vector<Partition> enumerate_partitions(std::size_t n) {
    if (n == 0) throw std::invalid_argument("partition size must be positive");
    if (n > kMaxEnumerableN) throw std::invalid_argument("enumeration limited to n <= 10");

    // Restricted growth strings in lexicographic order.
    std::vector<Partition> out;
    out.reserve(bell_number(n));
    std::vector<std::uint32_t> a(n, 0);
    while (true) {
        out.push_back(Partition::from_labels(a));
        // Find rightmost position that can be incremented.
        std::size_t i = n - 1;
        while (i > 0) {
            std::uint32_t prefix_max = 0;
            for (std::size_t j = 0; j < i; ++j) prefix_max = std::max(prefix_max, a[j]);
            if (a[i] <= prefix_max) break;
            --i;
        }
        if (i == 0) break;
        ++a[i];
        for (std::size_t j = i + 1; j < n; ++j) a[j] = 0;
    }
    return out;
}

std::uint64_t bell_number(std::size_t n) {
    if (n > 25) throw std::invalid_argument("bell number overflow");
    // Bell triangle.
    std::vector<std::uint64_t> row{1};
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::uint64_t> next{row.back()};
        for (auto v : row) next.push_back(next.back() + v);
        row = std::move(next);
    }
    return row.front();
}

}  // namespace coalsim
