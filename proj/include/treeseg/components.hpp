#pragma once

#include <cstdint>
#include <numeric>
#include <vector>

#include "treeseg/spatial_index.hpp"

namespace treeseg {

/// Disjoint sets with path halving and union by size.
class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n), size_(n, 1) {
    std::iota(parent_.begin(), parent_.end(), Index{0});
  }

  Index find(Index x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  bool unite(Index a, Index b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (size_[a] < size_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
    return true;
  }

 private:
  std::vector<Index> parent_;
  std::vector<std::size_t> size_;
};

/// Connected components of the graph joining points closer than `radius` (strict).
struct Components {
  /// Component of each point, numbered 0.. in order of each component's smallest member.
  std::vector<std::uint32_t> component_of;
  /// Members of each component, ascending.
  std::vector<std::vector<Index>> members;
};

/// Single-linkage components over every point of `index`. Neighbor discovery runs on
/// `workers` threads; the partition itself does not depend on the worker count.
Components single_linkage_components(const NeighborIndex& index, double radius, unsigned workers = 1);

}  // namespace treeseg
