#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "treeseg/cloud.hpp"

namespace treeseg {

/// Tree id taken by each point of `full` from the labeled tree points within `radius`, or 0 where
/// no labeled tree point is that close. Majority vote; ties go to the tied id of the nearest
/// labeled point. Only Tree labels of `labeled` vote. Throws DataError when `labeled` carries no
/// tree point.
std::vector<std::uint32_t> propagate_instance_labels(const PointCloud& labeled, std::span<const Point3> full,
                                                     double radius = 0.10, unsigned workers = 1);

struct NonTreeSplit {
  std::vector<Index> non_tree;       // ascending
  std::vector<Index> non_annotated;  // ascending
};

/// Splits leftover points: the largest single-linkage component at `link_radius` (ties: the one
/// holding the smallest index) is non-tree, everything else non-annotated. Indices refer to
/// `remainder`.
NonTreeSplit identify_nontree(std::span<const Point3> remainder, double link_radius = 0.30,
                              unsigned workers = 1);

struct PropagationOptions {
  double label_radius = 0.10;
  double link_radius = 0.30;
  unsigned workers = 1;
};

struct PropagationSummary {
  std::size_t tree = 0;
  std::size_t non_tree = 0;
  std::size_t non_annotated = 0;
};

/// Labels every point of `full`: propagated tree ids first, then the non-tree / non-annotated
/// split of what is left.
PointCloud propagate_labels(const PointCloud& labeled, const PointCloud& full,
                            const PropagationOptions& options = {}, PropagationSummary* summary = nullptr);

}  // namespace treeseg
