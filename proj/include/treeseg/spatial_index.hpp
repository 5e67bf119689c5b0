#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "treeseg/cloud.hpp"

namespace treeseg {

/// Exact k-d tree over 2D or 3D coordinates. Immutable after construction; queries are
/// read-only and may run concurrently.
///
/// Distances are compared as squared sums accumulated in axis order (x, y, z), so results
/// match a brute-force scan that uses the same formula bit for bit.
class NeighborIndex {
 public:
  /// `coords` is a flat array of `dim` values per point. Throws InvalidArgument naming the
  /// first point with a non-finite coordinate, or on an empty input.
  NeighborIndex(std::vector<double> coords, int dim);

  /// Index over the xy (dim 2) or xyz (dim 3) coordinates of `points`.
  static NeighborIndex from_points(std::span<const Point3> points, int dim);

  int dim() const { return dim_; }
  std::size_t size() const { return size_; }
  const double* point(Index i) const { return coords_.data() + i * dim_; }

  /// Indices with distance strictly less than `radius`, ascending by index.
  std::vector<Index> radius_neighbors(std::span<const double> query, double radius) const;

  /// Same as radius_neighbors, appending into `out` (cleared first) to reuse its allocation.
  void radius_neighbors(std::span<const double> query, double radius,
                        std::vector<Index>& out) const;

  /// The k nearest indices ordered by (distance, index). Returns all points if fewer than k.
  std::vector<Index> k_nearest(std::span<const double> query, std::size_t k) const;

  struct Neighbor {
    Index index;
    double squared_distance;
  };
  /// k_nearest with the squared distances attached.
  std::vector<Neighbor> k_nearest_with_distance(std::span<const double> query,
                                                std::size_t k) const;

  /// Squared distance as used by every query.
  double squared_distance(std::span<const double> query, Index i) const;

 private:
  struct Node {
    // Leaves: [begin, end) into order_. Inner nodes: children at left/right.
    std::size_t begin = 0;
    std::size_t end = 0;
    int left = -1;
    int right = -1;
    int axis = 0;
    double split = 0.0;
    double lo[3] = {0, 0, 0};
    double hi[3] = {0, 0, 0};
  };

  int build(std::size_t begin, std::size_t end);
  double box_distance(const Node& node, const double* q) const;

  std::vector<double> coords_;
  int dim_;
  std::size_t size_;
  std::vector<Index> order_;
  std::vector<Node> nodes_;
};

}  // namespace treeseg
