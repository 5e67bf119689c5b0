#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "treeseg/cloud.hpp"

namespace treeseg {

/// Identifies the point set a prediction field belongs to.
struct CloudAlignment {
  std::uint64_t count = 0;
  std::uint64_t digest = 0;

  static CloudAlignment of(std::span<const Point3> points) {
    return {points.size(), coordinate_digest(points)};
  }
  friend bool operator==(const CloudAlignment&, const CloudAlignment&) = default;
};

/// Semantic tree probability and offset-to-tree-base for a single point.
struct PointPrediction {
  double p_tree = 0.0;
  Vec3 offset{};
  friend bool operator==(const PointPrediction&, const PointPrediction&) = default;
};

/// Per-point predictions aligned to one cloud.
struct PredictionField {
  std::vector<double> p_tree;
  std::vector<Vec3> offset;
  CloudAlignment alignment;

  std::size_t size() const { return p_tree.size(); }
  PointPrediction at(Index i) const { return {p_tree[i], offset[i]}; }

  /// Lengths, probability range and offset finiteness. Throws DataError naming the first bad index.
  void validate() const;
  /// validate() plus a check that the field belongs to `points`.
  void check_aligned(std::span<const Point3> points) const;

  friend bool operator==(const PredictionField&, const PredictionField&) = default;
};

/// Semantic decision threshold: a point is predicted tree when p_tree > 0.5.
inline constexpr double kTreeProbabilityThreshold = 0.5;

inline bool predicted_tree(double p_tree) { return p_tree > kTreeProbabilityThreshold; }

}  // namespace treeseg
