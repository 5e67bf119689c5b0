#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "treeseg/cloud.hpp"
#include "treeseg/prediction_field.hpp"

namespace treeseg {

enum class Provenance : std::uint8_t {
  Clustered,       ///< member of a cluster found in offset space
  Assigned,        ///< tree point labeled by nearest-neighbor vote
  SemanticReject,  ///< p_tree <= 0.5
};

/// Final per-point instance labels (NonTree or Tree(id)) and where each label came from.
struct InstanceMap {
  std::vector<PointLabel> labels;
  std::vector<Provenance> provenance;

  std::size_t size() const { return labels.size(); }
  /// Distinct instance ids, ascending.
  std::vector<std::uint32_t> instance_ids() const;
};

struct AssignOptions {
  std::size_t k = 10;
  /// Vote over xyz of the projected points instead of xy.
  bool use_3d = false;
  unsigned workers = 1;
};

/// Labels every point: clustered points keep their cluster id, remaining predicted-tree points
/// take the majority cluster id among their k nearest clustered points in projected space (tie:
/// the tied id met first in nearest-first order), and points with p_tree <= 0.5 become NonTree.
///
/// `cluster_of` holds a cluster id per point, 0 for unclustered. Throws DataError("no instances
/// found") when predicted-tree points exist but nothing was clustered.
InstanceMap assign_remaining(std::span<const Point3> projected, std::span<const std::uint32_t> cluster_of,
                             std::span<const double> p_tree, const AssignOptions& options = {});

/// Carries a subsampled instance map to the original cloud.
InstanceMap finalize(const InstanceMap& subsampled, const VoxelIndexMap& map);

}  // namespace treeseg
