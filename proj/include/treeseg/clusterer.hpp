#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "treeseg/cloud.hpp"
#include "treeseg/prediction_field.hpp"

namespace treeseg {

/// Trunk-point selection and grouping thresholds.
struct ClusterParams {
  /// Minimum verticality of a point used for clustering.
  double min_verticality = 0.6;
  /// Maximum |o_z| (m): keeps points near the tree base height.
  double max_offset_z = 2.0;
  /// Single-linkage distance (m) on projected xy.
  double grouping_radius = 0.15;
  /// Smallest component kept as a cluster.
  std::size_t min_points = 100;

  void validate() const;
};

/// Indices with p_tree > 0.5, verticality >= min_verticality and |o_z| <= max_offset_z.
std::vector<Index> select_cluster_points(const PredictionField& field,
                                         std::span<const double> verticality,
                                         const ClusterParams& params);

struct Cluster {
  std::uint32_t id = 0;
  /// Positions in the clustered point list, ascending.
  std::vector<Index> members;
  double centroid_x = 0.0;
  double centroid_y = 0.0;
};

struct ClusterResult {
  /// Per clustered point: cluster id, or 0 when its component was too small.
  std::vector<std::uint32_t> cluster_id;
  /// Clusters with ids 1..K ordered by smallest member.
  std::vector<Cluster> clusters;
  /// Component count before the size filter.
  std::size_t raw_components = 0;
};

/// Groups points by single linkage on xy distance < grouping_radius and keeps components of at
/// least min_points members. z is ignored.
ClusterResult connected_components(std::span<const Point3> projected, const ClusterParams& params,
                                   unsigned workers = 1);

}  // namespace treeseg
