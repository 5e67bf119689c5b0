#include "treeseg/clusterer.hpp"

#include <cmath>

#include "treeseg/components.hpp"
#include "treeseg/parallel.hpp"

namespace treeseg {

Components single_linkage_components(const NeighborIndex& index, double radius, unsigned workers) {
  const std::size_t n = index.size();
  // Neighbor lists are computed independently per point, then merged serially.
  std::vector<std::vector<Index>> adjacency(n);
  parallel_for(n, workers, [&](std::size_t begin, std::size_t end) {
    std::vector<Index> nbrs;
    for (std::size_t i = begin; i < end; ++i) {
      index.radius_neighbors(std::span<const double>(index.point(i), index.dim()), radius, nbrs);
      auto& adj = adjacency[i];
      for (Index j : nbrs) {
        if (j > i) adj.push_back(j);
      }
    }
  });
  UnionFind uf(n);
  for (Index i = 0; i < n; ++i) {
    for (Index j : adjacency[i]) uf.unite(i, j);
    std::vector<Index>().swap(adjacency[i]);
  }
  Components c;
  c.component_of.assign(n, 0);
  std::vector<std::int64_t> root_to_comp(n, -1);
  for (Index i = 0; i < n; ++i) {
    const Index root = uf.find(i);
    if (root_to_comp[root] < 0) {
      root_to_comp[root] = static_cast<std::int64_t>(c.members.size());
      c.members.emplace_back();
    }
    const auto comp = static_cast<std::uint32_t>(root_to_comp[root]);
    c.component_of[i] = comp;
    c.members[comp].push_back(i);
  }
  return c;
}

void ClusterParams::validate() const {
  if (!(min_verticality > 0.0 && min_verticality <= 1.0)) {
    throw InvalidArgument("cluster params: min verticality must be in (0, 1]");
  }
  if (!(max_offset_z > 0.0)) throw InvalidArgument("cluster params: max |o_z| must be positive");
  if (!(grouping_radius > 0.0)) throw InvalidArgument("cluster params: grouping radius must be positive");
  if (min_points < 1) throw InvalidArgument("cluster params: min points must be at least 1");
}

std::vector<Index> select_cluster_points(const PredictionField& field,
                                         std::span<const double> verticality,
                                         const ClusterParams& params) {
  params.validate();
  if (verticality.size() != field.size()) {
    throw InvalidArgument("select_cluster_points: verticality has " +
                          std::to_string(verticality.size()) + " values for " +
                          std::to_string(field.size()) + " predictions");
  }
  std::vector<Index> out;
  for (Index i = 0; i < field.size(); ++i) {
    if (predicted_tree(field.p_tree[i]) && verticality[i] >= params.min_verticality &&
        std::abs(field.offset[i].z) <= params.max_offset_z) {
      out.push_back(i);
    }
  }
  return out;
}

ClusterResult connected_components(std::span<const Point3> projected, const ClusterParams& params,
                                   unsigned workers) {
  params.validate();
  ClusterResult result;
  result.cluster_id.assign(projected.size(), 0);
  if (projected.empty()) return result;
  const NeighborIndex index = NeighborIndex::from_points(projected, 2);
  const Components comps = single_linkage_components(index, params.grouping_radius, workers);
  result.raw_components = comps.members.size();
  for (const auto& members : comps.members) {
    if (members.size() < params.min_points) continue;
    Cluster c;
    c.id = static_cast<std::uint32_t>(result.clusters.size() + 1);
    double sx = 0.0, sy = 0.0;
    for (Index m : members) {
      sx += projected[m].x;
      sy += projected[m].y;
      result.cluster_id[m] = c.id;
    }
    c.centroid_x = sx / static_cast<double>(members.size());
    c.centroid_y = sy / static_cast<double>(members.size());
    c.members = members;
    result.clusters.push_back(std::move(c));
  }
  return result;
}

}  // namespace treeseg
