#include "treeseg/assigner.hpp"

#include <algorithm>
#include <set>

#include "treeseg/parallel.hpp"
#include "treeseg/spatial_index.hpp"

namespace treeseg {

std::vector<std::uint32_t> InstanceMap::instance_ids() const {
  std::set<std::uint32_t> ids;
  for (const auto& l : labels) {
    if (l.is_tree()) ids.insert(l.tree_id());
  }
  return {ids.begin(), ids.end()};
}

InstanceMap assign_remaining(std::span<const Point3> projected, std::span<const std::uint32_t> cluster_of,
                             std::span<const double> p_tree, const AssignOptions& options) {
  const std::size_t n = projected.size();
  if (cluster_of.size() != n || p_tree.size() != n) {
    throw InvalidArgument("assign_remaining: inputs must have one entry per point");
  }
  if (options.k == 0) throw InvalidArgument("assign_remaining: k must be at least 1");

  InstanceMap out;
  out.labels.assign(n, PointLabel::non_tree());
  out.provenance.assign(n, Provenance::SemanticReject);

  std::vector<Index> clustered;
  std::vector<Index> pending;
  for (Index i = 0; i < n; ++i) {
    if (cluster_of[i] != 0) {
      clustered.push_back(i);
      out.labels[i] = PointLabel::tree(cluster_of[i]);
      out.provenance[i] = Provenance::Clustered;
    } else if (predicted_tree(p_tree[i])) {
      pending.push_back(i);
    }
  }
  if (pending.empty()) return out;
  if (clustered.empty()) throw DataError("no instances found");

  const int dim = options.use_3d ? 3 : 2;
  std::vector<Point3> anchor_points;
  anchor_points.reserve(clustered.size());
  for (Index i : clustered) anchor_points.push_back(projected[i]);
  const NeighborIndex index = NeighborIndex::from_points(anchor_points, dim);

  parallel_for(pending.size(), options.workers, [&](std::size_t begin, std::size_t end) {
    std::vector<std::pair<std::uint32_t, std::size_t>> votes;
    for (std::size_t t = begin; t < end; ++t) {
      const Index i = pending[t];
      const double q[3] = {projected[i].x, projected[i].y, projected[i].z};
      const auto nn = index.k_nearest(std::span<const double>(q, dim), options.k);
      // (label, count) in order of first appearance, i.e. nearest first.
      votes.clear();
      for (Index j : nn) {
        const std::uint32_t label = cluster_of[clustered[j]];
        auto it = std::find_if(votes.begin(), votes.end(), [&](const auto& v) { return v.first == label; });
        if (it == votes.end()) {
          votes.emplace_back(label, 1);
        } else {
          ++it->second;
        }
      }
      std::uint32_t best = votes.front().first;
      std::size_t best_count = votes.front().second;
      for (const auto& [label, count] : votes) {
        if (count > best_count) {
          best = label;
          best_count = count;
        }
      }
      out.labels[i] = PointLabel::tree(best);
      out.provenance[i] = Provenance::Assigned;
    }
  });
  return out;
}

InstanceMap finalize(const InstanceMap& subsampled, const VoxelIndexMap& map) {
  InstanceMap out;
  out.labels = propagate_to_original(subsampled.labels, map);
  out.provenance = propagate_to_original(subsampled.provenance, map);
  return out;
}

}  // namespace treeseg
