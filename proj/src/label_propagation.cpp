#include "treeseg/label_propagation.hpp"

#include <algorithm>

#include "treeseg/components.hpp"
#include "treeseg/parallel.hpp"
#include "treeseg/spatial_index.hpp"

namespace treeseg {

std::vector<std::uint32_t> propagate_instance_labels(const PointCloud& labeled, std::span<const Point3> full,
                                                     double radius, unsigned workers) {
  if (!(radius > 0.0)) throw InvalidArgument("propagate: radius must be positive");
  if (!labeled.labels) throw DataError("propagate: labeled cloud has no labels");
  std::vector<Point3> sources;
  std::vector<std::uint32_t> source_id;
  for (Index i = 0; i < labeled.size(); ++i) {
    const PointLabel l = (*labeled.labels)[i];
    if (!l.is_tree()) continue;
    sources.push_back(labeled.points[i]);
    source_id.push_back(l.tree_id());
  }
  if (sources.empty()) throw DataError("propagate: labeled cloud holds no tree points");
  const NeighborIndex index = NeighborIndex::from_points(sources, 3);

  std::vector<std::uint32_t> out(full.size(), 0);
  parallel_for(full.size(), workers, [&](std::size_t begin, std::size_t end) {
    std::vector<Index> nbrs;
    std::vector<std::pair<double, Index>> ordered;
    std::vector<std::pair<std::uint32_t, std::size_t>> votes;
    for (std::size_t i = begin; i < end; ++i) {
      const double q[3] = {full[i].x, full[i].y, full[i].z};
      index.radius_neighbors(q, radius, nbrs);
      if (nbrs.empty()) continue;
      ordered.clear();
      for (Index j : nbrs) ordered.emplace_back(index.squared_distance(q, j), j);
      std::sort(ordered.begin(), ordered.end());
      votes.clear();
      for (const auto& [d2, j] : ordered) {
        auto it = std::find_if(votes.begin(), votes.end(), [&](const auto& v) { return v.first == source_id[j]; });
        if (it == votes.end()) {
          votes.emplace_back(source_id[j], 1);
        } else {
          ++it->second;
        }
      }
      auto best = votes.front();
      for (const auto& v : votes) {
        if (v.second > best.second) best = v;
      }
      out[i] = best.first;
    }
  });
  return out;
}

NonTreeSplit identify_nontree(std::span<const Point3> remainder, double link_radius, unsigned workers) {
  if (!(link_radius > 0.0)) throw InvalidArgument("identify_nontree: link radius must be positive");
  NonTreeSplit split;
  if (remainder.empty()) return split;
  const NeighborIndex index = NeighborIndex::from_points(remainder, 3);
  const Components comps = single_linkage_components(index, link_radius, workers);
  std::size_t largest = 0;
  for (std::size_t c = 1; c < comps.members.size(); ++c) {
    if (comps.members[c].size() > comps.members[largest].size()) largest = c;
  }
  for (Index i = 0; i < remainder.size(); ++i) {
    (comps.component_of[i] == largest ? split.non_tree : split.non_annotated).push_back(i);
  }
  return split;
}

PointCloud propagate_labels(const PointCloud& labeled, const PointCloud& full,
                            const PropagationOptions& options, PropagationSummary* summary) {
  const auto ids = propagate_instance_labels(labeled, full.points, options.label_radius, options.workers);
  PointCloud out = full;
  out.labels.emplace(full.size(), PointLabel::non_annotated());
  std::vector<Index> rest;
  std::vector<Point3> rest_points;
  for (Index i = 0; i < full.size(); ++i) {
    if (ids[i] != 0) {
      (*out.labels)[i] = PointLabel::tree(ids[i]);
    } else {
      rest.push_back(i);
      rest_points.push_back(full.points[i]);
    }
  }
  const NonTreeSplit split = identify_nontree(rest_points, options.link_radius, options.workers);
  for (Index r : split.non_tree) (*out.labels)[rest[r]] = PointLabel::non_tree();
  if (summary) {
    summary->tree = full.size() - rest.size();
    summary->non_tree = split.non_tree.size();
    summary->non_annotated = split.non_annotated.size();
  }
  return out;
}

}  // namespace treeseg
