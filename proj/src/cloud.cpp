#include "treeseg/cloud.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numeric>
#include <unordered_map>

#include "treeseg/parallel.hpp"
#include "treeseg/spatial_index.hpp"

namespace treeseg {

PointLabel PointLabel::tree(std::uint32_t id) {
  if (id == 0) throw InvalidArgument("tree label ids start at 1");
  return PointLabel(Kind::Tree, id);
}

std::string to_string(const PointLabel& label) {
  switch (label.kind()) {
    case PointLabel::Kind::NonTree:
      return "non-tree";
    case PointLabel::Kind::NonAnnotated:
      return "non-annotated";
    case PointLabel::Kind::Tree:
      return "tree(" + std::to_string(label.tree_id()) + ")";
  }
  return "?";
}

void PointCloud::validate() const {
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!points[i].finite()) {
      throw DataError("point " + std::to_string(i) + " has a non-finite coordinate");
    }
  }
  if (labels && labels->size() != points.size()) {
    throw DataError("label channel has " + std::to_string(labels->size()) + " entries for " +
                    std::to_string(points.size()) + " points");
  }
  for (const auto& [name, values] : attributes) {
    if (values.size() != points.size()) {
      throw DataError("attribute '" + name + "' has " + std::to_string(values.size()) +
                      " entries for " + std::to_string(points.size()) + " points");
    }
  }
}

PointCloud PointCloud::subset(std::span<const Index> indices) const {
  PointCloud out;
  out.points.reserve(indices.size());
  for (Index i : indices) out.points.push_back(points.at(i));
  if (labels) {
    out.labels.emplace();
    out.labels->reserve(indices.size());
    for (Index i : indices) out.labels->push_back((*labels)[i]);
  }
  for (const auto& [name, values] : attributes) {
    auto& channel = out.attributes[name];
    channel.reserve(indices.size());
    for (Index i : indices) channel.push_back(values[i]);
  }
  return out;
}

std::uint64_t coordinate_digest(std::span<const Point3> points) {
  std::uint64_t h = 14695981039346656037ull;
  auto mix = [&h](double v) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xffu;
      h *= 1099511628211ull;
    }
  };
  for (const auto& p : points) {
    mix(p.x);
    mix(p.y);
    mix(p.z);
  }
  return h;
}

namespace {

struct VoxelKey {
  std::int64_t x, y, z;
  bool operator==(const VoxelKey&) const = default;
};

struct VoxelKeyHash {
  std::size_t operator()(const VoxelKey& k) const {
    std::uint64_t h = static_cast<std::uint64_t>(k.x) * 0x9E3779B97F4A7C15ull;
    h ^= static_cast<std::uint64_t>(k.y) + 0x7F4A7C159E3779B9ull + (h << 6) + (h >> 2);
    h ^= static_cast<std::uint64_t>(k.z) + 0x94D049BB133111EBull + (h << 6) + (h >> 2);
    return static_cast<std::size_t>(h);
  }
};

}  // namespace

SubsampleResult voxel_subsample(const PointCloud& cloud, const VoxelGridOptions& options) {
  if (cloud.empty()) throw DataError("voxel_subsample: empty input");
  if (!(options.voxel_size > 0.0) || !std::isfinite(options.voxel_size)) {
    throw InvalidArgument("voxel_subsample: voxel size must be positive");
  }
  cloud.validate();

  const double vs = options.voxel_size;
  const Point3& o = options.origin;
  std::unordered_map<VoxelKey, Index, VoxelKeyHash> slot_of;
  slot_of.reserve(cloud.size() / 2 + 1);

  VoxelIndexMap map;
  map.voxel_size = vs;
  map.representative_of.resize(cloud.size());
  std::vector<Point3> centers;
  std::vector<double> best_d2;

  for (Index i = 0; i < cloud.size(); ++i) {
    const Point3& p = cloud.points[i];
    const VoxelKey key{static_cast<std::int64_t>(std::floor((p.x - o.x) / vs)),
                       static_cast<std::int64_t>(std::floor((p.y - o.y) / vs)),
                       static_cast<std::int64_t>(std::floor((p.z - o.z) / vs))};
    auto [it, inserted] = slot_of.try_emplace(key, map.members_of.size());
    const Index slot = it->second;
    const Point3 center{o.x + (static_cast<double>(key.x) + 0.5) * vs,
                        o.y + (static_cast<double>(key.y) + 0.5) * vs,
                        o.z + (static_cast<double>(key.z) + 0.5) * vs};
    const Point3 d = p - center;
    const double d2 = d.x * d.x + d.y * d.y + d.z * d.z;
    if (inserted) {
      map.members_of.emplace_back();
      map.kept_original.push_back(i);
      centers.push_back(center);
      best_d2.push_back(d2);
    } else if (d2 < best_d2[slot]) {
      best_d2[slot] = d2;
      map.kept_original[slot] = i;
    }
    map.members_of[slot].push_back(i);
    map.representative_of[i] = slot;
  }

  SubsampleResult result{cloud.subset(map.kept_original), std::move(map)};
  return result;
}

std::vector<double> mean_knn_distance(std::span<const Point3> points, std::size_t k,
                                      unsigned workers) {
  if (k == 0) throw InvalidArgument("outlier removal: k must be at least 1");
  if (points.size() <= k) {
    throw InvalidArgument("outlier removal: cloud has " + std::to_string(points.size()) +
                          " points, need more than k = " + std::to_string(k));
  }
  const NeighborIndex index = NeighborIndex::from_points(points, 3);
  std::vector<double> stat(points.size());
  parallel_for(points.size(), workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const double q[3] = {points[i].x, points[i].y, points[i].z};
      // k + 1 because the query point itself comes back at distance zero.
      const auto nn = index.k_nearest_with_distance(q, k + 1);
      double sum = 0.0;
      std::size_t used = 0;
      bool skipped_self = false;
      for (const auto& n : nn) {
        if (!skipped_self && n.index == i) {
          skipped_self = true;
          continue;
        }
        if (used == k) break;
        sum += std::sqrt(n.squared_distance);
        ++used;
      }
      stat[i] = sum / static_cast<double>(used);
    }
  });
  return stat;
}

std::vector<Index> statistical_outlier_inliers(std::span<const Point3> points,
                                               const OutlierOptions& options) {
  if (!(options.std_ratio >= 0.0)) {
    throw InvalidArgument("outlier removal: std_ratio must be non-negative");
  }
  const auto stat = mean_knn_distance(points, options.k, options.workers);
  const double n = static_cast<double>(stat.size());
  const double mean = std::accumulate(stat.begin(), stat.end(), 0.0) / n;
  double var = 0.0;
  for (double s : stat) var += (s - mean) * (s - mean);
  const double stddev = std::sqrt(var / n);
  // Relative slack absorbs rounding when the statistic is constant across the cloud.
  const double threshold = mean + options.std_ratio * stddev + 1e-12 * std::abs(mean);
  std::vector<Index> keep;
  keep.reserve(stat.size());
  for (Index i = 0; i < stat.size(); ++i) {
    if (!(stat[i] > threshold)) keep.push_back(i);
  }
  return keep;
}

PointCloud statistical_outlier_removal(const PointCloud& cloud, const OutlierOptions& options) {
  cloud.validate();
  return cloud.subset(statistical_outlier_inliers(cloud.points, options));
}

}  // namespace treeseg
