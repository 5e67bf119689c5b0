#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "treeseg/error.hpp"
#include "treeseg/vec3.hpp"

namespace treeseg {

using Index = std::size_t;

/// Three-way point label: non-tree, tree instance, or a tree point without instance annotation.
class PointLabel {
 public:
  enum class Kind : std::uint8_t { NonTree, Tree, NonAnnotated };

  constexpr PointLabel() = default;

  static constexpr PointLabel non_tree() { return PointLabel(Kind::NonTree, 0); }
  static constexpr PointLabel non_annotated() { return PointLabel(Kind::NonAnnotated, 0); }
  /// Throws InvalidArgument for id 0; tree ids start at 1.
  static PointLabel tree(std::uint32_t id);

  constexpr Kind kind() const { return kind_; }
  constexpr bool is_tree() const { return kind_ == Kind::Tree; }
  constexpr bool is_non_tree() const { return kind_ == Kind::NonTree; }
  constexpr bool is_annotated() const { return kind_ != Kind::NonAnnotated; }
  /// Instance id for tree labels, 0 otherwise.
  constexpr std::uint32_t tree_id() const { return id_; }

  friend constexpr bool operator==(const PointLabel&, const PointLabel&) = default;

 private:
  constexpr PointLabel(Kind kind, std::uint32_t id) : kind_(kind), id_(id) {}

  Kind kind_ = Kind::NonTree;
  std::uint32_t id_ = 0;
};

std::string to_string(const PointLabel& label);

/// Ordered point set. Indices are identities: every per-point channel is aligned to `points`.
struct PointCloud {
  std::vector<Point3> points;
  std::optional<std::vector<PointLabel>> labels;
  std::map<std::string, std::vector<double>> attributes;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_labels() const { return labels.has_value(); }

  /// Checks channel lengths and coordinate finiteness.
  void validate() const;

  /// Cloud restricted to `indices`, in the given order, with every channel carried along.
  PointCloud subset(std::span<const Index> indices) const;
};

/// FNV-1a digest of the little-endian f64 coordinate stream. Identifies a cloud's point set.
std::uint64_t coordinate_digest(std::span<const Point3> points);

/// Mapping between an original cloud and its voxel-subsampled version.
struct VoxelIndexMap {
  double voxel_size = 0.0;
  /// original index -> subsampled index
  std::vector<Index> representative_of;
  /// subsampled index -> original indices, ascending
  std::vector<std::vector<Index>> members_of;
  /// subsampled index -> original index of the point kept for that voxel
  std::vector<Index> kept_original;

  std::size_t original_size() const { return representative_of.size(); }
  std::size_t subsampled_size() const { return members_of.size(); }
};

struct VoxelGridOptions {
  double voxel_size = 0.1;
  /// Grid anchor. Voxel keys are floor((p - origin) / voxel_size).
  Point3 origin{};
};

struct SubsampleResult {
  PointCloud cloud;
  VoxelIndexMap map;
};

/// Keeps one point per occupied voxel: the point nearest the voxel center, lowest index on ties.
/// Output points are ordered by the lowest original index inside each voxel. Labels and
/// attributes of the kept point are carried over.
SubsampleResult voxel_subsample(const PointCloud& cloud, const VoxelGridOptions& options);

inline SubsampleResult voxel_subsample(const PointCloud& cloud, double voxel_size) {
  return voxel_subsample(cloud, VoxelGridOptions{voxel_size, {}});
}

/// Copies every subsampled value back to the original points of its voxel.
template <typename T>
std::vector<T> propagate_to_original(std::span<const T> subsampled, const VoxelIndexMap& map) {
  if (subsampled.size() != map.subsampled_size()) {
    throw InvalidArgument("propagate_to_original: " + std::to_string(subsampled.size()) +
                          " values for " + std::to_string(map.subsampled_size()) +
                          " subsampled points");
  }
  std::vector<T> out;
  out.reserve(map.original_size());
  for (Index rep : map.representative_of) out.push_back(subsampled[rep]);
  return out;
}

template <typename T>
std::vector<T> propagate_to_original(const std::vector<T>& subsampled, const VoxelIndexMap& map) {
  return propagate_to_original(std::span<const T>(subsampled), map);
}

struct OutlierOptions {
  std::size_t k = 8;
  double std_ratio = 2.0;
  unsigned workers = 1;
};

/// Per-point mean distance to the k nearest other points.
std::vector<double> mean_knn_distance(std::span<const Point3> points, std::size_t k,
                                      unsigned workers = 1);

/// Drops points whose mean k-NN distance exceeds mean + std_ratio * stddev of that statistic
/// over the cloud. Survivors keep their relative order.
PointCloud statistical_outlier_removal(const PointCloud& cloud, const OutlierOptions& options = {});

/// Indices kept by statistical_outlier_removal.
std::vector<Index> statistical_outlier_inliers(std::span<const Point3> points,
                                               const OutlierOptions& options = {});

}  // namespace treeseg
