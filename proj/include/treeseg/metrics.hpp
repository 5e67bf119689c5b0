#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "treeseg/cloud.hpp"
#include "treeseg/predictor.hpp"

namespace treeseg {

// ---------------------------------------------------------------------------- overlap counting

/// Point counts shared between ground-truth and predicted instances. Non-annotated ground-truth
/// points are excluded from every count.
struct InstanceOverlap {
  std::vector<std::uint32_t> gt_ids;    // ascending, row order
  std::vector<std::uint32_t> pred_ids;  // ascending, column order
  std::vector<std::size_t> gt_size;
  std::vector<std::size_t> pred_size;
  /// Row-major gt x pred intersection counts.
  std::vector<std::size_t> intersection;

  std::size_t rows() const { return gt_ids.size(); }
  std::size_t cols() const { return pred_ids.size(); }
  std::size_t tp(std::size_t i, std::size_t j) const { return intersection[i * cols() + j]; }
  std::size_t fp(std::size_t i, std::size_t j) const { return pred_size[j] - tp(i, j); }
  std::size_t fn(std::size_t i, std::size_t j) const { return gt_size[i] - tp(i, j); }
};

InstanceOverlap count_overlap(std::span<const PointLabel> gt, std::span<const PointLabel> pred);

/// Dense N_gt x N_pred matrix of TP / (TP + FP + FN).
struct IoUMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  double operator()(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
  double& operator()(std::size_t i, std::size_t j) { return values[i * cols + j]; }
};

IoUMatrix iou_matrix(const InstanceOverlap& overlap);
IoUMatrix iou_matrix(std::span<const PointLabel> gt, std::span<const PointLabel> pred);

// ---------------------------------------------------------------------------- matching

/// One-to-one assignment of rows to columns maximizing the summed entries (rectangular
/// matrices are zero-padded to square). Returns (row, col) pairs for every row matched to a
/// real column, ascending by row. Entries must be finite.
std::vector<std::pair<std::size_t, std::size_t>> max_weight_assignment(const IoUMatrix& m);

/// Matching threshold: pairs with IoU below this are discarded after assignment.
inline constexpr double kMatchIoU = 0.5;

/// Maximum-total-IoU matching with pairs below 0.5 IoU removed.
std::vector<std::pair<std::size_t, std::size_t>> hungarian_match(const IoUMatrix& m);

// ---------------------------------------------------------------------------- detection

struct DetectionReport {
  std::vector<std::pair<std::size_t, std::size_t>> matches;  // (gt row, pred column)
  std::size_t n_gt = 0;
  std::size_t n_pred = 0;
  std::size_t gt_matched = 0;
  std::size_t gt_unmatched = 0;
  /// Unmatched predictions that survive the half-labeled filter.
  std::size_t pred_unmatched = 0;
  /// Unmatched predictions dropped because fewer than half of their points lie on labeled trees.
  std::size_t pred_filtered = 0;
  double completeness = 0.0;
  double omission = 0.0;
  double commission = 0.0;
  double f1 = 0.0;
};

/// Harmonic mean of (1 - e_om) and (1 - e_com); 0 when both are 0.
double f1_from_errors(double omission, double commission);

/// Completeness, omission, commission and F1 from a matching. Throws DataError when the ground
/// truth holds no tree.
DetectionReport detection_metrics(std::span<const PointLabel> gt, std::span<const PointLabel> pred);
DetectionReport detection_metrics(const InstanceOverlap& overlap,
                                  std::vector<std::pair<std::size_t, std::size_t>> matches,
                                  std::span<const PointLabel> gt, std::span<const PointLabel> pred);

// ---------------------------------------------------------------------------- segmentation

struct SegmentationReport {
  /// Per ground-truth row: column of the best-IoU prediction, or -1 without predictions.
  std::vector<std::int64_t> pairing;
  std::vector<double> iou;
  std::vector<double> precision;
  std::vector<double> recall;
  double coverage = 0.0;
  double mean_precision = 0.0;
  double mean_recall = 0.0;
};

/// Pairs each ground-truth tree with its highest-IoU prediction (lowest column on ties) and
/// averages IoU (coverage), precision and recall over ground-truth trees.
SegmentationReport segmentation_metrics(const InstanceOverlap& overlap);
SegmentationReport segmentation_metrics(std::span<const PointLabel> gt, std::span<const PointLabel> pred);

// ---------------------------------------------------------------------------- partitions

enum class PartitionAxis { Horizontal, Vertical };

inline constexpr std::size_t kPartitionBins = 10;

struct PartitionReport {
  PartitionAxis axis = PartitionAxis::Horizontal;
  /// Per-bin means over ground-truth trees. NaN where no tree contributes a defined value.
  std::array<double, kPartitionBins> precision{};
  std::array<double, kPartitionBins> recall{};
  std::array<double, kPartitionBins> coverage{};
  /// Trees contributing to each bin's coverage.
  std::array<std::size_t, kPartitionBins> trees{};
  /// Ground-truth ids skipped because their extent along the axis is zero.
  std::vector<std::uint32_t> skipped;
};

/// Bin of a distance within [0, extent]: floor(10 d / extent), the last bin closed.
/// Returns -1 for d outside [0, extent].
int partition_bin(double distance, double extent);

/// Splits each ground-truth tree and its paired prediction into ten distance bins: horizontal
/// distance to the tree's base (extent r = the tree's largest such distance) or height above the
/// tree's lowest point (extent h = its height). Prediction points outside [0, extent] are
/// ignored. Per-bin precision, recall and IoU are averaged over trees with equal weight; a value
/// whose denominator is zero is left out of its bin's mean.
PartitionReport partition_metrics(std::span<const Point3> points, std::span<const PointLabel> gt,
                                  std::span<const PointLabel> pred,
                                  const std::map<std::uint32_t, TreeBase>& gt_bases,
                                  PartitionAxis axis);

// ---------------------------------------------------------------------------- offsets

enum class OffsetLossMode { Full3D, XYOnly };

/// Mean Euclidean norm of (predicted - true offset) over points where `tree_mask` is set.
double offset_loss(std::span<const Vec3> predicted, std::span<const Vec3> truth,
                   std::span<const std::uint8_t> tree_mask, OffsetLossMode mode);

// ---------------------------------------------------------------------------- attributes

struct Hull2D {
  /// Boundary vertices (xy).
  std::vector<std::pair<double, double>> boundary;
  double area = 0.0;
};

/// Convex hull (Andrew's monotone chain), counter-clockwise without repeated endpoint.
Hull2D convex_hull(std::span<const std::pair<double, double>> xy);

/// Alpha shape: union of Delaunay triangles whose circumradius is at most `alpha`.
/// `boundary` lists the vertices on edges used by exactly one kept triangle.
Hull2D alpha_shape(std::span<const std::pair<double, double>> xy, double alpha);

/// Largest pairwise distance within a point list.
double max_pairwise_distance(std::span<const std::pair<double, double>> xy);

enum class HullKind { Alpha, Convex };

struct AttributeOptions {
  HullKind hull = HullKind::Alpha;
  double alpha = 1.0;
};

struct TreeAttributes {
  double height = 0.0;
  double crown_diameter = 0.0;
  double canopy_cover = 0.0;
};

/// Height from the 5th-highest minus 5th-lowest z (max - min under 10 points), crown diameter
/// and canopy cover from a hull of the xy projection.
TreeAttributes tree_attributes(std::span<const Point3> tree_points, const AttributeOptions& options = {});

// ---------------------------------------------------------------------------- evaluation

/// Ground-truth and prediction carried onto one voxel-subsampled point set.
struct EvalPair {
  PointCloud cloud;  // subsampled coordinates, ground-truth labels
  std::vector<PointLabel> pred;
};

/// Subsamples the ground truth at `voxel_size` and takes both label sets from each voxel's kept
/// point. Throws DataError when the prediction does not belong to the same point set.
EvalPair eval_subsample(const PointCloud& gt, const PointCloud& pred, double voxel_size = 0.1);

struct EvalReport {
  DetectionReport detection;
  SegmentationReport segmentation;
  PartitionReport horizontal;
  PartitionReport vertical;
};

struct EvalOptions {
  double voxel_size = 0.1;
  double verticality_radius = 0.5;
  unsigned workers = 1;
};

/// Full protocol on a ground-truth / prediction pair of clouds: subsample, detection,
/// segmentation, and both partitions (ground-truth bases from tree_base on the subsampled cloud).
EvalReport evaluate(const PointCloud& gt, const PointCloud& pred, const EvalOptions& options = {});

std::string format_eval_csv(const EvalReport& report);
std::string format_eval_table(const EvalReport& report);
std::string format_partition_csv(const PartitionReport& report);

}  // namespace treeseg
