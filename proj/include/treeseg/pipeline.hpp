#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "treeseg/assigner.hpp"
#include "treeseg/cloud.hpp"
#include "treeseg/clusterer.hpp"
#include "treeseg/config.hpp"
#include "treeseg/metrics.hpp"
#include "treeseg/predictor.hpp"
#include "treeseg/tiler.hpp"

namespace treeseg {

enum class PredictorKind { Oracle, Files };

struct PipelineParams {
  double voxel_size = 0.1;
  TilingOptions tiling;
  double verticality_radius = 0.5;
  ClusterParams cluster;
  std::size_t k = 10;
  bool assign_3d = false;
  PredictorKind predictor = PredictorKind::Oracle;
  OracleNoise noise;
  /// Tile prediction manifest for PredictorKind::Files.
  std::filesystem::path prediction_manifest;
  unsigned workers = 1;

  void validate() const;
};

/// Reads the keys written by to_key_values; unknown keys are ignored.
void apply_key_values(const KeyValues& kv, PipelineParams& params);
KeyValues to_key_values(const PipelineParams& params);

struct StageTiming {
  std::string stage;
  double ms = 0.0;
};

/// Everything up to and including the projected coordinates, on the subsampled cloud.
struct PreparedCloud {
  SubsampleResult sub;
  std::vector<double> verticality;
  std::size_t tile_count = 0;
  PredictionField field;
  std::vector<Point3> projected;
  std::vector<StageTiming> timings;
};

/// Subsample, verticality, tiling, prediction, merge and projection. Errors are rethrown with
/// the failing stage's name prefixed.
PreparedCloud prepare_cloud(const PointCloud& input, const PipelineParams& params);

struct Segmentation {
  /// Subsampled indices that entered clustering.
  std::vector<Index> selected;
  ClusterResult clusters;
  InstanceMap instances;
};

/// Clustering and assignment on a prepared cloud.
Segmentation segment(const PreparedCloud& prepared, const PipelineParams& params);

struct PipelineResult {
  PreparedCloud prepared;
  Segmentation segmentation;
  /// Labels on the original (not subsampled) points.
  InstanceMap instances;
  std::vector<StageTiming> timings;
};

PipelineResult run_pipeline(const PointCloud& input, const PipelineParams& params);

/// Copy of `input` whose labels are the pipeline's instance labels.
PointCloud labeled_output(const PointCloud& input, const InstanceMap& instances);

struct SweepRow {
  double radius = 0.0;
  std::size_t raw_components = 0;
  std::size_t clusters = 0;
  /// Detection errors against the subsampled ground truth; absent for unlabeled input.
  std::optional<double> omission;
  std::optional<double> commission;
};

/// Re-clusters one prepared cloud at each grouping radius. Throws InvalidArgument for an empty
/// radius list.
std::vector<SweepRow> sweep_grouping_radius(const PreparedCloud& prepared, const PipelineParams& params,
                                            std::span<const double> radii);

/// "a:b:n" (n evenly spaced values from a to b inclusive) or a comma-separated list.
std::vector<double> parse_radii(const std::string& text);

std::string format_sweep_csv(std::span<const SweepRow> rows);

}  // namespace treeseg
