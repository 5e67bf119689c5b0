#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <vector>

#include "treeseg/cloud.hpp"
#include "treeseg/prediction_field.hpp"
#include "treeseg/tiler.hpp"

namespace treeseg {

/// Trunk location at 3 m above the tree's lowest point.
struct TreeBase {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Point3 point() const { return {x, y, z}; }
  friend bool operator==(const TreeBase&, const TreeBase&) = default;
};

struct TreeBaseOptions {
  double slice_low = 2.75;
  double slice_high = 3.25;
  double base_height = 3.0;
  double min_verticality = 0.6;
};

/// Base of one tree: mean xy of the points between 2.75 m and 3.25 m above the lowest point
/// whose verticality is at least 0.6. Falls back to the slice without the verticality test, then
/// to the lowest decile of the tree's points (by height). z is lowest z + 3 m.
TreeBase tree_base(std::span<const Point3> tree_points, std::span<const double> verticality,
                   const TreeBaseOptions& options = {});

/// tree_base for every tree id in a labeled cloud.
std::map<std::uint32_t, TreeBase> compute_tree_bases(const PointCloud& cloud,
                                                     std::span<const double> verticality,
                                                     const TreeBaseOptions& options = {});

/// Ground-truth offset target of every point: base - p for tree points, zero otherwise.
std::vector<Vec3> ground_truth_offsets(const PointCloud& cloud,
                                       const std::map<std::uint32_t, TreeBase>& bases);

/// Noise injected by the oracle predictor.
struct OracleNoise {
  /// Standard deviation of the Gaussian added to each offset component (m).
  double offset_sigma = 0.0;
  /// If positive, the xy part of each offset perturbation is scaled down to at most this length.
  double offset_bound = 0.0;
  /// Probability of flipping the semantic decision of a point.
  double label_flip_prob = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Predictions for the inner points of `tile` derived from ground-truth labels. Tree points get
/// p_tree = 1 and offset = base - p; non-tree points p_tree = 0 and a zero offset; non-annotated
/// points p_tree = 0.5 and a zero offset. Noise is drawn from a stream keyed by (seed, tile id),
/// so the output does not depend on the order or thread in which tiles are processed.
std::vector<PointPrediction> oracle_predict(const TileView& tile, const PointCloud& labeled,
                                            const std::map<std::uint32_t, TreeBase>& bases,
                                            const OracleNoise& noise = {});

/// Binary prediction file: "FPRD", u16 version, u64 count, u64 coordinate digest, then per point
/// f32 p_tree and 3 x f32 offset.
std::vector<std::uint8_t> encode_predictions(const PredictionField& field);
PredictionField decode_predictions(std::span<const std::uint8_t> bytes);

void save_predictions(const PredictionField& field, const std::filesystem::path& path);
/// Loads and validates a field for `points`; throws DataError("prediction/cloud misalignment")
/// when the file belongs to another point set.
PredictionField load_predictions(const std::filesystem::path& path, std::span<const Point3> points);

/// "tile_id path" per line; relative paths resolve against the manifest's directory.
std::map<std::size_t, std::filesystem::path> read_prediction_manifest(const std::filesystem::path& path);

/// Reads the prediction file for one tile and checks it against the tile's inner points.
TilePrediction load_tile_prediction(const std::map<std::size_t, std::filesystem::path>& manifest,
                                    const TileView& tile, std::span<const Point3> points);

}  // namespace treeseg
