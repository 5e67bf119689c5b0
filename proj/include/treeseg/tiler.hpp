#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "treeseg/cloud.hpp"
#include "treeseg/prediction_field.hpp"

namespace treeseg {

/// Sliding-window geometry. Defaults are 35 m tiles whose central 8 m square is predicted,
/// laid out with a 4 m stride.
struct TilingOptions {
  double outer_edge = 35.0;
  double inner_edge = 8.0;
  double stride = 4.0;

  void validate() const;
};

/// One tile: an outer context square with a concentric inner prediction square.
/// Squares are half-open in x and y, [lo, lo + edge); z is unbounded.
struct TileSpec {
  std::size_t id = 0;
  double outer_x = 0.0, outer_y = 0.0, outer_edge = 0.0;
  double inner_x = 0.0, inner_y = 0.0, inner_edge = 0.0;
  double stride = 0.0;

  bool in_outer(const Point3& p) const {
    return p.x >= outer_x && p.x < outer_x + outer_edge && p.y >= outer_y && p.y < outer_y + outer_edge;
  }
  bool in_inner(const Point3& p) const {
    return p.x >= inner_x && p.x < inner_x + inner_edge && p.y >= inner_y && p.y < inner_y + inner_edge;
  }
};

/// Points of a cloud falling inside a tile's outer square.
struct TileView {
  TileSpec spec;
  std::vector<Index> point_indices;     // ascending
  std::vector<std::uint8_t> inner_mask;  // parallel to point_indices

  std::vector<Index> inner_indices() const;
  std::size_t inner_count() const;
};

/// Inner squares on a stride lattice anchored at the xy bounding-box minimum, extended until
/// every point is covered. Tiles whose inner square holds no point are dropped. Ids are
/// consecutive in row-major (y, then x) lattice order.
std::vector<TileSpec> generate_tiles(std::span<const Point3> points, const TilingOptions& options = {});

TileView crop_tile(std::span<const Point3> points, const TileSpec& spec);

/// Predictions for the inner points of one tile, in ascending point-index order.
struct TilePrediction {
  std::size_t tile_id = 0;
  std::vector<Index> inner_indices;
  std::vector<PointPrediction> predictions;
};

TilePrediction make_tile_prediction(const TileView& view, std::vector<PointPrediction> predictions);

/// Incremental form of merge_predictions. Tiles must be added in ascending id order.
class PredictionMerger {
 public:
  explicit PredictionMerger(std::span<const Point3> points);

  void add(const TilePrediction& tile);
  /// Throws DataError listing uncovered point indices.
  PredictionField finish() &&;

 private:
  std::span<const Point3> points_;
  std::vector<double> p_tree_;
  std::vector<Vec3> offset_;
  std::vector<std::uint32_t> count_;
  bool any_added_ = false;
  std::size_t last_tile_ = 0;
};

/// Mean prediction per point over every inner square covering it. Tiles are reduced in
/// ascending id order regardless of input order, so the result is bit-reproducible.
PredictionField merge_predictions(std::span<const Point3> points, std::vector<TilePrediction> tiles);

/// Projected coordinates c_i = p_i + o_i.
std::vector<Point3> project(std::span<const Point3> points, const PredictionField& field);

/// Text manifest: one line per tile with id, outer and inner bounds, outer and inner point counts.
std::string format_tile_manifest(std::span<const TileView> views);

}  // namespace treeseg
