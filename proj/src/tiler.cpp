#include "treeseg/tiler.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

namespace treeseg {

void PredictionField::validate() const {
  if (offset.size() != p_tree.size()) {
    throw DataError("prediction field: " + std::to_string(p_tree.size()) + " probabilities but " +
                    std::to_string(offset.size()) + " offsets");
  }
  if (alignment.count != p_tree.size()) {
    throw DataError("prediction field: alignment declares " + std::to_string(alignment.count) +
                    " points, field holds " + std::to_string(p_tree.size()));
  }
  for (std::size_t i = 0; i < p_tree.size(); ++i) {
    if (!(p_tree[i] >= 0.0 && p_tree[i] <= 1.0)) {
      throw DataError("prediction field: probability " + std::to_string(p_tree[i]) +
                      " out of [0, 1] at index " + std::to_string(i));
    }
    if (!offset[i].finite()) {
      throw DataError("prediction field: non-finite offset at index " + std::to_string(i));
    }
  }
}

void PredictionField::check_aligned(std::span<const Point3> points) const {
  validate();
  if (alignment != CloudAlignment::of(points)) throw DataError("prediction/cloud misalignment");
}

void TilingOptions::validate() const {
  if (!(stride > 0.0 && stride <= inner_edge && inner_edge <= outer_edge) ||
      !std::isfinite(outer_edge)) {
    throw InvalidArgument("tiling requires 0 < stride <= inner edge <= outer edge (got stride " +
                          std::to_string(stride) + ", inner " + std::to_string(inner_edge) +
                          ", outer " + std::to_string(outer_edge) + ")");
  }
}

std::vector<Index> TileView::inner_indices() const {
  std::vector<Index> out;
  for (std::size_t k = 0; k < point_indices.size(); ++k) {
    if (inner_mask[k]) out.push_back(point_indices[k]);
  }
  return out;
}

std::size_t TileView::inner_count() const {
  return static_cast<std::size_t>(std::count(inner_mask.begin(), inner_mask.end(), 1));
}

namespace {

// Number of lattice origins lo + i * stride needed so that [origin, origin + edge) reaches past hi.
std::size_t lattice_count(double lo, double hi, double edge, double stride) {
  std::size_t n = 1;
  while (lo + static_cast<double>(n - 1) * stride + edge <= hi) ++n;
  return n;
}

// Lattice slots whose half-open window [lo + i * stride, + edge) contains v.
std::pair<std::size_t, std::size_t> covering_slots(double v, double lo, double edge, double stride,
                                                   std::size_t n) {
  const double rel = v - lo;
  const auto first = static_cast<std::int64_t>(std::ceil((rel - edge) / stride)) - 1;
  const auto last = static_cast<std::int64_t>(std::floor(rel / stride)) + 1;
  const auto b = static_cast<std::size_t>(std::max<std::int64_t>(0, first));
  const auto e = static_cast<std::size_t>(
      std::clamp<std::int64_t>(last + 1, 0, static_cast<std::int64_t>(n)));
  return {b, std::max(b, e)};
}

}  // namespace

std::vector<TileSpec> generate_tiles(std::span<const Point3> points, const TilingOptions& options) {
  options.validate();
  if (points.empty()) throw DataError("generate_tiles: empty input");
  double x0 = points[0].x, y0 = points[0].y, x1 = x0, y1 = y0;
  for (const auto& p : points) {
    if (!p.finite()) throw DataError("generate_tiles: non-finite coordinate");
    x0 = std::min(x0, p.x);
    y0 = std::min(y0, p.y);
    x1 = std::max(x1, p.x);
    y1 = std::max(y1, p.y);
  }
  const double inner = options.inner_edge;
  const double stride = options.stride;
  const std::size_t nx = lattice_count(x0, x1, inner, stride);
  const std::size_t ny = lattice_count(y0, y1, inner, stride);

  auto spec_at = [&](std::size_t ix, std::size_t iy) {
    TileSpec s;
    s.inner_x = x0 + static_cast<double>(ix) * stride;
    s.inner_y = y0 + static_cast<double>(iy) * stride;
    s.inner_edge = inner;
    const double margin = 0.5 * (options.outer_edge - inner);
    s.outer_x = s.inner_x - margin;
    s.outer_y = s.inner_y - margin;
    s.outer_edge = options.outer_edge;
    s.stride = stride;
    return s;
  };

  std::vector<std::uint8_t> occupied(nx * ny, 0);
  for (const auto& p : points) {
    const auto [bx, ex] = covering_slots(p.x, x0, inner, stride, nx);
    const auto [by, ey] = covering_slots(p.y, y0, inner, stride, ny);
    for (std::size_t iy = by; iy < ey; ++iy) {
      for (std::size_t ix = bx; ix < ex; ++ix) {
        if (!occupied[iy * nx + ix] && spec_at(ix, iy).in_inner(p)) occupied[iy * nx + ix] = 1;
      }
    }
  }

  std::vector<TileSpec> tiles;
  for (std::size_t iy = 0; iy < ny; ++iy) {
    for (std::size_t ix = 0; ix < nx; ++ix) {
      if (!occupied[iy * nx + ix]) continue;
      TileSpec s = spec_at(ix, iy);
      s.id = tiles.size();
      tiles.push_back(s);
    }
  }
  return tiles;
}

TileView crop_tile(std::span<const Point3> points, const TileSpec& spec) {
  TileView view;
  view.spec = spec;
  for (Index i = 0; i < points.size(); ++i) {
    if (!spec.in_outer(points[i])) continue;
    view.point_indices.push_back(i);
    view.inner_mask.push_back(spec.in_inner(points[i]) ? 1 : 0);
  }
  return view;
}

TilePrediction make_tile_prediction(const TileView& view, std::vector<PointPrediction> predictions) {
  TilePrediction t;
  t.tile_id = view.spec.id;
  t.inner_indices = view.inner_indices();
  if (t.inner_indices.size() != predictions.size()) {
    throw DataError("tile " + std::to_string(view.spec.id) + ": " +
                    std::to_string(predictions.size()) + " predictions for " +
                    std::to_string(t.inner_indices.size()) + " inner points");
  }
  t.predictions = std::move(predictions);
  return t;
}

PredictionMerger::PredictionMerger(std::span<const Point3> points)
    : points_(points), p_tree_(points.size(), 0.0), offset_(points.size()), count_(points.size(), 0) {}

void PredictionMerger::add(const TilePrediction& tile) {
  if (any_added_ && tile.tile_id <= last_tile_) {
    throw InvalidArgument("PredictionMerger: tiles must be added in ascending id order");
  }
  if (tile.inner_indices.size() != tile.predictions.size()) {
    throw DataError("tile " + std::to_string(tile.tile_id) + ": prediction count mismatch");
  }
  any_added_ = true;
  last_tile_ = tile.tile_id;
  for (std::size_t k = 0; k < tile.inner_indices.size(); ++k) {
    const Index i = tile.inner_indices[k];
    if (i >= points_.size()) {
      throw DataError("tile " + std::to_string(tile.tile_id) + ": point index " +
                      std::to_string(i) + " out of range");
    }
    const auto& pred = tile.predictions[k];
    // Running mean: exact for constant inputs and independent of accumulated magnitude.
    const double w = 1.0 / static_cast<double>(++count_[i]);
    p_tree_[i] += (pred.p_tree - p_tree_[i]) * w;
    offset_[i].x += (pred.offset.x - offset_[i].x) * w;
    offset_[i].y += (pred.offset.y - offset_[i].y) * w;
    offset_[i].z += (pred.offset.z - offset_[i].z) * w;
  }
}

PredictionField PredictionMerger::finish() && {
  std::vector<Index> uncovered;
  for (Index i = 0; i < count_.size(); ++i) {
    if (count_[i] == 0) uncovered.push_back(i);
  }
  if (!uncovered.empty()) {
    std::string list;
    for (std::size_t k = 0; k < std::min<std::size_t>(uncovered.size(), 20); ++k) {
      list += (k ? ", " : "") + std::to_string(uncovered[k]);
    }
    if (uncovered.size() > 20) list += ", ...";
    throw DataError("merge_predictions: " + std::to_string(uncovered.size()) +
                    " points not covered by any tile: " + list);
  }
  PredictionField field;
  field.p_tree = std::move(p_tree_);
  field.offset = std::move(offset_);
  field.alignment = CloudAlignment::of(points_);
  return field;
}

PredictionField merge_predictions(std::span<const Point3> points, std::vector<TilePrediction> tiles) {
  std::sort(tiles.begin(), tiles.end(),
            [](const TilePrediction& a, const TilePrediction& b) { return a.tile_id < b.tile_id; });
  PredictionMerger merger(points);
  for (const auto& t : tiles) merger.add(t);
  return std::move(merger).finish();
}

std::vector<Point3> project(std::span<const Point3> points, const PredictionField& field) {
  if (field.size() != points.size() || field.offset.size() != points.size()) {
    throw DataError("project: field has " + std::to_string(field.size()) + " entries for " +
                    std::to_string(points.size()) + " points");
  }
  std::vector<Point3> out(points.size());
  for (Index i = 0; i < points.size(); ++i) out[i] = points[i] + field.offset[i];
  return out;
}

std::string format_tile_manifest(std::span<const TileView> views) {
  std::string out = "# tile_id outer_xmin outer_ymin outer_xmax outer_ymax inner_xmin inner_ymin "
                    "inner_xmax inner_ymax outer_points inner_points\n";
  char buf[512];
  for (const auto& v : views) {
    const auto& s = v.spec;
    std::snprintf(buf, sizeof(buf), "%zu %.6f %.6f %.6f %.6f %.6f %.6f %.6f %.6f %zu %zu\n", s.id,
                  s.outer_x, s.outer_y, s.outer_x + s.outer_edge, s.outer_y + s.outer_edge,
                  s.inner_x, s.inner_y, s.inner_x + s.inner_edge, s.inner_y + s.inner_edge,
                  v.point_indices.size(), v.inner_count());
    out += buf;
  }
  return out;
}

}  // namespace treeseg
