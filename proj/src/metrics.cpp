#include "treeseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <unordered_map>

#include <boost/polygon/voronoi.hpp>

#include "treeseg/features.hpp"

namespace treeseg {
namespace {

void check_aligned_labels(std::span<const PointLabel> gt, std::span<const PointLabel> pred) {
  if (gt.size() != pred.size()) {
    throw DataError("ground truth has " + std::to_string(gt.size()) + " labels, prediction " +
                    std::to_string(pred.size()));
  }
}

std::vector<std::uint32_t> sorted_ids(std::span<const PointLabel> labels) {
  std::vector<std::uint32_t> ids;
  for (const auto& l : labels) {
    if (l.is_tree()) ids.push_back(l.tree_id());
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

std::size_t position_of(const std::vector<std::uint32_t>& ids, std::uint32_t id) {
  return static_cast<std::size_t>(std::lower_bound(ids.begin(), ids.end(), id) - ids.begin());
}

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

InstanceOverlap count_overlap(std::span<const PointLabel> gt, std::span<const PointLabel> pred) {
  check_aligned_labels(gt, pred);
  InstanceOverlap o;
  // Ids are collected from annotated points only, so every row and column has a non-zero size.
  std::vector<PointLabel> pred_annotated;
  std::vector<PointLabel> gt_annotated;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (!gt[i].is_annotated()) continue;
    gt_annotated.push_back(gt[i]);
    pred_annotated.push_back(pred[i]);
  }
  o.gt_ids = sorted_ids(gt_annotated);
  o.pred_ids = sorted_ids(pred_annotated);
  o.gt_size.assign(o.rows(), 0);
  o.pred_size.assign(o.cols(), 0);
  o.intersection.assign(o.rows() * o.cols(), 0);
  for (std::size_t i = 0; i < gt_annotated.size(); ++i) {
    const bool g = gt_annotated[i].is_tree();
    const bool p = pred_annotated[i].is_tree();
    const std::size_t r = g ? position_of(o.gt_ids, gt_annotated[i].tree_id()) : 0;
    const std::size_t c = p ? position_of(o.pred_ids, pred_annotated[i].tree_id()) : 0;
    if (g) ++o.gt_size[r];
    if (p) ++o.pred_size[c];
    if (g && p) ++o.intersection[r * o.cols() + c];
  }
  return o;
}

IoUMatrix iou_matrix(const InstanceOverlap& overlap) {
  IoUMatrix m{overlap.rows(), overlap.cols(), std::vector<double>(overlap.rows() * overlap.cols())};
  for (std::size_t i = 0; i < m.rows; ++i) {
    for (std::size_t j = 0; j < m.cols; ++j) {
      const std::size_t tp = overlap.tp(i, j);
      m(i, j) = ratio(tp, tp + overlap.fp(i, j) + overlap.fn(i, j));
    }
  }
  return m;
}

IoUMatrix iou_matrix(std::span<const PointLabel> gt, std::span<const PointLabel> pred) {
  return iou_matrix(count_overlap(gt, pred));
}

std::vector<std::pair<std::size_t, std::size_t>> max_weight_assignment(const IoUMatrix& m) {
  const std::size_t n = std::max(m.rows, m.cols);
  if (n == 0) return {};
  double top = 0.0;
  for (double v : m.values) {
    if (!std::isfinite(v)) throw InvalidArgument("hungarian_match: matrix entries must be finite");
    top = std::max(top, v);
  }
  // Minimize (top - value) over the zero-padded square matrix. 1-based potentials with
  // a virtual column 0, the classic O(n^3) shortest-augmenting-path formulation.
  auto cost = [&](std::size_t i, std::size_t j) {
    const double v = (i < m.rows && j < m.cols) ? m(i, j) : 0.0;
    return top - v;
  };
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> row_of(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    row_of[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = row_of[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[row_of[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (row_of[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      row_of[j0] = row_of[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t j = 1; j <= n; ++j) {
    const std::size_t i = row_of[j] - 1;
    if (i < m.rows && j - 1 < m.cols) out.emplace_back(i, j - 1);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> hungarian_match(const IoUMatrix& m) {
  auto pairs = max_weight_assignment(m);
  std::erase_if(pairs, [&](const auto& p) { return m(p.first, p.second) < kMatchIoU; });
  return pairs;
}

double f1_from_errors(double omission, double commission) {
  const double a = 1.0 - omission;
  const double b = 1.0 - commission;
  return a + b > 0.0 ? 2.0 * a * b / (a + b) : 0.0;
}

DetectionReport detection_metrics(const InstanceOverlap& overlap,
                                  std::vector<std::pair<std::size_t, std::size_t>> matches,
                                  std::span<const PointLabel> gt, std::span<const PointLabel> pred) {
  check_aligned_labels(gt, pred);
  if (overlap.rows() == 0) throw DataError("detection metrics: ground truth contains no trees");
  DetectionReport r;
  r.n_gt = overlap.rows();
  r.n_pred = overlap.cols();
  r.matches = std::move(matches);
  r.gt_matched = r.matches.size();
  r.gt_unmatched = r.n_gt - r.gt_matched;

  // Share of each prediction's points (all of them, annotated or not) lying on labeled trees.
  std::vector<std::size_t> total(r.n_pred, 0), on_tree(r.n_pred, 0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!pred[i].is_tree()) continue;
    const auto it = std::lower_bound(overlap.pred_ids.begin(), overlap.pred_ids.end(), pred[i].tree_id());
    if (it == overlap.pred_ids.end() || *it != pred[i].tree_id()) continue;
    const auto c = static_cast<std::size_t>(it - overlap.pred_ids.begin());
    ++total[c];
    if (gt[i].is_tree()) ++on_tree[c];
  }
  std::vector<char> matched(r.n_pred, 0);
  for (const auto& [row, col] : r.matches) matched[col] = 1;
  for (std::size_t c = 0; c < r.n_pred; ++c) {
    if (matched[c]) continue;
    if (2 * on_tree[c] < total[c]) {
      ++r.pred_filtered;
    } else {
      ++r.pred_unmatched;
    }
  }
  r.completeness = ratio(r.gt_matched, r.n_gt);
  r.omission = ratio(r.gt_unmatched, r.n_gt);
  r.commission = ratio(r.pred_unmatched, r.gt_matched + r.pred_unmatched);
  r.f1 = f1_from_errors(r.omission, r.commission);
  return r;
}

DetectionReport detection_metrics(std::span<const PointLabel> gt, std::span<const PointLabel> pred) {
  const auto overlap = count_overlap(gt, pred);
  return detection_metrics(overlap, hungarian_match(iou_matrix(overlap)), gt, pred);
}

SegmentationReport segmentation_metrics(const InstanceOverlap& overlap) {
  if (overlap.rows() == 0) throw DataError("segmentation metrics: ground truth contains no trees");
  SegmentationReport r;
  const std::size_t n = overlap.rows();
  r.pairing.assign(n, -1);
  r.iou.assign(n, 0.0);
  r.precision.assign(n, 0.0);
  r.recall.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double best = -1.0;
    for (std::size_t j = 0; j < overlap.cols(); ++j) {
      const std::size_t tp = overlap.tp(i, j);
      const double iou = ratio(tp, tp + overlap.fp(i, j) + overlap.fn(i, j));
      if (iou > best) {
        best = iou;
        r.pairing[i] = static_cast<std::int64_t>(j);
      }
    }
    if (r.pairing[i] < 0) continue;
    const auto j = static_cast<std::size_t>(r.pairing[i]);
    const std::size_t tp = overlap.tp(i, j);
    r.iou[i] = best;
    r.precision[i] = ratio(tp, tp + overlap.fp(i, j));
    r.recall[i] = ratio(tp, tp + overlap.fn(i, j));
  }
  auto mean = [n](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(n);
  };
  r.coverage = mean(r.iou);
  r.mean_precision = mean(r.precision);
  r.mean_recall = mean(r.recall);
  return r;
}

SegmentationReport segmentation_metrics(std::span<const PointLabel> gt, std::span<const PointLabel> pred) {
  return segmentation_metrics(count_overlap(gt, pred));
}

// ---------------------------------------------------------------------------- partitions

int partition_bin(double distance, double extent) {
  if (!(extent > 0.0) || distance < 0.0 || distance > extent) return -1;
  const auto b = static_cast<int>(std::floor(static_cast<double>(kPartitionBins) * distance / extent));
  return std::min(b, static_cast<int>(kPartitionBins) - 1);
}

PartitionReport partition_metrics(std::span<const Point3> points, std::span<const PointLabel> gt,
                                  std::span<const PointLabel> pred,
                                  const std::map<std::uint32_t, TreeBase>& gt_bases,
                                  PartitionAxis axis) {
  check_aligned_labels(gt, pred);
  if (points.size() != gt.size()) throw DataError("partition metrics: point/label length mismatch");
  const auto overlap = count_overlap(gt, pred);
  const auto seg = segmentation_metrics(overlap);

  std::vector<std::vector<Index>> gt_members(overlap.rows()), pred_members(overlap.cols());
  for (Index i = 0; i < points.size(); ++i) {
    if (!gt[i].is_annotated()) continue;
    if (gt[i].is_tree()) gt_members[position_of(overlap.gt_ids, gt[i].tree_id())].push_back(i);
    if (pred[i].is_tree()) pred_members[position_of(overlap.pred_ids, pred[i].tree_id())].push_back(i);
  }

  PartitionReport report;
  report.axis = axis;
  std::array<double, kPartitionBins> sum_p{}, sum_r{}, sum_c{};
  std::array<std::size_t, kPartitionBins> n_p{}, n_r{}, n_c{};

  for (std::size_t row = 0; row < overlap.rows(); ++row) {
    const std::uint32_t id = overlap.gt_ids[row];
    const auto& members = gt_members[row];
    std::function<double(const Point3&)> distance;
    double extent = 0.0;
    if (axis == PartitionAxis::Horizontal) {
      const auto it = gt_bases.find(id);
      if (it == gt_bases.end()) throw DataError("partition metrics: no base for treeID " + std::to_string(id));
      const TreeBase base = it->second;
      distance = [base](const Point3& p) { return std::hypot(p.x - base.x, p.y - base.y); };
    } else {
      double lowest = std::numeric_limits<double>::infinity();
      for (Index i : members) lowest = std::min(lowest, points[i].z);
      distance = [lowest](const Point3& p) { return p.z - lowest; };
    }
    for (Index i : members) extent = std::max(extent, distance(points[i]));
    if (!(extent > 0.0)) {
      report.skipped.push_back(id);
      continue;
    }

    std::array<std::size_t, kPartitionBins> gt_n{}, pred_n{}, tp_n{};
    for (Index i : members) {
      const int b = partition_bin(distance(points[i]), extent);
      if (b >= 0) ++gt_n[b];
    }
    if (seg.pairing[row] >= 0) {
      const auto col = static_cast<std::size_t>(seg.pairing[row]);
      const std::uint32_t pred_id = overlap.pred_ids[col];
      for (Index i : pred_members[col]) {
        const int b = partition_bin(distance(points[i]), extent);
        if (b < 0) continue;
        ++pred_n[b];
        if (gt[i].is_tree() && gt[i].tree_id() == id && pred[i].tree_id() == pred_id) ++tp_n[b];
      }
    }
    for (std::size_t b = 0; b < kPartitionBins; ++b) {
      if (pred_n[b] > 0) {
        sum_p[b] += ratio(tp_n[b], pred_n[b]);
        ++n_p[b];
      }
      if (gt_n[b] > 0) {
        sum_r[b] += ratio(tp_n[b], gt_n[b]);
        ++n_r[b];
      }
      const std::size_t uni = gt_n[b] + pred_n[b] - tp_n[b];
      if (uni > 0) {
        sum_c[b] += ratio(tp_n[b], uni);
        ++n_c[b];
      }
    }
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t b = 0; b < kPartitionBins; ++b) {
    report.precision[b] = n_p[b] ? sum_p[b] / static_cast<double>(n_p[b]) : nan;
    report.recall[b] = n_r[b] ? sum_r[b] / static_cast<double>(n_r[b]) : nan;
    report.coverage[b] = n_c[b] ? sum_c[b] / static_cast<double>(n_c[b]) : nan;
    report.trees[b] = n_c[b];
  }
  return report;
}

// ---------------------------------------------------------------------------- offsets

double offset_loss(std::span<const Vec3> predicted, std::span<const Vec3> truth,
                   std::span<const std::uint8_t> tree_mask, OffsetLossMode mode) {
  if (predicted.size() != truth.size() || predicted.size() != tree_mask.size()) {
    throw InvalidArgument("offset_loss: inputs must be aligned");
  }
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (!tree_mask[i]) continue;
    Vec3 d = predicted[i] - truth[i];
    if (mode == OffsetLossMode::XYOnly) d.z = 0.0;
    sum += d.norm();
    ++n;
  }
  if (n == 0) throw DataError("offset_loss: no tree points");
  return sum / static_cast<double>(n);
}

// ---------------------------------------------------------------------------- attributes

namespace {

using XY = std::pair<double, double>;

double cross(const XY& o, const XY& a, const XY& b) {
  return (a.first - o.first) * (b.second - o.second) - (a.second - o.second) * (b.first - o.first);
}

double polygon_area(const std::vector<XY>& poly) {
  double s = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const XY& a = poly[i];
    const XY& b = poly[(i + 1) % poly.size()];
    s += a.first * b.second - b.first * a.second;
  }
  return std::abs(s) / 2.0;
}

double circumradius(const XY& a, const XY& b, const XY& c) {
  const double ab = std::hypot(a.first - b.first, a.second - b.second);
  const double bc = std::hypot(b.first - c.first, b.second - c.second);
  const double ca = std::hypot(c.first - a.first, c.second - a.second);
  const double area2 = std::abs(cross(a, b, c));
  if (area2 == 0.0) return std::numeric_limits<double>::infinity();
  return ab * bc * ca / (2.0 * area2);
}

}  // namespace

Hull2D convex_hull(std::span<const std::pair<double, double>> xy) {
  std::vector<XY> pts(xy.begin(), xy.end());
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  Hull2D out;
  if (pts.size() < 3) {
    out.boundary = pts;
    return out;
  }
  std::vector<XY> h(2 * pts.size());
  std::size_t k = 0;
  for (const XY& p : pts) {
    while (k >= 2 && cross(h[k - 2], h[k - 1], p) <= 0.0) --k;
    h[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(h[k - 2], h[k - 1], pts[i]) <= 0.0) --k;
    h[k++] = pts[i];
  }
  h.resize(k - 1);
  out.boundary = std::move(h);
  out.area = out.boundary.size() >= 3 ? polygon_area(out.boundary) : 0.0;
  return out;
}

double max_pairwise_distance(std::span<const std::pair<double, double>> xy) {
  const Hull2D hull = convex_hull(xy);
  const auto& b = hull.boundary;
  double best = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    for (std::size_t j = i + 1; j < b.size(); ++j) {
      best = std::max(best, std::hypot(b[i].first - b[j].first, b[i].second - b[j].second));
    }
  }
  return best;
}

Hull2D alpha_shape(std::span<const std::pair<double, double>> xy, double alpha) {
  if (!(alpha > 0.0)) throw InvalidArgument("alpha_shape: alpha must be positive");
  Hull2D out;
  if (xy.empty()) return out;
  // The Voronoi builder needs integer input: snap to a 0.1 mm lattice relative to the minimum.
  constexpr double kQuantum = 1e-4;
  double min_x = xy[0].first, min_y = xy[0].second;
  for (const auto& p : xy) {
    min_x = std::min(min_x, p.first);
    min_y = std::min(min_y, p.second);
  }
  std::vector<std::pair<std::int64_t, std::int64_t>> snapped;
  snapped.reserve(xy.size());
  for (const auto& p : xy) {
    const double sx = std::llround((p.first - min_x) / kQuantum);
    const double sy = std::llround((p.second - min_y) / kQuantum);
    if (sx > 2e9 || sy > 2e9) throw InvalidArgument("alpha_shape: extent too large");
    snapped.emplace_back(static_cast<std::int64_t>(sx), static_cast<std::int64_t>(sy));
  }
  std::sort(snapped.begin(), snapped.end());
  snapped.erase(std::unique(snapped.begin(), snapped.end()), snapped.end());

  using BPoint = boost::polygon::point_data<std::int32_t>;
  std::vector<BPoint> sites;
  std::vector<XY> coords;
  sites.reserve(snapped.size());
  coords.reserve(snapped.size());
  for (const auto& [sx, sy] : snapped) {
    sites.emplace_back(static_cast<std::int32_t>(sx), static_cast<std::int32_t>(sy));
    coords.emplace_back(min_x + static_cast<double>(sx) * kQuantum, min_y + static_cast<double>(sy) * kQuantum);
  }
  if (sites.size() < 3) return out;

  boost::polygon::voronoi_diagram<double> vd;
  boost::polygon::construct_voronoi(sites.begin(), sites.end(), &vd);

  // Each Voronoi vertex is a Delaunay face; co-circular faces are fanned into triangles.
  std::map<std::pair<std::size_t, std::size_t>, int> edge_use;
  std::vector<std::size_t> ring;
  for (const auto& vertex : vd.vertices()) {
    ring.clear();
    const auto* start = vertex.incident_edge();
    const auto* e = start;
    do {
      ring.push_back(e->cell()->source_index());
      e = e->rot_next();
    } while (e != start);
    for (std::size_t t = 1; t + 1 < ring.size(); ++t) {
      const std::size_t a = ring[0], b = ring[t], c = ring[t + 1];
      if (circumradius(coords[a], coords[b], coords[c]) > alpha) continue;
      out.area += std::abs(cross(coords[a], coords[b], coords[c])) / 2.0;
      for (auto [u, v] : {std::pair{a, b}, std::pair{b, c}, std::pair{c, a}}) {
        ++edge_use[{std::min(u, v), std::max(u, v)}];
      }
    }
  }
  std::vector<std::size_t> boundary;
  for (const auto& [edge, count] : edge_use) {
    if (count != 1) continue;
    boundary.push_back(edge.first);
    boundary.push_back(edge.second);
  }
  std::sort(boundary.begin(), boundary.end());
  boundary.erase(std::unique(boundary.begin(), boundary.end()), boundary.end());
  for (std::size_t i : boundary) out.boundary.push_back(coords[i]);
  return out;
}

TreeAttributes tree_attributes(std::span<const Point3> tree_points, const AttributeOptions& options) {
  if (tree_points.empty()) throw InvalidArgument("tree_attributes: no points");
  TreeAttributes a;
  std::vector<double> z;
  z.reserve(tree_points.size());
  for (const auto& p : tree_points) z.push_back(p.z);
  std::sort(z.begin(), z.end());
  const std::size_t r = z.size() >= 10 ? 4 : 0;
  a.height = z[z.size() - 1 - r] - z[r];

  std::vector<XY> xy;
  xy.reserve(tree_points.size());
  for (const auto& p : tree_points) xy.emplace_back(p.x, p.y);
  const Hull2D hull = options.hull == HullKind::Convex ? convex_hull(xy) : alpha_shape(xy, options.alpha);
  if (hull.area > 0.0) {
    a.canopy_cover = hull.area;
    a.crown_diameter = max_pairwise_distance(hull.boundary);
  } else {
    a.canopy_cover = 0.0;
    a.crown_diameter = max_pairwise_distance(xy);
  }
  return a;
}

// ---------------------------------------------------------------------------- evaluation

EvalPair eval_subsample(const PointCloud& gt, const PointCloud& pred, double voxel_size) {
  if (!gt.labels) throw DataError("evaluation: ground-truth cloud has no labels");
  if (!pred.labels) throw DataError("evaluation: prediction cloud has no labels");
  if (gt.size() != pred.size() || coordinate_digest(gt.points) != coordinate_digest(pred.points)) {
    throw DataError("evaluation: prediction and ground truth are different point sets");
  }
  auto sub = voxel_subsample(gt, voxel_size);
  EvalPair out;
  out.pred.reserve(sub.map.subsampled_size());
  for (Index kept : sub.map.kept_original) out.pred.push_back((*pred.labels)[kept]);
  out.cloud = std::move(sub.cloud);
  return out;
}

EvalReport evaluate(const PointCloud& gt, const PointCloud& pred, const EvalOptions& options) {
  const EvalPair pair = eval_subsample(gt, pred, options.voxel_size);
  const auto& gt_labels = *pair.cloud.labels;
  EvalReport report;
  report.detection = detection_metrics(gt_labels, pair.pred);
  report.segmentation = segmentation_metrics(gt_labels, pair.pred);
  const auto vert = verticality(pair.cloud.points, {options.verticality_radius, options.workers});
  const auto bases = compute_tree_bases(pair.cloud, vert);
  report.horizontal =
      partition_metrics(pair.cloud.points, gt_labels, pair.pred, bases, PartitionAxis::Horizontal);
  report.vertical =
      partition_metrics(pair.cloud.points, gt_labels, pair.pred, bases, PartitionAxis::Vertical);
  return report;
}

namespace {

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

std::string format_eval_csv(const EvalReport& r) {
  const auto& d = r.detection;
  const auto& s = r.segmentation;
  std::string out =
      "n_gt,n_pred,gt_matched,gt_unmatched,pred_unmatched,pred_filtered,completeness,omission,"
      "commission,f1,precision,recall,coverage\n";
  out += std::to_string(d.n_gt) + "," + std::to_string(d.n_pred) + "," + std::to_string(d.gt_matched) +
         "," + std::to_string(d.gt_unmatched) + "," + std::to_string(d.pred_unmatched) + "," +
         std::to_string(d.pred_filtered) + "," + fmt(d.completeness) + "," + fmt(d.omission) + "," +
         fmt(d.commission) + "," + fmt(d.f1) + "," + fmt(s.mean_precision) + "," +
         fmt(s.mean_recall) + "," + fmt(s.coverage) + "\n";
  return out;
}

std::string format_eval_table(const EvalReport& r) {
  const auto& d = r.detection;
  const auto& s = r.segmentation;
  char buf[1024];
  std::snprintf(buf, sizeof(buf),
                "Instance detection\n"
                "  ground-truth trees   %8zu\n"
                "  predicted trees      %8zu\n"
                "  matched              %8zu\n"
                "  C      (%%)           %8.1f\n"
                "  E_om   (%%)           %8.1f\n"
                "  E_com  (%%)           %8.1f\n"
                "  F1     (%%)           %8.1f\n"
                "Instance segmentation\n"
                "  Prec   (%%)           %8.1f\n"
                "  Rec    (%%)           %8.1f\n"
                "  Cov    (%%)           %8.1f\n",
                d.n_gt, d.n_pred, d.gt_matched, 100 * d.completeness, 100 * d.omission,
                100 * d.commission, 100 * d.f1, 100 * s.mean_precision, 100 * s.mean_recall,
                100 * s.coverage);
  return buf;
}

std::string format_partition_csv(const PartitionReport& r) {
  std::string out = "bin,lower,upper,precision,recall,coverage,trees\n";
  for (std::size_t b = 0; b < kPartitionBins; ++b) {
    out += std::to_string(b + 1) + "," + fmt(static_cast<double>(b) / kPartitionBins) + "," +
           fmt(static_cast<double>(b + 1) / kPartitionBins) + "," + fmt(r.precision[b]) + "," +
           fmt(r.recall[b]) + "," + fmt(r.coverage[b]) + "," + std::to_string(r.trees[b]) + "\n";
  }
  return out;
}

}  // namespace treeseg
