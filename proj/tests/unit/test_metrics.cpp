#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <set>

#include "support.hpp"
#include "treeseg/metrics.hpp"
#include "treeseg/synthetic.hpp"

using namespace treeseg;
using treeseg::test::Gen;

namespace {

using Labels = std::vector<PointLabel>;
using XY = std::pair<double, double>;

PointLabel T(std::uint32_t id) { return PointLabel::tree(id); }
const PointLabel N = PointLabel::non_tree();
const PointLabel U = PointLabel::non_annotated();

Labels random_labels(Gen& gen, std::size_t n, std::uint32_t ids, double p_non, double p_unannotated) {
  Labels out;
  for (std::size_t i = 0; i < n; ++i) {
    if (gen.coin(p_unannotated)) {
      out.push_back(U);
    } else if (gen.coin(p_non)) {
      out.push_back(N);
    } else {
      out.push_back(T(1 + static_cast<std::uint32_t>(gen.below(ids))));
    }
  }
  return out;
}

// Best total over every injective row -> column map of the zero-padded square matrix.
double best_total(const IoUMatrix& m) {
  const std::size_t n = std::max(m.rows, m.cols);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = 0.0;
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < m.rows; ++i) {
      if (perm[i] < m.cols) s += m(i, perm[i]);
    }
    best = std::max(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

Labels relabel(const Labels& in, const std::map<std::uint32_t, std::uint32_t>& to) {
  Labels out;
  for (const auto& l : in) out.push_back(l.is_tree() ? T(to.at(l.tree_id())) : l);
  return out;
}

std::map<std::uint32_t, std::uint32_t> shuffled_ids(Gen& gen, std::uint32_t n) {
  std::vector<std::uint32_t> target(n);
  std::iota(target.begin(), target.end(), 100);
  std::shuffle(target.begin(), target.end(), gen.engine());
  std::map<std::uint32_t, std::uint32_t> m;
  for (std::uint32_t i = 0; i < n; ++i) m[i + 1] = target[i];
  return m;
}

bool same_or_nan(double a, double b) { return (std::isnan(a) && std::isnan(b)) || std::abs(a - b) < 1e-12; }

}  // namespace

TEST_CASE("IoU of a partial prediction") {
  const Labels gt{T(1), T(1), T(1), T(1), N, N};
  const Labels pred{T(5), T(5), N, N, T(5), T(5)};
  const auto m = iou_matrix(gt, pred);
  REQUIRE(m.rows == 1);
  REQUIRE(m.cols == 1);
  CHECK(m(0, 0) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("identical partitions give an identity matrix") {
  const Labels gt{T(1), T(1), T(2), T(3), N, U};
  const auto m = iou_matrix(gt, gt);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) CHECK(m(i, j) == (i == j ? 1.0 : 0.0));
  }
}

TEST_CASE("IoU matrix equals a naive counter") {
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    Gen gen(seed);
    const std::size_t n = 1 + gen.below(200);
    const auto gt = random_labels(gen, n, 1 + gen.below(6), 0.2, 0.1);
    const auto pred = random_labels(gen, n, 1 + gen.below(6), 0.2, 0.0);
    const auto m = iou_matrix(gt, pred);
    const auto o = count_overlap(gt, pred);
    std::set<std::uint32_t> gi, pj;
    for (std::size_t k = 0; k < n; ++k) {
      if (gt[k].is_tree()) gi.insert(gt[k].tree_id());
      if (gt[k].is_annotated() && pred[k].is_tree()) pj.insert(pred[k].tree_id());
    }
    CHECK(o.gt_ids == std::vector<std::uint32_t>(gi.begin(), gi.end()));
    CHECK(o.pred_ids == std::vector<std::uint32_t>(pj.begin(), pj.end()));
    for (std::size_t i = 0; i < m.rows; ++i) {
      for (std::size_t j = 0; j < m.cols; ++j) {
        std::size_t tp = 0, fp = 0, fn = 0;
        for (std::size_t k = 0; k < n; ++k) {
          if (!gt[k].is_annotated()) continue;
          const bool g = gt[k] == T(o.gt_ids[i]);
          const bool p = pred[k] == T(o.pred_ids[j]);
          tp += g && p;
          fp += !g && p;
          fn += g && !p;
        }
        CHECK(m(i, j) == doctest::Approx(static_cast<double>(tp) / (tp + fp + fn)));
        CHECK(m(i, j) >= 0.0);
        CHECK(m(i, j) <= 1.0);
      }
    }
  }
}

TEST_CASE("Hungarian matching examples") {
  IoUMatrix a{2, 2, {0.9, 0.1, 0.2, 0.8}};
  CHECK(hungarian_match(a) == std::vector<std::pair<std::size_t, std::size_t>>{{0, 0}, {1, 1}});
  IoUMatrix b{2, 2, {0.6, 0.55, 0.55, 0.0}};
  CHECK(hungarian_match(b) == std::vector<std::pair<std::size_t, std::size_t>>{{0, 1}, {1, 0}});
  IoUMatrix low{1, 1, {0.49}};
  CHECK(hungarian_match(low).empty());
  CHECK(max_weight_assignment(low).size() == 1);
  IoUMatrix wide{1, 3, {0.1, 0.7, 0.6}};
  CHECK(hungarian_match(wide) == std::vector<std::pair<std::size_t, std::size_t>>{{0, 1}});
  IoUMatrix tall{3, 1, {0.1, 0.7, 0.6}};
  CHECK(hungarian_match(tall) == std::vector<std::pair<std::size_t, std::size_t>>{{1, 0}});
  CHECK(hungarian_match(IoUMatrix{}).empty());
  IoUMatrix bad{1, 1, {std::nan("")}};
  CHECK_THROWS_AS(hungarian_match(bad), InvalidArgument);
}

TEST_CASE("Hungarian total equals exhaustive search up to 6x6") {
  for (std::uint64_t seed = 1; seed <= 300; ++seed) {
    Gen gen(seed);
    IoUMatrix m;
    m.rows = 1 + gen.below(6);
    m.cols = 1 + gen.below(6);
    for (std::size_t k = 0; k < m.rows * m.cols; ++k) {
      m.values.push_back(gen.coin(0.2) ? 0.0 : std::round(gen.uniform(0, 1) * (seed % 2 ? 4 : 1000)) / (seed % 2 ? 4 : 1000));
    }
    const auto pairs = max_weight_assignment(m);
    double total = 0.0;
    std::set<std::size_t> rows, cols;
    for (const auto& [i, j] : pairs) {
      total += m(i, j);
      rows.insert(i);
      cols.insert(j);
      CHECK(j < m.cols);
    }
    CHECK(rows.size() == pairs.size());
    CHECK(cols.size() == pairs.size());
    CHECK(pairs.size() == std::min(m.rows, m.cols));
    CHECK(total == doctest::Approx(best_total(m)).epsilon(1e-12));
    for (const auto& [i, j] : hungarian_match(m)) CHECK(m(i, j) >= 0.5);
  }
}

TEST_CASE("F1 from published error rates") {
  struct Row {
    double om, com, f1;
  };
  const Row rows[] = {
      {15.4, 27.1, 78.3}, {10.9, 49.1, 64.8}, {3.8, 4.5, 95.8},   {1.3, 1.3, 98.7},
      {0.6, 0.6, 99.4},   {0.6, 4.9, 97.2},   {0.0, 4.3, 97.8},   {0.6, 4.3, 97.5},
      {63.2, 42.9, 44.8}, {61.0, 52.8, 42.7}, {60.1, 32.2, 50.2}, {52.1, 31.0, 56.5},
      {47.1, 26.0, 61.7},
  };
  for (const auto& r : rows) {
    const double f1 = f1_from_errors(r.om / 100, r.com / 100);
    CHECK(std::abs(100 * f1 - r.f1) <= 0.1);
    const double a = 1 - r.om / 100, b = 1 - r.com / 100;
    CHECK(std::abs(f1 - 2 * a * b / (a + b)) < 1e-15);
  }
  CHECK(f1_from_errors(0, 0) == 1.0);
  CHECK(f1_from_errors(1, 1) == 0.0);
}

TEST_CASE("completeness of 155 matched out of 156") {
  Labels gt, pred;
  for (std::uint32_t t = 1; t <= 156; ++t) {
    for (int k = 0; k < 4; ++k) {
      gt.push_back(T(t));
      pred.push_back(t == 156 ? N : T(t));
    }
  }
  const auto d = detection_metrics(gt, pred);
  CHECK(d.gt_matched == 155);
  CHECK(d.gt_unmatched == 1);
  CHECK(std::round(1000 * d.completeness) == 994);
  CHECK(d.omission == doctest::Approx(1.0 / 156));
  CHECK(d.completeness + d.omission == doctest::Approx(1.0));
}

TEST_CASE("perfect detection and the unmatched-prediction filter") {
  const Labels gt{T(1), T(1), T(2), T(2), N, N, N, U, U, U};
  auto d = detection_metrics(gt, gt);
  CHECK(d.completeness == 1.0);
  CHECK(d.omission == 0.0);
  CHECK(d.commission == 0.0);
  CHECK(d.f1 == 1.0);

  // Prediction 9 lies on non-tree points (dropped), prediction 8 half on tree points (kept).
  const Labels gt2{T(1), T(1), T(1), T(1), T(2), T(2), T(2), T(2), N, N, N, N};
  const Labels pred2{T(1), T(1), T(1), T(1), T(2), T(2), T(2), T(8), N, T(8), T(9), T(9)};
  d = detection_metrics(gt2, pred2);
  CHECK(d.gt_matched == 2);
  CHECK(d.pred_unmatched == 1);
  CHECK(d.pred_filtered == 1);
  CHECK(d.commission == doctest::Approx(1.0 / 3.0));

  CHECK_THROWS_AS(detection_metrics(Labels{N, U}, Labels{T(1), T(1)}), DataError);
  CHECK_THROWS_AS(detection_metrics(Labels{N}, Labels{N, N}), DataError);
}

TEST_CASE("detection equals a brute-force evaluation") {
  for (std::uint64_t seed = 1; seed <= 60; ++seed) {
    Gen gen(seed);
    const std::size_t n = 20 + gen.below(150);
    const std::uint32_t ids = 1 + gen.below(5);
    const auto gt = random_labels(gen, n, ids, 0.2, 0.1);
    // Noisy copy of the ground truth so that good matches exist.
    Labels pred;
    for (const auto& l : gt) {
      if (gen.coin(0.2)) {
        pred.push_back(gen.coin(0.3) ? N : T(1 + static_cast<std::uint32_t>(gen.below(ids + 2))));
      } else {
        pred.push_back(l.is_annotated() ? l : N);
      }
    }
    if (std::none_of(gt.begin(), gt.end(), [](const auto& l) { return l.is_tree(); })) continue;
    const auto o = count_overlap(gt, pred);
    const auto m = iou_matrix(o);
    const auto d = detection_metrics(gt, pred);

    double matched_total = 0.0;
    std::set<std::size_t> matched_cols;
    for (const auto& [i, j] : d.matches) {
      CHECK(m(i, j) >= 0.5);
      matched_total += m(i, j);
      matched_cols.insert(j);
    }
    // Every pair with IoU > 0.5 is unique in its row and column, so the optimum keeps them all.
    std::size_t strong = 0;
    for (double v : m.values) strong += v > 0.5;
    CHECK(d.matches.size() >= strong);

    std::size_t unmatched_kept = 0, filtered = 0;
    for (std::size_t j = 0; j < o.cols(); ++j) {
      if (matched_cols.count(j)) continue;
      std::size_t total = 0, on_tree = 0;
      for (std::size_t k = 0; k < n; ++k) {
        if (pred[k] != T(o.pred_ids[j])) continue;
        ++total;
        on_tree += gt[k].is_tree();
      }
      if (2 * on_tree < total) {
        ++filtered;
      } else {
        ++unmatched_kept;
      }
    }
    CHECK(d.n_gt == o.rows());
    CHECK(d.gt_matched == d.matches.size());
    CHECK(d.gt_unmatched == o.rows() - d.matches.size());
    CHECK(d.pred_unmatched == unmatched_kept);
    CHECK(d.pred_filtered == filtered);
    CHECK(d.completeness == doctest::Approx(static_cast<double>(d.gt_matched) / o.rows()));
    const double den = static_cast<double>(d.gt_matched + unmatched_kept);
    CHECK(d.commission == doctest::Approx(den > 0 ? unmatched_kept / den : 0.0));
    CHECK(d.f1 == doctest::Approx(f1_from_errors(d.omission, d.commission)));
  }
}

TEST_CASE("segmentation of a merged prediction") {
  const Labels gt{T(1), T(1), T(2), T(2), N};
  const Labels pred{T(7), T(7), T(7), T(7), N};
  const auto s = segmentation_metrics(gt, pred);
  CHECK(s.coverage == doctest::Approx(0.5));
  CHECK(s.mean_precision == doctest::Approx(0.5));
  CHECK(s.mean_recall == doctest::Approx(1.0));
  CHECK(s.pairing == std::vector<std::int64_t>{0, 0});

  const auto perfect = segmentation_metrics(gt, gt);
  CHECK(perfect.coverage == 1.0);
  CHECK(perfect.mean_precision == 1.0);
  CHECK(perfect.mean_recall == 1.0);

  const auto none = segmentation_metrics(gt, Labels(5, N));
  CHECK(none.pairing == std::vector<std::int64_t>{-1, -1});
  CHECK(none.coverage == 0.0);

  // Equal IoU with two predictions: the lower column wins.
  const Labels gt3{T(1), T(1), N, N};
  const Labels tie{T(4), T(5), N, N};
  CHECK(segmentation_metrics(gt3, tie).pairing == std::vector<std::int64_t>{0});
  CHECK_THROWS_AS(segmentation_metrics(Labels{N}, Labels{N}), DataError);
}

TEST_CASE("segmentation equals a per-pair recount and respects the coverage bound") {
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    Gen gen(seed);
    const std::size_t n = 10 + gen.below(150);
    const auto gt = random_labels(gen, n, 1 + gen.below(5), 0.2, 0.1);
    const auto pred = random_labels(gen, n, 1 + gen.below(5), 0.3, 0.0);
    if (std::none_of(gt.begin(), gt.end(), [](const auto& l) { return l.is_tree(); })) continue;
    const auto o = count_overlap(gt, pred);
    const auto m = iou_matrix(o);
    const auto s = segmentation_metrics(o);
    double cov = 0, prec = 0, rec = 0;
    for (std::size_t i = 0; i < o.rows(); ++i) {
      std::int64_t best = -1;
      double best_v = -1;
      for (std::size_t j = 0; j < o.cols(); ++j) {
        if (m(i, j) > best_v) {
          best_v = m(i, j);
          best = static_cast<std::int64_t>(j);
        }
      }
      CHECK(s.pairing[i] == best);
      if (best < 0) continue;
      const auto j = static_cast<std::size_t>(best);
      cov += m(i, j);
      prec += static_cast<double>(o.tp(i, j)) / o.pred_size[j];
      rec += static_cast<double>(o.tp(i, j)) / o.gt_size[i];
    }
    CHECK(s.coverage == doctest::Approx(cov / o.rows()));
    CHECK(s.mean_precision == doctest::Approx(prec / o.rows()));
    CHECK(s.mean_recall == doctest::Approx(rec / o.rows()));

    const auto d = detection_metrics(gt, pred);
    std::set<std::size_t> matched_rows;
    for (const auto& mt : d.matches) matched_rows.insert(mt.first);
    double bound = static_cast<double>(d.gt_matched);
    for (std::size_t i = 0; i < o.rows(); ++i) {
      if (!matched_rows.count(i) && s.pairing[i] >= 0) bound += m(i, static_cast<std::size_t>(s.pairing[i]));
    }
    CHECK(s.coverage <= bound / o.rows() + 1e-12);
  }
}

TEST_CASE("metrics do not depend on instance ids") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Gen gen(seed);
    const std::size_t n = 200;
    std::vector<Point3> pts;
    for (std::size_t i = 0; i < n; ++i) pts.push_back({gen.uniform(0, 10), gen.uniform(0, 10), gen.uniform(0, 10)});
    const auto gt = random_labels(gen, n, 4, 0.2, 0.05);
    const auto pred = random_labels(gen, n, 5, 0.2, 0.0);
    std::map<std::uint32_t, TreeBase> bases;
    for (std::uint32_t t = 1; t <= 4; ++t) bases[t] = {gen.uniform(0, 10), gen.uniform(0, 10), 0};
    const auto gmap = shuffled_ids(gen, 4);
    const auto pmap = shuffled_ids(gen, 5);
    const auto gt2 = relabel(gt, gmap);
    const auto pred2 = relabel(pred, pmap);
    std::map<std::uint32_t, TreeBase> bases2;
    for (const auto& [id, b] : bases) bases2[gmap.at(id)] = b;

    const auto d1 = detection_metrics(gt, pred), d2 = detection_metrics(gt2, pred2);
    CHECK(d1.gt_matched == d2.gt_matched);
    CHECK(d1.pred_unmatched == d2.pred_unmatched);
    CHECK(d1.f1 == doctest::Approx(d2.f1));
    // Pairing ties may resolve differently after relabeling, so compare on tie-free data.
    const auto s1 = segmentation_metrics(gt, pred), s2 = segmentation_metrics(gt2, pred2);
    const auto m1 = iou_matrix(gt, pred);
    bool ties = false;
    for (std::size_t i = 0; i < m1.rows; ++i) {
      std::vector<double> row(m1.values.begin() + i * m1.cols, m1.values.begin() + (i + 1) * m1.cols);
      std::sort(row.rbegin(), row.rend());
      ties |= row.size() > 1 && row[0] == row[1];
    }
    CHECK(s1.coverage == doctest::Approx(s2.coverage));
    if (!ties) {
      CHECK(s1.mean_precision == doctest::Approx(s2.mean_precision));
      const auto h1 = partition_metrics(pts, gt, pred, bases, PartitionAxis::Horizontal);
      const auto h2 = partition_metrics(pts, gt2, pred2, bases2, PartitionAxis::Horizontal);
      for (std::size_t b = 0; b < kPartitionBins; ++b) {
        CHECK(same_or_nan(h1.recall[b], h2.recall[b]));
        CHECK(same_or_nan(h1.precision[b], h2.precision[b]));
      }
    }
  }
}

TEST_CASE("partition bins") {
  CHECK(partition_bin(0.0, 10.0) == 0);
  CHECK(partition_bin(0.99, 10.0) == 0);
  CHECK(partition_bin(1.0, 10.0) == 1);
  CHECK(partition_bin(9.99, 10.0) == 9);
  CHECK(partition_bin(10.0, 10.0) == 9);
  CHECK(partition_bin(10.01, 10.0) == -1);
  CHECK(partition_bin(-0.01, 10.0) == -1);
}

TEST_CASE("perfect prediction fills every bin with ones") {
  Gen gen(3);
  std::vector<Point3> pts;
  Labels gt;
  std::map<std::uint32_t, TreeBase> bases;
  for (std::uint32_t t = 1; t <= 3; ++t) {
    const double cx = 10.0 * t;
    bases[t] = {cx, 0, 3};
    for (int k = 0; k < 500; ++k) {
      const double r = gen.uniform(0, 3), a = gen.uniform(0, 2 * std::numbers::pi);
      pts.push_back({cx + r * std::cos(a), r * std::sin(a), gen.uniform(0, 15)});
      gt.push_back(T(t));
    }
  }
  for (auto axis : {PartitionAxis::Horizontal, PartitionAxis::Vertical}) {
    const auto r = partition_metrics(pts, gt, gt, bases, axis);
    for (std::size_t b = 0; b < kPartitionBins; ++b) {
      CHECK(r.precision[b] == 1.0);
      CHECK(r.recall[b] == 1.0);
      CHECK(r.coverage[b] == 1.0);
      CHECK(r.trees[b] == 3);
    }
  }
  CHECK_THROWS_AS(partition_metrics(pts, gt, gt, {}, PartitionAxis::Horizontal), DataError);
  CHECK_NOTHROW(partition_metrics(pts, gt, gt, {}, PartitionAxis::Vertical));
}

TEST_CASE("prediction missing the outermost decile") {
  std::vector<Point3> pts;
  Labels gt, pred;
  for (int k = 0; k < 100; ++k) {
    const double r = 0.1 * k + 0.05;  // ten points per bin of a 10 m radius
    pts.push_back({r, 0, 1});
    gt.push_back(T(1));
    pred.push_back(k >= 90 ? N : T(1));
  }
  pts.push_back({10, 0, 1});
  gt.push_back(T(1));
  pred.push_back(N);
  const std::map<std::uint32_t, TreeBase> bases{{1, {0, 0, 3}}};
  const auto r = partition_metrics(pts, gt, pred, bases, PartitionAxis::Horizontal);
  for (std::size_t b = 0; b < 9; ++b) CHECK(r.recall[b] == 1.0);
  CHECK(r.recall[9] == 0.0);
  CHECK(std::isnan(r.precision[9]));
  CHECK(r.coverage[9] == 0.0);
}

TEST_CASE("horizontal bins of each tree cover all of its points") {
  Gen gen(4);
  std::vector<Point3> pts;
  for (int k = 0; k < 300; ++k) pts.push_back({gen.uniform(-5, 5), gen.uniform(-5, 5), gen.uniform(0, 5)});
  const double ext = std::sqrt(50.0);
  std::size_t binned = 0;
  for (const auto& p : pts) binned += partition_bin(std::hypot(p.x, p.y), ext) >= 0;
  CHECK(binned == pts.size());
}

TEST_CASE("degenerate trees are skipped") {
  const std::vector<Point3> pts{{1, 1, 0}, {1, 1, 0}, {5, 5, 0}, {5, 5, 2}};
  const Labels gt{T(1), T(1), T(2), T(2)};
  const std::map<std::uint32_t, TreeBase> bases{{1, {1, 1, 3}}, {2, {5, 5, 3}}};
  const auto h = partition_metrics(pts, gt, gt, bases, PartitionAxis::Horizontal);
  CHECK(h.skipped == std::vector<std::uint32_t>{1, 2});
  CHECK(std::isnan(h.coverage[0]));
  const auto v = partition_metrics(pts, gt, gt, bases, PartitionAxis::Vertical);
  CHECK(v.skipped == std::vector<std::uint32_t>{1});
  CHECK(v.coverage[0] == 1.0);
  CHECK(v.trees[0] == 1);
}

TEST_CASE("partition metrics equal a brute-force recount on an overlapping forest") {
  ForestSpec spec;
  spec.n_trees = 6;
  spec.extent = 16;
  spec.crown_overlap = 1.6;
  spec.ground_density = 10;
  spec.understory_tufts = 2;
  spec.seed = 5;
  const Forest f = generate_forest(spec);
  const auto& pts = f.cloud.points;
  const auto& gt = *f.cloud.labels;
  Gen gen(5);
  // Prediction: ground truth with crown points above 10 m reassigned at random.
  Labels pred = gt;
  for (Index i = 0; i < pts.size(); ++i) {
    if (gt[i].is_tree() && pts[i].z > 10 && gen.coin(0.3)) pred[i] = T(1 + static_cast<std::uint32_t>(gen.below(6)));
  }
  const auto o = count_overlap(gt, pred);
  const auto s = segmentation_metrics(o);

  for (auto axis : {PartitionAxis::Horizontal, PartitionAxis::Vertical}) {
    const auto r = partition_metrics(pts, gt, pred, f.bases, axis);
    std::array<double, 10> sp{}, sr{}, sc{};
    std::array<int, 10> np{}, nr{}, nc{};
    for (std::size_t row = 0; row < o.rows(); ++row) {
      const std::uint32_t id = o.gt_ids[row];
      const std::uint32_t pid = o.pred_ids[static_cast<std::size_t>(s.pairing[row])];
      double lowest = 1e300;
      for (Index i = 0; i < pts.size(); ++i) {
        if (gt[i] == T(id)) lowest = std::min(lowest, pts[i].z);
      }
      auto dist = [&](const Point3& p) {
        return axis == PartitionAxis::Horizontal ? std::hypot(p.x - f.bases.at(id).x, p.y - f.bases.at(id).y)
                                                 : p.z - lowest;
      };
      double extent = 0;
      for (Index i = 0; i < pts.size(); ++i) {
        if (gt[i] == T(id)) extent = std::max(extent, dist(pts[i]));
      }
      std::array<int, 10> g{}, p{}, tp{};
      for (Index i = 0; i < pts.size(); ++i) {
        const double d = dist(pts[i]);
        if (d < 0 || d > extent) continue;
        const int b = std::min(9, static_cast<int>(std::floor(10 * d / extent)));
        const bool in_g = gt[i] == T(id);
        const bool in_p = gt[i].is_annotated() && pred[i] == T(pid);
        g[b] += in_g;
        p[b] += in_p;
        tp[b] += in_g && in_p;
      }
      for (int b = 0; b < 10; ++b) {
        if (p[b]) sp[b] += static_cast<double>(tp[b]) / p[b], ++np[b];
        if (g[b]) sr[b] += static_cast<double>(tp[b]) / g[b], ++nr[b];
        if (g[b] + p[b] - tp[b]) sc[b] += static_cast<double>(tp[b]) / (g[b] + p[b] - tp[b]), ++nc[b];
      }
    }
    for (int b = 0; b < 10; ++b) {
      CHECK(r.precision[b] == doctest::Approx(sp[b] / np[b]).epsilon(1e-12));
      CHECK(r.recall[b] == doctest::Approx(sr[b] / nr[b]).epsilon(1e-12));
      CHECK(r.coverage[b] == doctest::Approx(sc[b] / nc[b]).epsilon(1e-12));
      CHECK(r.trees[b] == static_cast<std::size_t>(nc[b]));
    }
  }
}

TEST_CASE("offset loss") {
  const std::vector<Vec3> truth{{1, 2, 3}, {0, 0, 0}, {4, 4, 4}};
  const std::vector<std::uint8_t> mask{1, 0, 1};
  CHECK(offset_loss(truth, truth, mask, OffsetLossMode::Full3D) == 0.0);
  std::vector<Vec3> shifted = truth;
  for (auto& v : shifted) v.z += 1;
  shifted[1] = {100, 100, 100};
  CHECK(offset_loss(shifted, truth, mask, OffsetLossMode::Full3D) == doctest::Approx(1.0));
  CHECK(offset_loss(shifted, truth, mask, OffsetLossMode::XYOnly) == 0.0);
  CHECK_THROWS_AS(offset_loss(truth, truth, std::vector<std::uint8_t>{0, 0, 0}, OffsetLossMode::Full3D), DataError);
  CHECK_THROWS_AS(offset_loss(truth, truth, std::vector<std::uint8_t>{1}, OffsetLossMode::Full3D), InvalidArgument);
}

TEST_CASE("offset loss of Gaussian noise matches the chi mean") {
  Gen gen(2024);
  const std::size_t n = 100000;
  std::vector<Vec3> truth(n), pred(n);
  for (std::size_t i = 0; i < n; ++i) {
    truth[i] = {gen.normal(3), gen.normal(3), gen.normal(3)};
    pred[i] = truth[i] + Vec3{gen.normal(0.1), gen.normal(0.1), gen.normal(0.1)};
  }
  const double expected = 0.1 * std::sqrt(2.0) * std::tgamma(2.0) / std::tgamma(1.5);
  CHECK(expected == doctest::Approx(0.1596).epsilon(1e-3));
  const double loss = offset_loss(pred, truth, std::vector<std::uint8_t>(n, 1), OffsetLossMode::Full3D);
  CHECK(std::abs(loss - expected) < 0.05 * expected);
}

TEST_CASE("hulls of a unit square") {
  const std::vector<XY> sq{{0, 0}, {1, 0}, {1, 1}, {0, 1}, {0.5, 0.5}};
  const auto convex = convex_hull(sq);
  CHECK(convex.area == doctest::Approx(1.0));
  CHECK(convex.boundary.size() == 4);
  CHECK(max_pairwise_distance(convex.boundary) == doctest::Approx(std::sqrt(2.0)));
  const auto alpha = alpha_shape(sq, 1.0);
  CHECK(alpha.area == doctest::Approx(1.0));

  std::vector<Point3> crown;
  for (const auto& [x, y] : sq) crown.push_back({x, y, 10});
  for (auto kind : {HullKind::Convex, HullKind::Alpha}) {
    const auto a = tree_attributes(crown, {kind, 1.0});
    CHECK(a.canopy_cover == doctest::Approx(1.0));
    CHECK(a.crown_diameter == doctest::Approx(std::sqrt(2.0)));
  }
}

TEST_CASE("alpha shape follows a concave outline") {
  // An L of lattice points: the convex hull fills the notch, the alpha shape does not.
  std::vector<XY> pts;
  for (int x = 0; x <= 20; ++x) {
    for (int y = 0; y <= 20; ++y) {
      if (x <= 5 || y <= 5) pts.emplace_back(0.5 * x, 0.5 * y);
    }
  }
  const double l_area = 10 * 2.5 + 2.5 * 7.5;
  CHECK(convex_hull(pts).area == doctest::Approx(100.0 - 7.5 * 7.5 / 2));
  // The half-cell triangle spanning the reflex corner has the same circumradius as any lattice triangle.
  CHECK(alpha_shape(pts, 0.6).area == doctest::Approx(l_area + 0.125).epsilon(1e-6));
  CHECK(alpha_shape(pts, 1e6).area == doctest::Approx(convex_hull(pts).area).epsilon(1e-6));
  CHECK(alpha_shape(pts, 0.1).area == 0.0);
}

TEST_CASE("tree height uses the fifth order statistics") {
  std::vector<Point3> stick;
  for (int z = 0; z < 30; ++z) stick.push_back({0, 0, static_cast<double>(z)});
  const auto a = tree_attributes(stick);
  CHECK(a.height == 21.0);
  CHECK(a.canopy_cover == 0.0);
  CHECK(a.crown_diameter == 0.0);
  std::vector<Point3> few{{0, 0, 1}, {3, 4, 7}, {6, 8, 2}};
  const auto b = tree_attributes(few);
  CHECK(b.height == 6.0);
  CHECK(b.canopy_cover == 0.0);
  CHECK(b.crown_diameter == doctest::Approx(10.0));
  CHECK_THROWS(tree_attributes(std::vector<Point3>{}));
}

TEST_CASE("crown diameter equals the brute-force maximum over all points") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Gen gen(seed);
    std::vector<XY> pts;
    const std::size_t n = 3 + gen.below(300);
    for (std::size_t i = 0; i < n; ++i) {
      const double r = 5 * std::sqrt(gen.uniform(0, 1)), a = gen.uniform(0, 2 * std::numbers::pi);
      pts.emplace_back(r * std::cos(a) * 1.5, r * std::sin(a));
    }
    double best = 0;
    for (const auto& p : pts) {
      for (const auto& q : pts) best = std::max(best, std::hypot(p.first - q.first, p.second - q.second));
    }
    const auto hull = convex_hull(pts);
    CHECK(max_pairwise_distance(hull.boundary) == doctest::Approx(best).epsilon(1e-12));
    CHECK(max_pairwise_distance(pts) == doctest::Approx(best).epsilon(1e-12));
    // Shoelace over the hull, and every point inside it.
    for (const auto& p : pts) {
      for (std::size_t k = 0; k < hull.boundary.size(); ++k) {
        const auto& a = hull.boundary[k];
        const auto& b = hull.boundary[(k + 1) % hull.boundary.size()];
        CHECK((b.first - a.first) * (p.second - a.second) - (b.second - a.second) * (p.first - a.first) >= -1e-9);
      }
    }
    // Vertices are snapped to 0.1 mm inside the triangulation.
    CHECK(alpha_shape(pts, 1e9).area == doctest::Approx(hull.area).epsilon(1e-4));
  }
}

TEST_CASE("evaluation subsample keeps both label sets per voxel") {
  PointCloud gt;
  gt.points = {{0.01, 0.01, 0.01}, {0.02, 0.02, 0.02}, {0.5, 0.5, 0.5}};
  gt.labels = Labels{T(1), T(2), N};
  PointCloud pred = gt;
  pred.labels = Labels{T(4), T(5), T(6)};
  const auto e = eval_subsample(gt, pred, 0.1);
  REQUIRE(e.cloud.size() == 2);
  CHECK((*e.cloud.labels)[1] == N);
  CHECK(e.pred[1] == T(6));
  CHECK(((*e.cloud.labels)[0] == T(1)) == (e.pred[0] == T(4)));
  pred.points[2].x += 1;
  CHECK_THROWS_AS(eval_subsample(gt, pred, 0.1), DataError);
}

TEST_CASE("full evaluation of a perfect prediction") {
  ForestSpec spec;
  spec.n_trees = 4;
  spec.extent = 14;
  spec.seed = 8;
  const Forest f = generate_forest(spec);
  const auto report = evaluate(f.cloud, f.cloud);
  CHECK(report.detection.f1 == 1.0);
  CHECK(report.segmentation.coverage == 1.0);
  for (std::size_t b = 0; b < kPartitionBins; ++b) {
    CHECK(report.horizontal.coverage[b] == 1.0);
    CHECK(report.vertical.recall[b] == 1.0);
  }
  const auto csv = format_eval_csv(report);
  CHECK(csv.rfind("n_gt,n_pred,gt_matched,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
  const auto bins = format_partition_csv(report.vertical);
  CHECK(std::count(bins.begin(), bins.end(), '\n') == 11);
  CHECK(format_eval_table(report).find("100.0") != std::string::npos);
}
