#include <doctest.h>

#include <cmath>
#include <map>
#include <numbers>
#include <tuple>

#include "support.hpp"
#include "treeseg/cloud.hpp"

using namespace treeseg;
using treeseg::test::Gen;

namespace {

PointCloud make_cloud(std::vector<Point3> pts) {
  PointCloud c;
  c.points = std::move(pts);
  return c;
}

using Key = std::tuple<long, long, long>;

Key key_of(const Point3& p, double vs) {
  return {static_cast<long>(std::floor(p.x / vs)), static_cast<long>(std::floor(p.y / vs)),
          static_cast<long>(std::floor(p.z / vs))};
}

}  // namespace

TEST_CASE("point labels") {
  CHECK(PointLabel::tree(7).is_tree());
  CHECK(PointLabel::tree(7).tree_id() == 7);
  CHECK(PointLabel::non_tree().is_annotated());
  CHECK_FALSE(PointLabel::non_annotated().is_annotated());
  CHECK(PointLabel::non_annotated().tree_id() == 0);
  CHECK_THROWS_AS(PointLabel::tree(0), InvalidArgument);
  CHECK(to_string(PointLabel::tree(3)) == "tree(3)");
}

TEST_CASE("cloud validation catches misaligned channels") {
  PointCloud c = make_cloud({{0, 0, 0}, {1, 1, 1}});
  c.labels = std::vector<PointLabel>{PointLabel::non_tree()};
  CHECK_THROWS_AS(c.validate(), DataError);
  c.labels->push_back(PointLabel::tree(2));
  c.attributes["v"] = {1.0};
  CHECK_THROWS_AS(c.validate(), DataError);
  c.attributes["v"].push_back(2.0);
  CHECK_NOTHROW(c.validate());
  c.points[1].y = std::nan("");
  CHECK_THROWS_AS(c.validate(), DataError);
}

TEST_CASE("voxel subsample: three points in one voxel") {
  const auto r = voxel_subsample(make_cloud({{0.01, 0.01, 0.01}, {0.05, 0.05, 0.05}, {0.09, 0.02, 0.03}}), 0.1);
  CHECK(r.cloud.size() == 1);
  REQUIRE(r.map.members_of.size() == 1);
  CHECK(r.map.members_of[0] == std::vector<Index>{0, 1, 2});
  // (0.05, 0.05, 0.05) is the voxel center.
  CHECK(r.map.kept_original[0] == 1);
}

TEST_CASE("voxel subsample: boundary arithmetic") {
  CHECK(voxel_subsample(make_cloud({{0, 0, 0}, {0.05, 0, 0}}), 0.1).cloud.size() == 1);
  CHECK(voxel_subsample(make_cloud({{0, 0, 0}, {0.15, 0, 0}}), 0.1).cloud.size() == 2);
}

TEST_CASE("voxel subsample: equidistant points keep the lower index") {
  const auto r = voxel_subsample(make_cloud({{0.75, 0.5, 0.5}, {0.25, 0.5, 0.5}}), 1.0);
  CHECK(r.map.kept_original[0] == 0);
}

TEST_CASE("voxel subsample: errors") {
  CHECK_THROWS_WITH_AS(voxel_subsample(PointCloud{}, 0.1), "voxel_subsample: empty input", DataError);
  CHECK_THROWS_AS(voxel_subsample(make_cloud({{0, 0, 0}}), 0.0), InvalidArgument);
}

TEST_CASE("voxel subsample matches brute-force voxel keys") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Gen gen(seed);
    const auto pts = seed % 2 ? gen.cloud(1000, -1.0, 1.0) : gen.lattice_cloud(1000, 30, 0.05);
    const double vs = 0.1;
    std::map<Key, std::vector<Index>> voxels;
    for (Index i = 0; i < pts.size(); ++i) voxels[key_of(pts[i], vs)].push_back(i);

    const auto r = voxel_subsample(make_cloud(pts), vs);
    REQUIRE(r.cloud.size() == voxels.size());
    for (Index s = 0; s < r.cloud.size(); ++s) {
      const auto& members = voxels.at(key_of(r.cloud.points[s], vs));
      CHECK(r.map.members_of[s] == members);
      // Oracle representative: nearest to the center, lowest index on ties.
      const auto [kx, ky, kz] = key_of(pts[members[0]], vs);
      const Point3 c{(kx + 0.5) * vs, (ky + 0.5) * vs, (kz + 0.5) * vs};
      Index best = members[0];
      for (Index m : members) {
        if (test::dist2(pts[m], c) < test::dist2(pts[best], c)) best = m;
      }
      CHECK(r.map.kept_original[s] == best);
      for (Index m : members) CHECK(r.map.representative_of[m] == s);
    }
  }
}

TEST_CASE("voxel subsample is idempotent") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Gen gen(seed);
    const double vs = gen.uniform(0.05, 0.5);
    const auto once = voxel_subsample(make_cloud(gen.cloud(2000, -3.0, 3.0)), vs);
    const auto twice = voxel_subsample(once.cloud, vs);
    CHECK(twice.cloud.points == once.cloud.points);
  }
}

TEST_CASE("voxel subsample carries labels and attributes of the kept point") {
  PointCloud c = make_cloud({{0.01, 0.01, 0.01}, {0.05, 0.05, 0.05}, {0.31, 0, 0}});
  c.labels = std::vector<PointLabel>{PointLabel::non_tree(), PointLabel::tree(4), PointLabel::tree(9)};
  c.attributes["v"] = {1.0, 2.0, 3.0};
  const auto r = voxel_subsample(c, 0.1);
  REQUIRE(r.cloud.size() == 2);
  CHECK((*r.cloud.labels)[0] == PointLabel::tree(4));
  CHECK((*r.cloud.labels)[1] == PointLabel::tree(9));
  CHECK(r.cloud.attributes.at("v") == std::vector<double>{2.0, 3.0});
}

TEST_CASE("propagate to original") {
  SUBCASE("one representative, five members") {
    std::vector<Point3> pts(5, Point3{0.02, 0.02, 0.02});
    const auto r = voxel_subsample(make_cloud(pts), 0.1);
    const auto out = propagate_to_original(std::vector<PointLabel>{PointLabel::tree(7)}, r.map);
    CHECK(out == std::vector<PointLabel>(5, PointLabel::tree(7)));
  }
  SUBCASE("identity map") {
    Gen gen(5);
    PointCloud c = make_cloud(gen.lattice_cloud(200, 1000, 1.0));
    const auto sub = voxel_subsample(c, 0.5);
    std::vector<PointLabel> labels;
    for (Index s = 0; s < sub.cloud.size(); ++s) labels.push_back(PointLabel::tree(static_cast<std::uint32_t>(s + 1)));
    const auto out = propagate_to_original(labels, sub.map);
    for (Index i = 0; i < c.size(); ++i) CHECK(out[i] == labels[sub.map.representative_of[i]]);
  }
  SUBCASE("every original takes its representative's label") {
    Gen gen(11);
    PointCloud c = make_cloud(gen.cloud(5000, 0.0, 2.0));
    c.labels.emplace();
    for (Index i = 0; i < c.size(); ++i) c.labels->push_back(PointLabel::tree(1 + gen.below(5)));
    const auto sub = voxel_subsample(c, 0.2);
    const auto out = propagate_to_original(*sub.cloud.labels, sub.map);
    REQUIRE(out.size() == c.size());
    for (Index s = 0; s < sub.cloud.size(); ++s) {
      const PointLabel rep = (*c.labels)[sub.map.kept_original[s]];
      for (Index m : sub.map.members_of[s]) CHECK(out[m] == rep);
    }
  }
  SUBCASE("length mismatch") {
    const auto r = voxel_subsample(make_cloud({{0, 0, 0}, {1, 1, 1}}), 0.1);
    CHECK_THROWS_AS(propagate_to_original(std::vector<int>{1}, r.map), InvalidArgument);
  }
}

TEST_CASE("outlier removal drops a far point") {
  Gen gen(3);
  std::vector<Point3> pts = gen.cloud(100, 0.0, 1.0);
  pts.push_back({50.0, 0.0, 0.0});
  const auto stat = mean_knn_distance(pts, 8);
  // Brute-force statistic for the far point.
  std::vector<double> d;
  for (Index j = 0; j < 100; ++j) d.push_back(std::sqrt(test::dist2(pts[100], pts[j])));
  std::sort(d.begin(), d.end());
  double expected = 0.0;
  for (int j = 0; j < 8; ++j) expected += d[j];
  CHECK(stat[100] == doctest::Approx(expected / 8).epsilon(1e-12));

  const auto kept = statistical_outlier_inliers(pts, {8, 2.0, 1});
  CHECK(kept.size() <= 100);
  CHECK(std::find(kept.begin(), kept.end(), Index{100}) == kept.end());
  CHECK(std::is_sorted(kept.begin(), kept.end()));
}

TEST_CASE("outlier removal keeps a uniform ring intact") {
  std::vector<Point3> ring;
  for (int i = 0; i < 360; ++i) {
    const double a = 2.0 * std::numbers::pi * i / 360.0;
    ring.push_back({10.0 * std::cos(a), 10.0 * std::sin(a), 0.0});
  }
  for (double ratio : {1e-6, 0.5, 1.0, 3.0}) {
    CHECK(statistical_outlier_inliers(ring, {2, ratio, 1}).size() == ring.size());
  }
}

TEST_CASE("outlier removal: huge ratio keeps everything, small clouds are rejected") {
  Gen gen(8);
  PointCloud c = make_cloud(gen.cloud(300, 0.0, 5.0));
  CHECK(statistical_outlier_removal(c, {8, 1e9, 1}).points == c.points);
  CHECK_THROWS_AS(statistical_outlier_removal(make_cloud(gen.cloud(8, 0, 1)), {8, 2.0, 1}), InvalidArgument);
}

TEST_CASE("outlier removal is monotone in std_ratio") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Gen gen(seed);
    auto pts = gen.cloud(400, 0.0, 1.0);
    for (int i = 0; i < 20; ++i) pts.push_back(gen.point(-10.0, 10.0));
    std::size_t previous = 0;
    for (double ratio = 0.0; ratio <= 4.0; ratio += 0.25) {
      const std::size_t kept = statistical_outlier_inliers(pts, {8, ratio, 1}).size();
      CHECK(kept >= previous);
      previous = kept;
    }
  }
}

TEST_CASE("outlier statistic does not depend on the worker count") {
  Gen gen(21);
  const auto pts = gen.cloud(3000, 0.0, 4.0);
  CHECK(mean_knn_distance(pts, 8, 1) == mean_knn_distance(pts, 8, 3));
}

TEST_CASE("coordinate digest tracks the point set") {
  std::vector<Point3> a{{0, 0, 0}, {1, 2, 3}};
  std::vector<Point3> b{{1, 2, 3}, {0, 0, 0}};
  CHECK(coordinate_digest(a) == coordinate_digest(a));
  CHECK(coordinate_digest(a) != coordinate_digest(b));
}
