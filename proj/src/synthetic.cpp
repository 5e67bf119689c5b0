#include "treeseg/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "treeseg/random.hpp"

namespace treeseg {
namespace {

constexpr std::uint64_t kGroundStream = 1ull << 32;
constexpr std::uint64_t kTuftStream = (1ull << 32) + 1;
constexpr std::uint64_t kLayoutStream = (1ull << 32) + 2;

void check_range(const char* name, double lo, double hi, bool positive) {
  if (!std::isfinite(lo) || !std::isfinite(hi) || lo > hi || (positive ? !(lo > 0.0) : lo < 0.0)) {
    throw InvalidArgument(std::string("forest spec: invalid ") + name + " range");
  }
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo == hi ? lo : std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Approximate ellipsoid surface area (Knud Thomsen).
double spheroid_area(double a, double c) {
  constexpr double p = 1.6075;
  const double ap = std::pow(a, p), cp = std::pow(c, p);
  return 4.0 * std::numbers::pi * std::pow((ap * ap + 2.0 * ap * cp) / 3.0, 1.0 / p);
}

std::vector<std::pair<double, double>> place_trunks(const ForestSpec& spec) {
  std::vector<std::pair<double, double>> xy;
  const double lo = spec.margin, hi = spec.extent - spec.margin;
  if (spec.layout == ForestLayout::Grid) {
    const auto cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(spec.n_trees))));
    const std::size_t rows = cols == 0 ? 0 : (spec.n_trees + cols - 1) / cols;
    const double w = (static_cast<double>(cols) - 1.0) * spec.min_trunk_spacing;
    const double h = (static_cast<double>(rows) - 1.0) * spec.min_trunk_spacing;
    if (w > hi - lo || h > hi - lo) throw DataError("forest spec: grid does not fit inside the extent");
    const double x0 = (spec.extent - w) / 2.0, y0 = (spec.extent - h) / 2.0;
    for (std::size_t i = 0; i < spec.n_trees; ++i) {
      xy.emplace_back(x0 + static_cast<double>(i % cols) * spec.min_trunk_spacing,
                      y0 + static_cast<double>(i / cols) * spec.min_trunk_spacing);
    }
    return xy;
  }
  auto rng = keyed_rng(spec.seed, kLayoutStream);
  const double s2 = spec.min_trunk_spacing * spec.min_trunk_spacing;
  std::size_t attempts = 0;
  while (xy.size() < spec.n_trees) {
    if (attempts++ >= spec.max_attempts) {
      throw DataError("forest spec: could not place " + std::to_string(spec.n_trees) + " trunks " +
                      std::to_string(spec.min_trunk_spacing) + " m apart after " +
                      std::to_string(spec.max_attempts) + " attempts");
    }
    const double x = uniform(rng, lo, hi), y = uniform(rng, lo, hi);
    bool ok = true;
    for (const auto& [px, py] : xy) {
      if ((px - x) * (px - x) + (py - y) * (py - y) < s2) {
        ok = false;
        break;
      }
    }
    if (ok) xy.emplace_back(x, y);
  }
  return xy;
}

}  // namespace

void ForestSpec::validate() const {
  if (!(min_trunk_spacing > 0.0)) throw InvalidArgument("forest spec: min_trunk_spacing must be positive");
  if (!(extent > 2.0 * margin) || margin < 0.0) throw InvalidArgument("forest spec: extent must exceed twice the margin");
  check_range("trunk_height", trunk_height_min, trunk_height_max, true);
  check_range("trunk_radius", trunk_radius_min, trunk_radius_max, true);
  check_range("crown_radius", crown_radius_min, crown_radius_max, true);
  check_range("crown_depth", crown_depth_min, crown_depth_max, true);
  if (trunk_radius_max * 2.0 >= min_trunk_spacing) {
    throw InvalidArgument("forest spec: trunks wider than their spacing");
  }
  if (trunk_height_min - crown_depth_max < 4.0) {
    throw InvalidArgument("forest spec: crowns must start at least 4 m above the ground");
  }
  if (!(crown_overlap > 0.0)) throw InvalidArgument("forest spec: crown_overlap must be positive");
  if (!(max_lean_deg >= 0.0 && max_lean_deg < 45.0)) throw InvalidArgument("forest spec: max_lean_deg must be in [0, 45)");
  if (!(trunk_density > 0.0) || !(crown_density > 0.0) || ground_density < 0.0) {
    throw InvalidArgument("forest spec: densities must be positive");
  }
}

ForestSpec forest_spec_from(const KeyValues& kv, ForestSpec s) {
  read_value(kv, "n_trees", s.n_trees);
  read_value(kv, "min_trunk_spacing", s.min_trunk_spacing);
  std::string layout = s.layout == ForestLayout::Grid ? "grid" : "random";
  read_value(kv, "layout", layout);
  if (layout == "grid") {
    s.layout = ForestLayout::Grid;
  } else if (layout == "random") {
    s.layout = ForestLayout::Random;
  } else {
    throw InvalidArgument("invalid value for 'layout': '" + layout + "'");
  }
  read_value(kv, "extent", s.extent);
  read_value(kv, "margin", s.margin);
  read_value(kv, "trunk_height_min", s.trunk_height_min);
  read_value(kv, "trunk_height_max", s.trunk_height_max);
  read_value(kv, "trunk_radius_min", s.trunk_radius_min);
  read_value(kv, "trunk_radius_max", s.trunk_radius_max);
  read_value(kv, "crown_radius_min", s.crown_radius_min);
  read_value(kv, "crown_radius_max", s.crown_radius_max);
  read_value(kv, "crown_depth_min", s.crown_depth_min);
  read_value(kv, "crown_depth_max", s.crown_depth_max);
  read_value(kv, "crown_overlap", s.crown_overlap);
  read_value(kv, "max_lean_deg", s.max_lean_deg);
  read_value(kv, "trunk_density", s.trunk_density);
  read_value(kv, "crown_density", s.crown_density);
  read_value(kv, "ground_density", s.ground_density);
  read_value(kv, "understory_tufts", s.understory_tufts);
  read_value(kv, "understory_points", s.understory_points);
  read_value(kv, "max_attempts", s.max_attempts);
  read_value(kv, "seed", s.seed);
  return s;
}

KeyValues to_key_values(const ForestSpec& s) {
  return {
      {"n_trees", std::to_string(s.n_trees)},
      {"min_trunk_spacing", format_double(s.min_trunk_spacing)},
      {"layout", s.layout == ForestLayout::Grid ? "grid" : "random"},
      {"extent", format_double(s.extent)},
      {"margin", format_double(s.margin)},
      {"trunk_height_min", format_double(s.trunk_height_min)},
      {"trunk_height_max", format_double(s.trunk_height_max)},
      {"trunk_radius_min", format_double(s.trunk_radius_min)},
      {"trunk_radius_max", format_double(s.trunk_radius_max)},
      {"crown_radius_min", format_double(s.crown_radius_min)},
      {"crown_radius_max", format_double(s.crown_radius_max)},
      {"crown_depth_min", format_double(s.crown_depth_min)},
      {"crown_depth_max", format_double(s.crown_depth_max)},
      {"crown_overlap", format_double(s.crown_overlap)},
      {"max_lean_deg", format_double(s.max_lean_deg)},
      {"trunk_density", format_double(s.trunk_density)},
      {"crown_density", format_double(s.crown_density)},
      {"ground_density", format_double(s.ground_density)},
      {"understory_tufts", std::to_string(s.understory_tufts)},
      {"understory_points", std::to_string(s.understory_points)},
      {"max_attempts", std::to_string(s.max_attempts)},
      {"seed", std::to_string(s.seed)},
  };
}

Forest generate_forest(const ForestSpec& spec) {
  spec.validate();
  Forest forest;
  auto& points = forest.cloud.points;
  auto& labels = forest.cloud.labels.emplace();
  const auto trunks = place_trunks(spec);

  {
    auto rng = keyed_rng(spec.seed, kGroundStream);
    const auto n = static_cast<std::size_t>(std::llround(spec.ground_density * spec.extent * spec.extent));
    std::uniform_real_distribution<double> u(0.0, spec.extent);
    for (std::size_t i = 0; i < n; ++i) {
      const double x = u(rng);
      const double y = u(rng);
      points.push_back({x, y, 0.0});
      labels.push_back(PointLabel::non_tree());
    }
  }

  const double step = 1.0 / std::sqrt(spec.trunk_density);
  for (std::size_t t = 0; t < trunks.size(); ++t) {
    auto rng = keyed_rng(spec.seed, t);
    TreeTruth tree;
    tree.id = static_cast<std::uint32_t>(t + 1);
    tree.x = trunks[t].first;
    tree.y = trunks[t].second;
    tree.height = uniform(rng, spec.trunk_height_min, spec.trunk_height_max);
    tree.trunk_radius = uniform(rng, spec.trunk_radius_min, spec.trunk_radius_max);
    tree.crown_radius = uniform(rng, spec.crown_radius_min, spec.crown_radius_max) * spec.crown_overlap;
    tree.crown_depth = uniform(rng, spec.crown_depth_min, spec.crown_depth_max);
    tree.lean_deg = uniform(rng, 0.0, spec.max_lean_deg);
    const double azimuth = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    const double slope = std::tan(tree.lean_deg * std::numbers::pi / 180.0);
    const double dx = slope * std::cos(azimuth), dy = slope * std::sin(azimuth);
    auto axis = [&](double z) { return Vec3{tree.x + z * dx, tree.y + z * dy, z}; };
    const PointLabel label = PointLabel::tree(tree.id);

    const auto rings = static_cast<std::size_t>(std::floor(tree.height / step));
    const auto per_ring = std::max<std::size_t>(
        3, static_cast<std::size_t>(std::ceil(2.0 * std::numbers::pi * tree.trunk_radius / step)));
    for (std::size_t k = 0; k <= rings; ++k) {
      const Vec3 c = axis(static_cast<double>(k) * step);
      const double phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
      for (std::size_t j = 0; j < per_ring; ++j) {
        const double a = phase + 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(per_ring);
        points.push_back({c.x + tree.trunk_radius * std::cos(a), c.y + tree.trunk_radius * std::sin(a), c.z});
        labels.push_back(label);
      }
    }

    const Vec3 centre = axis(tree.height);
    const auto n_crown = static_cast<std::size_t>(
        std::llround(spec.crown_density * spheroid_area(tree.crown_radius, tree.crown_depth)));
    std::normal_distribution<double> g(0.0, 1.0);
    for (std::size_t j = 0; j < n_crown; ++j) {
      Vec3 d{g(rng), g(rng), g(rng)};
      const double len = d.norm();
      if (len == 0.0) continue;
      points.push_back({centre.x + tree.crown_radius * d.x / len, centre.y + tree.crown_radius * d.y / len,
                        centre.z + tree.crown_depth * d.z / len});
      labels.push_back(label);
    }

    const Vec3 b = axis(3.0);
    forest.bases.emplace(tree.id, TreeBase{b.x, b.y, b.z});
    forest.trees.push_back(tree);
  }

  {
    auto rng = keyed_rng(spec.seed, kTuftStream);
    std::normal_distribution<double> g(0.0, 0.15);
    for (std::size_t t = 0; t < spec.understory_tufts; ++t) {
      const double cx = uniform(rng, 0.0, spec.extent);
      const double cy = uniform(rng, 0.0, spec.extent);
      for (std::size_t j = 0; j < spec.understory_points; ++j) {
        const double x = cx + g(rng);
        const double y = cy + g(rng);
        const double z = std::abs(g(rng)) * 3.0;
        points.push_back({x, y, z});
        labels.push_back(PointLabel::non_tree());
      }
    }
  }

  forest.offsets.assign(points.size(), Vec3{});
  for (Index i = 0; i < points.size(); ++i) {
    if (labels[i].is_tree()) forest.offsets[i] = forest.bases.at(labels[i].tree_id()).point() - points[i];
  }
  return forest;
}

std::pair<std::filesystem::path, std::filesystem::path> write_ground_truth(const Forest& forest,
                                                                           const std::filesystem::path& cloud_path) {
  auto stem = cloud_path;
  stem.replace_extension();
  const std::filesystem::path bases_path = stem.string() + ".bases.txt";
  const std::filesystem::path offsets_path = stem.string() + ".offsets.fprd";
  {
    std::ofstream out(bases_path, std::ios::binary);
    if (!out) throw DataError("cannot write " + bases_path.string());
    out << "# tree_id base_x base_y base_z\n";
    for (const auto& [id, b] : forest.bases) {
      out << id << ' ' << format_double(b.x) << ' ' << format_double(b.y) << ' ' << format_double(b.z) << '\n';
    }
    if (!out) throw DataError("cannot write " + bases_path.string());
  }
  PredictionField field;
  field.alignment = CloudAlignment::of(forest.cloud.points);
  field.p_tree.reserve(forest.cloud.size());
  for (const auto& l : *forest.cloud.labels) field.p_tree.push_back(l.is_tree() ? 1.0 : 0.0);
  field.offset = forest.offsets;
  save_predictions(field, offsets_path);
  return {bases_path, offsets_path};
}

}  // namespace treeseg
