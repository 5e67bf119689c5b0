#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <vector>

#include "treeseg/cloud.hpp"
#include "treeseg/config.hpp"
#include "treeseg/predictor.hpp"

namespace treeseg {

enum class ForestLayout { Random, Grid };

/// Parameters of a generated plot. Lengths in metres, densities in points per m² of surface.
struct ForestSpec {
  std::size_t n_trees = 50;
  double min_trunk_spacing = 2.0;
  ForestLayout layout = ForestLayout::Random;
  /// Ground is the square [0, extent)²; trunks stay `margin` inside it.
  double extent = 60.0;
  double margin = 1.0;
  double trunk_height_min = 12.0, trunk_height_max = 18.0;
  double trunk_radius_min = 0.15, trunk_radius_max = 0.30;
  /// Horizontal and vertical crown semi-axes. The crown is centred on the trunk top.
  double crown_radius_min = 2.5, crown_radius_max = 4.5;
  double crown_depth_min = 3.0, crown_depth_max = 5.0;
  /// Multiplies the horizontal crown semi-axes.
  double crown_overlap = 1.0;
  double max_lean_deg = 0.0;
  double trunk_density = 400.0;
  double crown_density = 150.0;
  double ground_density = 100.0;
  std::size_t understory_tufts = 20;
  std::size_t understory_points = 150;
  std::size_t max_attempts = 100000;
  std::uint64_t seed = 1;

  void validate() const;
};

ForestSpec forest_spec_from(const KeyValues& kv, ForestSpec base = {});
KeyValues to_key_values(const ForestSpec& spec);

struct TreeTruth {
  std::uint32_t id = 0;
  double x = 0.0, y = 0.0;  // trunk position at the ground
  double height = 0.0;      // trunk height
  double trunk_radius = 0.0;
  double crown_radius = 0.0;
  double crown_depth = 0.0;
  double lean_deg = 0.0;
};

struct Forest {
  PointCloud cloud;
  std::vector<TreeTruth> trees;
  std::map<std::uint32_t, TreeBase> bases;
  /// base - p for tree points, zero elsewhere.
  std::vector<Vec3> offsets;
};

/// Trunks are stacks of horizontal point rings from z = 0, crowns ellipsoid shells, the ground
/// a plane at z = 0, tufts small blobs on the ground labeled non-tree. Tree ids are 1..n_trees.
/// Bit-identical for equal specs. Throws DataError when the spacing cannot be met.
Forest generate_forest(const ForestSpec& spec);

/// Writes `<stem>.bases.txt` ("id x y z" per tree) and `<stem>.offsets.fprd` (p_tree 1 on tree
/// points, ground-truth offsets) next to `cloud_path`. Returns both paths.
std::pair<std::filesystem::path, std::filesystem::path> write_ground_truth(const Forest& forest,
                                                                           const std::filesystem::path& cloud_path);

}  // namespace treeseg
