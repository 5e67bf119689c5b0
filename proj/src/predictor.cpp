#include "treeseg/predictor.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "treeseg/bytes.hpp"
#include "treeseg/cloud_io.hpp"
#include "treeseg/random.hpp"

namespace treeseg {

TreeBase tree_base(std::span<const Point3> tree_points, std::span<const double> verticality,
                   const TreeBaseOptions& options) {
  if (tree_points.empty()) throw DataError("tree_base: empty tree");
  if (verticality.size() != tree_points.size()) {
    throw InvalidArgument("tree_base: verticality has " + std::to_string(verticality.size()) +
                          " values for " + std::to_string(tree_points.size()) + " points");
  }
  double lowest = tree_points[0].z;
  for (const auto& p : tree_points) lowest = std::min(lowest, p.z);
  const double lo = lowest + options.slice_low;
  const double hi = lowest + options.slice_high;

  auto mean_xy = [&](auto&& keep) -> std::optional<TreeBase> {
    double sx = 0.0, sy = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < tree_points.size(); ++i) {
      if (!keep(i)) continue;
      sx += tree_points[i].x;
      sy += tree_points[i].y;
      ++n;
    }
    if (n == 0) return std::nullopt;
    return TreeBase{sx / static_cast<double>(n), sy / static_cast<double>(n),
                    lowest + options.base_height};
  };
  auto in_slice = [&](std::size_t i) { return tree_points[i].z >= lo && tree_points[i].z <= hi; };

  if (auto b = mean_xy([&](std::size_t i) {
        return in_slice(i) && verticality[i] >= options.min_verticality;
      })) {
    return *b;
  }
  if (auto b = mean_xy(in_slice)) return *b;

  std::vector<std::size_t> order(tree_points.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return tree_points[a].z < tree_points[b].z; });
  const std::size_t decile = std::max<std::size_t>(1, (order.size() + 9) / 10);
  std::vector<std::uint8_t> low(tree_points.size(), 0);
  for (std::size_t k = 0; k < decile; ++k) low[order[k]] = 1;
  return *mean_xy([&](std::size_t i) { return low[i] == 1; });
}

std::map<std::uint32_t, TreeBase> compute_tree_bases(const PointCloud& cloud,
                                                     std::span<const double> verticality,
                                                     const TreeBaseOptions& options) {
  if (!cloud.labels) throw DataError("compute_tree_bases: cloud has no labels");
  if (verticality.size() != cloud.size()) {
    throw InvalidArgument("compute_tree_bases: verticality length mismatch");
  }
  std::map<std::uint32_t, std::vector<Index>> members;
  for (Index i = 0; i < cloud.size(); ++i) {
    const auto& l = (*cloud.labels)[i];
    if (l.is_tree()) members[l.tree_id()].push_back(i);
  }
  std::map<std::uint32_t, TreeBase> bases;
  std::vector<Point3> pts;
  std::vector<double> vert;
  for (const auto& [id, idx] : members) {
    pts.clear();
    vert.clear();
    for (Index i : idx) {
      pts.push_back(cloud.points[i]);
      vert.push_back(verticality[i]);
    }
    bases.emplace(id, tree_base(pts, vert, options));
  }
  return bases;
}

std::vector<Vec3> ground_truth_offsets(const PointCloud& cloud,
                                       const std::map<std::uint32_t, TreeBase>& bases) {
  if (!cloud.labels) throw DataError("ground_truth_offsets: cloud has no labels");
  std::vector<Vec3> out(cloud.size());
  for (Index i = 0; i < cloud.size(); ++i) {
    const auto& l = (*cloud.labels)[i];
    if (!l.is_tree()) continue;
    const auto it = bases.find(l.tree_id());
    if (it == bases.end()) {
      throw DataError("no tree base for treeID " + std::to_string(l.tree_id()));
    }
    out[i] = it->second.point() - cloud.points[i];
  }
  return out;
}

void OracleNoise::validate() const {
  if (!(offset_sigma >= 0.0) || !std::isfinite(offset_sigma)) {
    throw InvalidArgument("oracle noise: offset sigma must be >= 0");
  }
  if (!(offset_bound >= 0.0)) throw InvalidArgument("oracle noise: offset bound must be >= 0");
  if (!(label_flip_prob >= 0.0 && label_flip_prob <= 1.0)) {
    throw InvalidArgument("oracle noise: label flip probability must be in [0, 1]");
  }
}

std::vector<PointPrediction> oracle_predict(const TileView& tile, const PointCloud& labeled,
                                            const std::map<std::uint32_t, TreeBase>& bases,
                                            const OracleNoise& noise) {
  noise.validate();
  if (!labeled.labels) throw DataError("oracle predictor requires a labeled cloud");
  auto rng = keyed_rng(noise.seed, tile.spec.id);
  std::normal_distribution<double> gauss(0.0, noise.offset_sigma > 0 ? noise.offset_sigma : 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<PointPrediction> out;
  out.reserve(tile.inner_count());
  for (std::size_t k = 0; k < tile.point_indices.size(); ++k) {
    if (!tile.inner_mask[k]) continue;
    const Index i = tile.point_indices[k];
    const auto& label = (*labeled.labels)[i];
    PointPrediction pred;
    if (!label.is_annotated()) {
      pred.p_tree = 0.5;
      out.push_back(pred);
      continue;
    }
    if (label.is_tree()) {
      const auto it = bases.find(label.tree_id());
      if (it == bases.end()) {
        throw DataError("no tree base for treeID " + std::to_string(label.tree_id()));
      }
      pred.p_tree = 1.0;
      pred.offset = it->second.point() - labeled.points[i];
    }
    if (noise.offset_sigma > 0.0) {
      Vec3 e{gauss(rng), gauss(rng), gauss(rng)};
      if (noise.offset_bound > 0.0) {
        const double r = e.norm_xy();
        if (r > noise.offset_bound) {
          const double s = noise.offset_bound / r;
          e.x *= s;
          e.y *= s;
        }
      }
      pred.offset += e;
    }
    if (noise.label_flip_prob > 0.0 && unit(rng) < noise.label_flip_prob) {
      pred.p_tree = 1.0 - pred.p_tree;
    }
    out.push_back(pred);
  }
  return out;
}

// ---------------------------------------------------------------------------- files

namespace {

constexpr std::string_view kPredMagic = "FPRD";
constexpr std::uint16_t kPredVersion = 1;

}  // namespace

std::vector<std::uint8_t> encode_predictions(const PredictionField& field) {
  field.validate();
  ByteWriter w;
  w.write_bytes(kPredMagic);
  w.write<std::uint16_t>(kPredVersion);
  w.write<std::uint64_t>(field.alignment.count);
  w.write<std::uint64_t>(field.alignment.digest);
  for (std::size_t i = 0; i < field.size(); ++i) {
    w.write(static_cast<float>(field.p_tree[i]));
    w.write(static_cast<float>(field.offset[i].x));
    w.write(static_cast<float>(field.offset[i].y));
    w.write(static_cast<float>(field.offset[i].z));
  }
  return w.take();
}

PredictionField decode_predictions(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "prediction file");
  if (r.read_string(4, "magic") != kPredMagic) r.fail("bad magic, expected FPRD", 0);
  const auto version = r.read<std::uint16_t>("version");
  if (version != kPredVersion) r.fail("unsupported version " + std::to_string(version), 4);
  PredictionField field;
  field.alignment.count = r.read<std::uint64_t>("point count");
  field.alignment.digest = r.read<std::uint64_t>("digest");
  if (field.alignment.count > r.remaining() / 16) {
    r.fail("truncated records: header declares " + std::to_string(field.alignment.count) + " points",
           r.offset());
  }
  const auto n = static_cast<std::size_t>(field.alignment.count);
  field.p_tree.resize(n);
  field.offset.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t at = r.offset();
    const float p = r.read<float>();
    const float ox = r.read<float>();
    const float oy = r.read<float>();
    const float oz = r.read<float>();
    if (!(p >= 0.0f && p <= 1.0f)) {
      r.fail("probability " + std::to_string(p) + " out of [0, 1] at index " + std::to_string(i), at);
    }
    field.p_tree[i] = p;
    field.offset[i] = {ox, oy, oz};
    if (!field.offset[i].finite()) r.fail("non-finite offset at index " + std::to_string(i), at);
  }
  if (r.remaining() != 0) r.fail("trailing bytes after prediction records", r.offset());
  return field;
}

void save_predictions(const PredictionField& field, const std::filesystem::path& path) {
  write_file_bytes(path, encode_predictions(field));
}

PredictionField load_predictions(const std::filesystem::path& path, std::span<const Point3> points) {
  PredictionField field;
  try {
    field = decode_predictions(read_file_bytes(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what(), e.offset());
  }
  if (field.alignment != CloudAlignment::of(points)) {
    throw DataError("prediction/cloud misalignment: " + path.string());
  }
  field.validate();
  return field;
}

std::map<std::size_t, std::filesystem::path> read_prediction_manifest(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open prediction manifest '" + path.string() + "'");
  std::map<std::size_t, std::filesystem::path> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    std::size_t id = 0;
    std::string file;
    if (!(ss >> id)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      throw FormatError(path.string() + ": line " + std::to_string(line_no) + ": expected 'tile_id path'",
                        line_no);
    }
    if (!(ss >> file)) {
      throw FormatError(path.string() + ": line " + std::to_string(line_no) + ": missing path", line_no);
    }
    std::filesystem::path p(file);
    if (p.is_relative()) p = path.parent_path() / p;
    if (!out.emplace(id, p).second) {
      throw FormatError(path.string() + ": line " + std::to_string(line_no) + ": duplicate tile " +
                            std::to_string(id),
                        line_no);
    }
  }
  return out;
}

TilePrediction load_tile_prediction(const std::map<std::size_t, std::filesystem::path>& manifest,
                                    const TileView& tile, std::span<const Point3> points) {
  const auto it = manifest.find(tile.spec.id);
  if (it == manifest.end()) {
    throw DataError("prediction manifest has no entry for tile " + std::to_string(tile.spec.id));
  }
  const auto inner = tile.inner_indices();
  std::vector<Point3> inner_points;
  inner_points.reserve(inner.size());
  for (Index i : inner) inner_points.push_back(points[i]);
  PredictionField field;
  try {
    field = load_predictions(it->second, inner_points);
  } catch (const DataError& e) {
    throw DataError("tile " + std::to_string(tile.spec.id) + ": " + e.what());
  }
  std::vector<PointPrediction> preds(field.size());
  for (std::size_t k = 0; k < preds.size(); ++k) preds[k] = field.at(k);
  return TilePrediction{tile.spec.id, inner, std::move(preds)};
}

}  // namespace treeseg
