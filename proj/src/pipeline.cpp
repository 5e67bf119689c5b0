#include "treeseg/pipeline.hpp"

#include <chrono>
#include <cmath>

#include "treeseg/features.hpp"
#include "treeseg/parallel.hpp"

namespace treeseg {
namespace {

template <typename Fn>
auto run_stage(const char* name, std::vector<StageTiming>& timings, Fn&& fn) {
  const auto start = std::chrono::steady_clock::now();
  auto record = [&] {
    const std::chrono::duration<double, std::milli> d = std::chrono::steady_clock::now() - start;
    timings.push_back({name, d.count()});
  };
  try {
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      record();
    } else {
      auto out = fn();
      record();
      return out;
    }
  } catch (const FormatError& e) {
    throw FormatError(std::string(name) + ": " + e.what(), e.offset());
  } catch (const DataError& e) {
    throw DataError(std::string(name) + ": " + e.what());
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(std::string(name) + ": " + e.what());
  }
}

std::string predictor_name(PredictorKind k) { return k == PredictorKind::Oracle ? "oracle" : "files"; }

}  // namespace

void PipelineParams::validate() const {
  if (!(voxel_size > 0.0)) throw InvalidArgument("voxel size must be positive");
  tiling.validate();
  if (!(verticality_radius > 0.0)) throw InvalidArgument("verticality radius must be positive");
  cluster.validate();
  if (k == 0) throw InvalidArgument("k must be at least 1");
  noise.validate();
  if (predictor == PredictorKind::Files && prediction_manifest.empty()) {
    throw InvalidArgument("the files predictor needs a prediction manifest");
  }
  if (workers == 0) throw InvalidArgument("workers must be at least 1");
}

void apply_key_values(const KeyValues& kv, PipelineParams& p) {
  read_value(kv, "voxel_size", p.voxel_size);
  read_value(kv, "tile_edge", p.tiling.outer_edge);
  read_value(kv, "inner_edge", p.tiling.inner_edge);
  read_value(kv, "stride", p.tiling.stride);
  read_value(kv, "verticality_radius", p.verticality_radius);
  read_value(kv, "min_verticality", p.cluster.min_verticality);
  read_value(kv, "max_offset_z", p.cluster.max_offset_z);
  read_value(kv, "grouping_radius", p.cluster.grouping_radius);
  read_value(kv, "min_points", p.cluster.min_points);
  read_value(kv, "k", p.k);
  read_value(kv, "assign_3d", p.assign_3d);
  std::string predictor = predictor_name(p.predictor);
  read_value(kv, "predictor", predictor);
  if (predictor == "oracle") {
    p.predictor = PredictorKind::Oracle;
  } else if (predictor == "files") {
    p.predictor = PredictorKind::Files;
  } else {
    throw InvalidArgument("invalid value for 'predictor': '" + predictor + "'");
  }
  std::string manifest = p.prediction_manifest.string();
  read_value(kv, "prediction_manifest", manifest);
  p.prediction_manifest = manifest;
  read_value(kv, "noise_sigma", p.noise.offset_sigma);
  read_value(kv, "noise_bound", p.noise.offset_bound);
  read_value(kv, "flip_prob", p.noise.label_flip_prob);
  read_value(kv, "seed", p.noise.seed);
}

KeyValues to_key_values(const PipelineParams& p) {
  KeyValues kv{
      {"voxel_size", format_double(p.voxel_size)},
      {"tile_edge", format_double(p.tiling.outer_edge)},
      {"inner_edge", format_double(p.tiling.inner_edge)},
      {"stride", format_double(p.tiling.stride)},
      {"verticality_radius", format_double(p.verticality_radius)},
      {"min_verticality", format_double(p.cluster.min_verticality)},
      {"max_offset_z", format_double(p.cluster.max_offset_z)},
      {"grouping_radius", format_double(p.cluster.grouping_radius)},
      {"min_points", std::to_string(p.cluster.min_points)},
      {"k", std::to_string(p.k)},
      {"assign_3d", p.assign_3d ? "true" : "false"},
      {"predictor", predictor_name(p.predictor)},
      {"noise_sigma", format_double(p.noise.offset_sigma)},
      {"noise_bound", format_double(p.noise.offset_bound)},
      {"flip_prob", format_double(p.noise.label_flip_prob)},
      {"seed", std::to_string(p.noise.seed)},
  };
  if (p.predictor == PredictorKind::Files) kv["prediction_manifest"] = p.prediction_manifest.string();
  return kv;
}

PreparedCloud prepare_cloud(const PointCloud& input, const PipelineParams& params) {
  params.validate();
  PreparedCloud out;
  auto& timings = out.timings;
  run_stage("input", timings, [&] {
    input.validate();
    if (input.empty()) throw DataError("input cloud is empty");
    if (params.predictor == PredictorKind::Oracle && !input.labels) {
      throw DataError("the oracle predictor needs a labeled cloud");
    }
  });
  out.sub = run_stage("subsample", timings, [&] { return voxel_subsample(input, params.voxel_size); });
  const auto& points = out.sub.cloud.points;
  out.verticality = run_stage("verticality", timings, [&] {
    return verticality(points, VerticalityOptions{params.verticality_radius, params.workers});
  });
  const auto tiles = run_stage("tile", timings, [&] { return generate_tiles(points, params.tiling); });
  out.tile_count = tiles.size();

  out.field = run_stage("predict", timings, [&] {
    std::map<std::uint32_t, TreeBase> bases;
    std::map<std::size_t, std::filesystem::path> manifest;
    if (params.predictor == PredictorKind::Oracle) {
      bases = compute_tree_bases(out.sub.cloud, out.verticality);
    } else {
      manifest = read_prediction_manifest(params.prediction_manifest);
    }
    PredictionMerger merger(points);
    // Tiles are predicted in parallel batches and merged in id order.
    const std::size_t batch = std::max<std::size_t>(1, params.workers);
    std::vector<TilePrediction> done(batch);
    for (std::size_t first = 0; first < tiles.size(); first += batch) {
      const std::size_t n = std::min(batch, tiles.size() - first);
      parallel_for(n, params.workers, [&](std::size_t b, std::size_t e) {
        for (std::size_t t = b; t < e; ++t) {
          const TileView view = crop_tile(points, tiles[first + t]);
          if (params.predictor == PredictorKind::Oracle) {
            done[t] = make_tile_prediction(view, oracle_predict(view, out.sub.cloud, bases, params.noise));
          } else {
            done[t] = load_tile_prediction(manifest, view, points);
          }
        }
      });
      for (std::size_t t = 0; t < n; ++t) merger.add(done[t]);
    }
    return std::move(merger).finish();
  });
  out.projected = run_stage("project", timings, [&] { return project(points, out.field); });
  return out;
}

Segmentation segment(const PreparedCloud& prepared, const PipelineParams& params) {
  Segmentation seg;
  seg.selected = select_cluster_points(prepared.field, prepared.verticality, params.cluster);
  std::vector<Point3> selected_points;
  selected_points.reserve(seg.selected.size());
  for (Index i : seg.selected) selected_points.push_back(prepared.projected[i]);
  seg.clusters = connected_components(selected_points, params.cluster, params.workers);
  std::vector<std::uint32_t> cluster_of(prepared.projected.size(), 0);
  for (std::size_t s = 0; s < seg.selected.size(); ++s) cluster_of[seg.selected[s]] = seg.clusters.cluster_id[s];
  seg.instances = assign_remaining(prepared.projected, cluster_of, prepared.field.p_tree,
                                   AssignOptions{params.k, params.assign_3d, params.workers});
  return seg;
}

PipelineResult run_pipeline(const PointCloud& input, const PipelineParams& params) {
  PipelineResult result;
  result.prepared = prepare_cloud(input, params);
  result.timings = result.prepared.timings;
  result.segmentation = run_stage("cluster", result.timings, [&] { return segment(result.prepared, params); });
  result.instances = run_stage("finalize", result.timings, [&] {
    return finalize(result.segmentation.instances, result.prepared.sub.map);
  });
  return result;
}

PointCloud labeled_output(const PointCloud& input, const InstanceMap& instances) {
  if (instances.size() != input.size()) throw InvalidArgument("labeled_output: size mismatch");
  PointCloud out = input;
  out.labels = instances.labels;
  return out;
}

std::vector<SweepRow> sweep_grouping_radius(const PreparedCloud& prepared, const PipelineParams& params,
                                            std::span<const double> radii) {
  if (radii.empty()) throw InvalidArgument("sweep: no radii given");
  const auto& truth = prepared.sub.cloud.labels;
  std::vector<SweepRow> rows;
  for (double r : radii) {
    PipelineParams p = params;
    p.cluster.grouping_radius = r;
    SweepRow row;
    row.radius = r;
    const Segmentation seg = segment(prepared, p);
    row.raw_components = seg.clusters.raw_components;
    row.clusters = seg.clusters.clusters.size();
    if (truth) {
      const auto det = detection_metrics(*truth, seg.instances.labels);
      row.omission = det.omission;
      row.commission = det.commission;
    }
    rows.push_back(row);
  }
  return rows;
}

std::vector<double> parse_radii(const std::string& text) {
  auto number = [&](std::string s) {
    s.erase(0, s.find_first_not_of(" \t"));
    s.erase(s.find_last_not_of(" \t") + 1);
    KeyValues kv{{"radius", s}};
    double v = 0.0;
    read_value(kv, "radius", v);
    return v;
  };
  std::vector<double> out;
  const auto c1 = text.find(':');
  if (c1 != std::string::npos) {
    const auto c2 = text.find(':', c1 + 1);
    if (c2 == std::string::npos) throw InvalidArgument("radii: expected start:stop:count");
    const double a = number(text.substr(0, c1));
    const double b = number(text.substr(c1 + 1, c2 - c1 - 1));
    KeyValues kv{{"count", text.substr(c2 + 1)}};
    std::size_t n = 0;
    read_value(kv, "count", n);
    if (n == 0) throw InvalidArgument("radii: count must be at least 1");
    for (std::size_t i = 0; i < n; ++i) {
      out.push_back(n == 1 ? a : a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
    }
  } else {
    std::size_t start = 0;
    while (start <= text.size()) {
      const auto comma = text.find(',', start);
      out.push_back(number(text.substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
  }
  for (double r : out) {
    if (!(r > 0.0) || !std::isfinite(r)) throw InvalidArgument("radii must be positive");
  }
  return out;
}

std::string format_sweep_csv(std::span<const SweepRow> rows) {
  const bool errors = !rows.empty() && rows.front().omission.has_value();
  std::string out = errors ? "radius,raw_components,clusters,omission,commission\n" : "radius,raw_components,clusters\n";
  for (const auto& r : rows) {
    out += format_double(r.radius) + "," + std::to_string(r.raw_components) + "," + std::to_string(r.clusters);
    if (errors) out += "," + format_double(*r.omission) + "," + format_double(*r.commission);
    out += "\n";
  }
  return out;
}

}  // namespace treeseg
