#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>

#include "treeseg/cloud_io.hpp"
#include "treeseg/features.hpp"
#include "treeseg/label_propagation.hpp"
#include "treeseg/metrics.hpp"
#include "treeseg/pipeline.hpp"
#include "treeseg/synthetic.hpp"

namespace fs = std::filesystem;
using namespace treeseg;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

void log(const std::string& msg) { std::cerr << "treeseg: " << msg << '\n'; }

std::uint64_t file_digest(const fs::path& path) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::uint8_t b : read_file_bytes(path)) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw DataError("cannot write " + path.string());
}

/// Files created by the current command; removed again if it fails.
struct Outputs {
  std::vector<fs::path> paths;
  fs::path add(fs::path p) {
    paths.push_back(p);
    return p;
  }
  void remove_all() {
    for (const auto& p : paths) {
      std::error_code ec;
      fs::remove(p, ec);
    }
  }
};

Outputs g_outputs;

fs::path manifest_path_for(const fs::path& output) { return fs::path(output.string() + ".manifest"); }

void write_manifest(const fs::path& path, const std::string& command, KeyValues kv,
                    const std::vector<StageTiming>& timings, unsigned workers) {
  kv["command"] = command;
  kv["workers"] = std::to_string(workers);
  for (const auto& t : timings) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", t.ms);
    kv["timing." + t.stage + "_ms"] = buf;
  }
  write_text(g_outputs.add(path), "# treeseg run manifest\n" + format_key_values(kv));
}

KeyValues describe_input(const std::string& key, const fs::path& path, const PointCloud& cloud) {
  return {{key, path.string()},
          {key + "_points", std::to_string(cloud.size())},
          {key + "_digest", hex(coordinate_digest(cloud.points))}};
}

void describe_output(KeyValues& kv, const fs::path& path) {
  kv["output"] = path.string();
  kv["output_digest"] = hex(file_digest(path));
}

void write_output_cloud(const PointCloud& cloud, const fs::path& path, const std::string& format) {
  g_outputs.add(path);
  if (format.empty()) {
    write_cloud(cloud, path);
  } else {
    write_cloud(cloud, path, parse_format(format));
  }
}

// Pipeline flags bound to a scratch copy; only flags actually given override the config file.
struct PipelineFlags {
  PipelineParams scratch;
  std::string config;
  std::string predictor;
  std::vector<std::pair<CLI::Option*, std::function<void(PipelineParams&)>>> bound;

  template <typename T>
  void bind(CLI::App* app, const std::string& name, T PipelineParams::*member, const std::string& help) {
    bound.emplace_back(app->add_option(name, scratch.*member, help),
                       [this, member](PipelineParams& p) { p.*member = scratch.*member; });
  }

  template <typename Getter>
  void bind_nested(CLI::App* app, const std::string& name, Getter get, const std::string& help) {
    bound.emplace_back(app->add_option(name, get(scratch), help),
                       [this, get](PipelineParams& p) { get(p) = get(scratch); });
  }

  void add_to(CLI::App* app) {
    app->add_option("--config", config, "key=value configuration file (a previous run manifest works)");
    bind(app, "--voxel", &PipelineParams::voxel_size, "voxel edge for subsampling (m)");
    bind_nested(app, "--tile-edge", [](PipelineParams& p) -> double& { return p.tiling.outer_edge; }, "tile edge (m)");
    bind_nested(app, "--inner-edge", [](PipelineParams& p) -> double& { return p.tiling.inner_edge; }, "inner square edge (m)");
    bind_nested(app, "--stride", [](PipelineParams& p) -> double& { return p.tiling.stride; }, "tile stride (m)");
    bind(app, "--verticality-radius", &PipelineParams::verticality_radius, "neighborhood radius for verticality (m)");
    bind_nested(app, "--min-verticality", [](PipelineParams& p) -> double& { return p.cluster.min_verticality; },
                "verticality threshold for clustering");
    bind_nested(app, "--max-offset-z", [](PipelineParams& p) -> double& { return p.cluster.max_offset_z; },
                "largest |o_z| for clustering (m)");
    bind_nested(app, "--grouping-radius", [](PipelineParams& p) -> double& { return p.cluster.grouping_radius; },
                "single-linkage radius (m)");
    bind_nested(app, "--min-points", [](PipelineParams& p) -> std::size_t& { return p.cluster.min_points; },
                "smallest cluster kept");
    bind(app, "--k", &PipelineParams::k, "neighbors voting in assignment");
    bind(app, "--assign-3d", &PipelineParams::assign_3d, "vote in xyz instead of xy");
    app->add_option("--predictor", predictor, "oracle | files")->check(CLI::IsMember({"oracle", "files"}));
    bind_nested(app, "--predictions", [](PipelineParams& p) -> fs::path& { return p.prediction_manifest; },
                "tile prediction manifest for the files predictor");
    bind_nested(app, "--noise-sigma", [](PipelineParams& p) -> double& { return p.noise.offset_sigma; },
                "oracle offset noise (m)");
    bind_nested(app, "--noise-bound", [](PipelineParams& p) -> double& { return p.noise.offset_bound; },
                "clamp on the xy offset noise (m)");
    bind_nested(app, "--flip-prob", [](PipelineParams& p) -> double& { return p.noise.label_flip_prob; },
                "oracle semantic flip probability");
    bind_nested(app, "--seed", [](PipelineParams& p) -> std::uint64_t& { return p.noise.seed; }, "oracle noise seed");
    bind(app, "--workers", &PipelineParams::workers, "worker threads");
  }

  PipelineParams resolve() const {
    PipelineParams p;
    if (!config.empty()) apply_key_values(read_key_values(config), p);
    for (const auto& [opt, copy] : bound) {
      if (opt->count() > 0) copy(p);
    }
    if (!predictor.empty()) p.predictor = predictor == "files" ? PredictorKind::Files : PredictorKind::Oracle;
    if (p.predictor == PredictorKind::Files && !p.prediction_manifest.empty() && config.empty()) {
      p.prediction_manifest = fs::absolute(p.prediction_manifest);
    }
    p.validate();
    return p;
  }
};

// ---------------------------------------------------------------------------- commands

struct RunArgs {
  std::string input, output, format, manifest;
  PipelineFlags flags;
};

void cmd_run(const RunArgs& a) {
  const PipelineParams params = a.flags.resolve();
  const PointCloud input = read_cloud(a.input);
  log("run: " + std::to_string(input.size()) + " points from " + a.input);
  const PipelineResult result = run_pipeline(input, params);
  const PointCloud out = labeled_output(input, result.instances);
  std::vector<StageTiming> timings = result.timings;
  write_output_cloud(out, a.output, a.format);

  KeyValues kv = to_key_values(params);
  kv.merge(describe_input("input", a.input, input));
  describe_output(kv, a.output);
  kv["subsampled_points"] = std::to_string(result.prepared.sub.cloud.size());
  kv["tiles"] = std::to_string(result.prepared.tile_count);
  kv["raw_components"] = std::to_string(result.segmentation.clusters.raw_components);
  kv["instances"] = std::to_string(result.instances.instance_ids().size());
  write_manifest(a.manifest.empty() ? manifest_path_for(a.output) : fs::path(a.manifest), "run", kv, timings,
                 params.workers);
  log("run: " + kv["instances"] + " instances written to " + a.output);
}

struct EvalArgs {
  std::string gt, pred, output, partitions;
  double voxel = 0.1;
  unsigned workers = 1;
};

void cmd_evaluate(const EvalArgs& a) {
  const PointCloud gt = read_cloud(a.gt);
  const PointCloud pred = read_cloud(a.pred);
  const EvalReport report = evaluate(gt, pred, EvalOptions{a.voxel, 0.5, a.workers});
  for (const auto* part : {&report.horizontal, &report.vertical}) {
    for (std::uint32_t id : part->skipped) {
      log("warning: tree " + std::to_string(id) + " has zero extent and is left out of the " +
          (part->axis == PartitionAxis::Horizontal ? "horizontal" : "vertical") + " partition");
    }
  }
  const std::string csv = format_eval_csv(report);
  const std::string table = format_eval_table(report);
  if (a.output.empty()) {
    std::cout << csv << '\n' << table;
  } else {
    write_text(g_outputs.add(a.output), csv);
    std::cout << table;
  }
  if (!a.partitions.empty()) {
    write_text(g_outputs.add(a.partitions + ".horizontal.csv"), format_partition_csv(report.horizontal));
    write_text(g_outputs.add(a.partitions + ".vertical.csv"), format_partition_csv(report.vertical));
  }
  if (!a.output.empty()) {
    KeyValues kv = describe_input("ground_truth", a.gt, gt);
    kv.merge(describe_input("prediction", a.pred, pred));
    kv["voxel_size"] = format_double(a.voxel);
    describe_output(kv, a.output);
    write_manifest(manifest_path_for(a.output), "evaluate", kv, {}, a.workers);
  }
}

struct SweepArgs {
  std::string input, output, radii;
  PipelineFlags flags;
};

void cmd_sweep(const SweepArgs& a) {
  const PipelineParams params = a.flags.resolve();
  const std::vector<double> radii = parse_radii(a.radii);
  const PointCloud input = read_cloud(a.input);
  const PreparedCloud prepared = prepare_cloud(input, params);
  const auto rows = sweep_grouping_radius(prepared, params, radii);
  const std::string csv = format_sweep_csv(rows);
  if (a.output.empty()) {
    std::cout << csv;
    return;
  }
  write_text(g_outputs.add(a.output), csv);
  KeyValues kv = to_key_values(params);
  kv.erase("grouping_radius");
  kv["radii"] = a.radii;
  kv.merge(describe_input("input", a.input, input));
  describe_output(kv, a.output);
  write_manifest(manifest_path_for(a.output), "sweep", kv, prepared.timings, params.workers);
}

struct PropagateArgs {
  std::string labeled, full, output, format;
  PropagationOptions options;
};

void cmd_propagate(const PropagateArgs& a) {
  const PointCloud labeled = read_cloud(a.labeled);
  const PointCloud full = read_cloud(a.full);
  PropagationSummary summary;
  const PointCloud out = propagate_labels(labeled, full, a.options, &summary);
  write_output_cloud(out, a.output, a.format);
  KeyValues kv = describe_input("labeled", a.labeled, labeled);
  kv.merge(describe_input("full", a.full, full));
  kv["label_radius"] = format_double(a.options.label_radius);
  kv["link_radius"] = format_double(a.options.link_radius);
  kv["tree"] = std::to_string(summary.tree);
  kv["non_tree"] = std::to_string(summary.non_tree);
  kv["non_annotated"] = std::to_string(summary.non_annotated);
  describe_output(kv, a.output);
  write_manifest(manifest_path_for(a.output), "propagate", kv, {}, a.options.workers);
  std::cerr << "tree=" << summary.tree << " non_tree=" << summary.non_tree
            << " non_annotated=" << summary.non_annotated << '\n';
}

struct SynthArgs {
  std::string output, config, format, layout;
  std::optional<std::size_t> trees;
  std::optional<std::uint64_t> seed;
  std::optional<double> spacing;
};

void cmd_synth(const SynthArgs& a) {
  ForestSpec spec;
  if (!a.config.empty()) spec = forest_spec_from(read_key_values(a.config));
  KeyValues overrides;
  if (a.trees) overrides["n_trees"] = std::to_string(*a.trees);
  if (a.seed) overrides["seed"] = std::to_string(*a.seed);
  if (a.spacing) overrides["min_trunk_spacing"] = format_double(*a.spacing);
  if (!a.layout.empty()) overrides["layout"] = a.layout;
  spec = forest_spec_from(overrides, spec);
  const Forest forest = generate_forest(spec);
  write_output_cloud(forest.cloud, a.output, a.format);
  const auto [bases, offsets] = write_ground_truth(forest, a.output);
  g_outputs.add(bases);
  g_outputs.add(offsets);
  KeyValues kv = to_key_values(spec);
  kv["points"] = std::to_string(forest.cloud.size());
  kv["bases"] = bases.string();
  kv["offsets"] = offsets.string();
  describe_output(kv, a.output);
  write_manifest(manifest_path_for(a.output), "synth", kv, {}, 1);
  log("synth: " + std::to_string(forest.trees.size()) + " trees, " + std::to_string(forest.cloud.size()) +
      " points");
}

struct AttrsArgs {
  std::string input, output, hull = "alpha";
  double alpha = 1.0;
};

void cmd_attrs(const AttrsArgs& a) {
  const PointCloud cloud = read_cloud(a.input);
  if (!cloud.labels) throw DataError(a.input + ": no labels");
  std::map<std::uint32_t, std::vector<Point3>> trees;
  for (Index i = 0; i < cloud.size(); ++i) {
    const auto& l = (*cloud.labels)[i];
    if (l.is_tree()) trees[l.tree_id()].push_back(cloud.points[i]);
  }
  AttributeOptions opts{a.hull == "convex" ? HullKind::Convex : HullKind::Alpha, a.alpha};
  std::string csv = "tree_id,points,height,crown_diameter,canopy_cover\n";
  for (const auto& [id, pts] : trees) {
    const TreeAttributes t = tree_attributes(pts, opts);
    csv += std::to_string(id) + "," + std::to_string(pts.size()) + "," + format_double(t.height) + "," +
           format_double(t.crown_diameter) + "," + format_double(t.canopy_cover) + "\n";
  }
  if (a.output.empty()) {
    std::cout << csv;
    return;
  }
  write_text(g_outputs.add(a.output), csv);
  KeyValues kv = describe_input("input", a.input, cloud);
  kv["hull"] = a.hull;
  kv["alpha"] = format_double(a.alpha);
  describe_output(kv, a.output);
  write_manifest(manifest_path_for(a.output), "attrs", kv, {}, 1);
}

struct SubsampleArgs {
  std::string input, output, format, map;
  double voxel = 0.1;
};

void cmd_subsample(const SubsampleArgs& a) {
  const PointCloud cloud = read_cloud(a.input);
  const SubsampleResult sub = voxel_subsample(cloud, a.voxel);
  write_output_cloud(sub.cloud, a.output, a.format);
  if (!a.map.empty()) {
    std::string text = "# original_index subsampled_index\n";
    for (Index i = 0; i < sub.map.original_size(); ++i) {
      text += std::to_string(i) + " " + std::to_string(sub.map.representative_of[i]) + "\n";
    }
    write_text(g_outputs.add(a.map), text);
  }
  KeyValues kv = describe_input("input", a.input, cloud);
  kv["voxel_size"] = format_double(a.voxel);
  kv["subsampled_points"] = std::to_string(sub.cloud.size());
  describe_output(kv, a.output);
  write_manifest(manifest_path_for(a.output), "subsample", kv, {}, 1);
}

struct TilesArgs {
  std::string input, dir;
  bool oracle = false;
  PipelineFlags flags;
};

void cmd_tiles(const TilesArgs& a) {
  const PipelineParams params = a.flags.resolve();
  const PointCloud input = read_cloud(a.input);
  const SubsampleResult sub = voxel_subsample(input, params.voxel_size);
  const auto& points = sub.cloud.points;
  const auto specs = generate_tiles(points, params.tiling);
  std::map<std::uint32_t, TreeBase> bases;
  if (a.oracle) {
    if (!sub.cloud.labels) throw DataError("--oracle needs a labeled cloud");
    bases = compute_tree_bases(sub.cloud, verticality(points, {params.verticality_radius, params.workers}));
  }
  fs::create_directories(a.dir);
  std::vector<TileView> views;
  std::string pred_manifest;
  for (const auto& spec : specs) {
    TileView view = crop_tile(points, spec);
    PointCloud tile = sub.cloud.subset(view.point_indices);
    auto& inner = tile.attributes["inner"];
    inner.assign(view.inner_mask.begin(), view.inner_mask.end());
    const std::string name = "tile_" + std::to_string(spec.id);
    write_output_cloud(tile, fs::path(a.dir) / (name + ".bin"), "binary");
    if (a.oracle) {
      const auto inner_idx = view.inner_indices();
      PredictionField f;
      std::vector<Point3> inner_points;
      for (Index i : inner_idx) inner_points.push_back(points[i]);
      f.alignment = CloudAlignment::of(inner_points);
      for (const auto& p : oracle_predict(view, sub.cloud, bases, params.noise)) {
        f.p_tree.push_back(p.p_tree);
        f.offset.push_back(p.offset);
      }
      const fs::path pred = fs::path(a.dir) / (name + ".fprd");
      g_outputs.add(pred);
      save_predictions(f, pred);
      pred_manifest += std::to_string(spec.id) + " " + name + ".fprd\n";
    }
    view.point_indices.shrink_to_fit();
    views.push_back(std::move(view));
  }
  write_text(g_outputs.add(fs::path(a.dir) / "tiles.txt"), format_tile_manifest(views));
  if (a.oracle) write_text(g_outputs.add(fs::path(a.dir) / "predictions.txt"), pred_manifest);
  KeyValues kv = to_key_values(params);
  kv.merge(describe_input("input", a.input, input));
  kv["tiles"] = std::to_string(specs.size());
  write_manifest(fs::path(a.dir) / "tiles.manifest", "tiles", kv, {}, params.workers);
  log("tiles: " + std::to_string(specs.size()) + " tiles written to " + a.dir);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tree instance segmentation for forest point clouds"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "segment a cloud into tree instances");
  run_cmd->add_option("input", run.input, "input cloud")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("-o,--output", run.output, "labeled output cloud")->required();
  run_cmd->add_option("--format", run.format, "output format: text | binary | las");
  run_cmd->add_option("--manifest", run.manifest, "manifest path (default: <output>.manifest)");
  run.flags.add_to(run_cmd);

  EvalArgs ev;
  auto* ev_cmd = app.add_subcommand("evaluate", "score a labeled prediction against ground truth");
  ev_cmd->add_option("ground_truth", ev.gt, "ground-truth cloud")->required()->check(CLI::ExistingFile);
  ev_cmd->add_option("prediction", ev.pred, "predicted cloud")->required()->check(CLI::ExistingFile);
  ev_cmd->add_option("-o,--output", ev.output, "CSV output (default: stdout)");
  ev_cmd->add_option("--partitions", ev.partitions, "prefix for per-bin partition CSVs");
  ev_cmd->add_option("--voxel", ev.voxel, "evaluation voxel size (m)");
  ev_cmd->add_option("--workers", ev.workers, "worker threads")->check(CLI::PositiveNumber);

  SweepArgs sw;
  auto* sw_cmd = app.add_subcommand("sweep", "detection errors over a range of grouping radii");
  sw_cmd->add_option("input", sw.input, "labeled input cloud")->required()->check(CLI::ExistingFile);
  sw_cmd->add_option("--radii", sw.radii, "start:stop:count or a comma list")->required();
  sw_cmd->add_option("-o,--output", sw.output, "CSV output (default: stdout)");
  sw.flags.add_to(sw_cmd);

  PropagateArgs pr;
  auto* pr_cmd = app.add_subcommand("propagate", "label a full plot from per-tree labeled points");
  pr_cmd->add_option("labeled", pr.labeled, "cloud with tree labels")->required()->check(CLI::ExistingFile);
  pr_cmd->add_option("full", pr.full, "unlabeled full cloud")->required()->check(CLI::ExistingFile);
  pr_cmd->add_option("-o,--output", pr.output, "labeled output cloud")->required();
  pr_cmd->add_option("--format", pr.format, "output format: text | binary | las");
  pr_cmd->add_option("--radius", pr.options.label_radius, "label vote radius (m)");
  pr_cmd->add_option("--link-radius", pr.options.link_radius, "non-tree linking radius (m)");
  pr_cmd->add_option("--workers", pr.options.workers, "worker threads")->check(CLI::PositiveNumber);

  SynthArgs sy;
  auto* sy_cmd = app.add_subcommand("synth", "generate a synthetic forest with ground truth");
  sy_cmd->add_option("-o,--output", sy.output, "output cloud")->required();
  sy_cmd->add_option("--config", sy.config, "key=value forest description");
  sy_cmd->add_option("--format", sy.format, "output format: text | binary | las");
  sy_cmd->add_option("--trees", sy.trees, "number of trees");
  sy_cmd->add_option("--seed", sy.seed, "random seed");
  sy_cmd->add_option("--spacing", sy.spacing, "minimum trunk spacing (m)");
  sy_cmd->add_option("--layout", sy.layout, "random | grid")->check(CLI::IsMember({"random", "grid"}));

  AttrsArgs at;
  auto* at_cmd = app.add_subcommand("attrs", "per-tree height, crown diameter and canopy cover");
  at_cmd->add_option("input", at.input, "labeled cloud")->required()->check(CLI::ExistingFile);
  at_cmd->add_option("-o,--output", at.output, "CSV output (default: stdout)");
  at_cmd->add_option("--hull", at.hull, "alpha | convex")->check(CLI::IsMember({"alpha", "convex"}));
  at_cmd->add_option("--alpha", at.alpha, "alpha-shape radius (m)")->check(CLI::PositiveNumber);

  SubsampleArgs ss;
  auto* ss_cmd = app.add_subcommand("subsample", "voxel-subsample a cloud");
  ss_cmd->add_option("input", ss.input, "input cloud")->required()->check(CLI::ExistingFile);
  ss_cmd->add_option("-o,--output", ss.output, "output cloud")->required();
  ss_cmd->add_option("--format", ss.format, "output format: text | binary | las");
  ss_cmd->add_option("--voxel", ss.voxel, "voxel edge (m)")->check(CLI::PositiveNumber);
  ss_cmd->add_option("--map", ss.map, "write the original -> subsampled index map here");

  TilesArgs tl;
  auto* tl_cmd = app.add_subcommand("tiles", "export the tiles of a subsampled cloud for an external predictor");
  tl_cmd->add_option("input", tl.input, "input cloud")->required()->check(CLI::ExistingFile);
  tl_cmd->add_option("-o,--output", tl.dir, "output directory")->required();
  tl_cmd->add_flag("--oracle", tl.oracle, "also write oracle predictions and a prediction manifest");
  tl.flags.add_to(tl_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*run_cmd) cmd_run(run);
    if (*ev_cmd) cmd_evaluate(ev);
    if (*sw_cmd) cmd_sweep(sw);
    if (*pr_cmd) cmd_propagate(pr);
    if (*sy_cmd) cmd_synth(sy);
    if (*at_cmd) cmd_attrs(at);
    if (*ss_cmd) cmd_subsample(ss);
    if (*tl_cmd) cmd_tiles(tl);
  } catch (const InvalidArgument& e) {
    g_outputs.remove_all();
    log(std::string("error: ") + e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    g_outputs.remove_all();
    log(std::string("error: ") + e.what());
    return kExitData;
  }
  return 0;
}
