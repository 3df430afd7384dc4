// SPDX-License-Identifier: Apache-2.0
// treegraph: voxel-graph pipeline for orchard LiDAR scans. Every pipeline
// stage is a subcommand; `analyze` chains them end to end.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "treegraph/classify.hpp"
#include "treegraph/eval.hpp"
#include "treegraph/features.hpp"
#include "treegraph/graph.hpp"
#include "treegraph/io.hpp"
#include "treegraph/pipeline.hpp"
#include "treegraph/preprocess.hpp"
#include "treegraph/segment.hpp"
#include "treegraph/synth.hpp"
#include "treegraph/trunk_detect.hpp"
#include "treegraph/types.hpp"

namespace {

using namespace treegraph;

using MetricRows = std::vector<std::pair<std::string, std::string>>;

void print_table(const MetricRows& rows) {
  std::size_t width = 0;
  for (const auto& [k, v] : rows) width = std::max(width, k.size());
  for (const auto& [k, v] : rows) {
    std::printf("%-*s  %s\n", static_cast<int>(width), k.c_str(), v.c_str());
  }
}

void write_metric_csv(const MetricRows& rows, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(path.string() + ": cannot open for writing");
  out << "metric,value\n";
  for (const auto& [k, v] : rows) out << k << ',' << v << '\n';
  if (!out) throw Error(path.string() + ": write failed");
}

constexpr const char* kFeatureNames[kFeatureDim] = {
    "lambda1",        "lambda2",       "lambda3",     "anisotropy",      "eigen_entropy",
    "linearity",      "omnivariance",  "planarity",   "sphericity",      "surface_variation",
    "mean_x",         "mean_y",        "mean_z",      "var_x",           "var_y",
    "var_z",          "area_normal",   "area_vertical", "point_count",   "occupied_volume",
    "density",        "conn_horizontal", "conn_vertical", "conn_diagonal"};

// Options shared by every subcommand that rebuilds the fine voxel graph.
struct GraphStageOpts {
  double ground_radius = 1.0;
  double ground_tolerance = 0.15;
  double voxel_size = 0.1;
  double edge_radius = 0.15;
  std::string weighting = "none";
  std::string features = "all";
  double neighborhood = 0.0;  // <= 0 picks 3 * voxel_size
  int threads = 0;

  void add_flags(CLI::App* cmd) {
    cmd->add_option("--ground-radius", ground_radius, "Lateral ground-minimum radius [m]")
        ->capture_default_str();
    cmd->add_option("--ground-tol", ground_tolerance, "Height tolerance above local ground [m]")
        ->capture_default_str();
    cmd->add_option("--voxel-size", voxel_size, "Voxel edge length [m]")->capture_default_str();
    cmd->add_option("--edge-radius", edge_radius, "Graph edge connection radius [m]")
        ->capture_default_str();
    cmd->add_option("--weights", weighting, "Edge weighting scheme")
        ->check(CLI::IsMember({"none", "density", "cosine"}))
        ->capture_default_str();
    cmd->add_option("--features", features,
                    "Feature groups for cosine weights (comma list of "
                    "eigen,moments,area,density,connectivity or 'all')")
        ->capture_default_str();
    cmd->add_option("--neighborhood", neighborhood,
                    "Feature neighborhood radius [m]; 0 = 3 * voxel size")
        ->capture_default_str();
    cmd->add_option("--threads", threads, "Worker threads; 0 = hardware concurrency")
        ->capture_default_str();
  }
};

struct BuiltGraph {
  GroundPartition partition;
  VoxelGrid grid;
  FeatureSet features;
  TreeGraph graph;
};

BuiltGraph build_stage_graph(const PointCloud& cloud, const GraphStageOpts& o) {
  BuiltGraph b;
  b.partition = remove_ground(cloud, o.ground_radius, o.ground_tolerance);
  b.grid = voxelize(cloud, b.partition.nonground_ids, o.voxel_size);
  GraphOptions gopts;
  gopts.edge_radius = o.edge_radius;
  gopts.weighting = parse_weighting(o.weighting);
  gopts.feature_mask = FeatureMask::parse(o.features);
  gopts.threads = o.threads;
  const bool weighted = gopts.weighting != EdgeWeighting::none;
  if (weighted) b.features = compute_features(cloud, b.grid, o.neighborhood, o.threads);
  b.graph = build_graph(b.grid, gopts, weighted ? &b.features : nullptr);
  return b;
}

// Keeps the tree-id-0 <-> ground-class pairing the readers enforce.
void reconcile_ground(PointCloud& cloud) {
  for (auto& p : cloud.points) {
    if (p.tree_id == kGroundTreeId) {
      p.matter = MatterClass::ground;
    } else if (p.matter == MatterClass::ground) {
      p.matter = MatterClass::unknown;
    }
  }
}

void add_preprocess(CLI::App& app) {
  auto* cmd = app.add_subcommand(
      "preprocess", "Label ground points and optionally dump the voxel downsample");
  struct Opts {
    std::string input, out, voxels_out;
    double ground_radius = 1.0, ground_tolerance = 0.15, voxel_size = 0.1;
  };
  auto o = std::make_shared<Opts>();
  cmd->add_option("input", o->input, "Input cloud (.csv/.bin)")->required();
  cmd->add_option("--out", o->out, "Output cloud with ground labeled")->required();
  cmd->add_option("--ground-radius", o->ground_radius, "Lateral ground-minimum radius [m]")
      ->capture_default_str();
  cmd->add_option("--ground-tol", o->ground_tolerance, "Height tolerance above local ground [m]")
      ->capture_default_str();
  cmd->add_option("--voxel-size", o->voxel_size, "Voxel edge length for --voxels-out [m]")
      ->capture_default_str();
  cmd->add_option("--voxels-out", o->voxels_out, "CSV of non-ground voxel nodes (x,y,z,count)");
  cmd->callback([o] {
    PointCloud cloud = read_cloud(o->input);
    const GroundPartition part = remove_ground(cloud, o->ground_radius, o->ground_tolerance);
    for (const PointId id : part.ground_ids) {
      cloud.points[id].tree_id = kGroundTreeId;
      cloud.points[id].matter = MatterClass::ground;
    }
    cloud.has_tree_ids = true;
    if (cloud.has_classes) reconcile_ground(cloud);
    cloud.has_classes = true;
    write_cloud(cloud, o->out);
    if (!o->voxels_out.empty()) {
      const VoxelGrid grid = voxelize(cloud, part.nonground_ids, o->voxel_size);
      std::ofstream vo(o->voxels_out);
      if (!vo) throw Error(o->voxels_out + ": cannot open for writing");
      vo << "x,y,z,count\n";
      for (std::size_t n = 0; n < grid.node_count(); ++n) {
        const Vec3& p = grid.node_positions[n];
        vo << format_double(p.x) << ',' << format_double(p.y) << ',' << format_double(p.z) << ','
           << grid.members[n].size() << '\n';
      }
      if (!vo) throw Error(o->voxels_out + ": write failed");
      std::printf("voxel nodes: %zu\n", grid.node_count());
    }
    std::printf("points: %zu  ground: %zu  non-ground: %zu\n", cloud.size(),
                part.ground_ids.size(), part.nonground_ids.size());
  });
}

void add_enrich(CLI::App& app) {
  auto* cmd = app.add_subcommand("enrich", "Compute per-voxel geometric features");
  struct Opts {
    std::string input, out;
    GraphStageOpts g;
  };
  auto o = std::make_shared<Opts>();
  cmd->add_option("input", o->input, "Input cloud (.csv/.bin)")->required();
  cmd->add_option("--out", o->out, "Feature CSV, one row per voxel node")->required();
  o->g.add_flags(cmd);
  cmd->callback([o] {
    const PointCloud cloud = read_cloud(o->input);
    const GroundPartition part = remove_ground(cloud, o->g.ground_radius, o->g.ground_tolerance);
    const VoxelGrid grid = voxelize(cloud, part.nonground_ids, o->g.voxel_size);
    const FeatureSet fs = compute_features(cloud, grid, o->g.neighborhood, o->g.threads);
    std::ofstream out(o->out);
    if (!out) throw Error(o->out + ": cannot open for writing");
    out << "node,i,j,k,x,y,z";
    for (const char* name : kFeatureNames) out << ',' << name;
    out << '\n';
    for (std::size_t n = 0; n < grid.node_count(); ++n) {
      const CellIndex& c = grid.cells[n];
      const Vec3& p = grid.node_positions[n];
      out << n << ',' << c.i << ',' << c.j << ',' << c.k << ',' << format_double(p.x) << ','
          << format_double(p.y) << ',' << format_double(p.z);
      for (const double v : fs.per_node[n].flatten()) out << ',' << format_double(v);
      out << '\n';
    }
    if (!out) throw Error(o->out + ": write failed");
    std::printf("nodes: %zu  max cell occupancy: %u\n", grid.node_count(), fs.max_point_count);
  });
}

void add_graph(CLI::App& app) {
  auto* cmd = app.add_subcommand("graph", "Build the voxel graph and dump its edge list");
  struct Opts {
    std::string input, out;
    GraphStageOpts g;
  };
  auto o = std::make_shared<Opts>();
  cmd->add_option("input", o->input, "Input cloud (.csv/.bin)")->required();
  cmd->add_option("--out", o->out, "Edge list CSV (a,b,cost), each edge once")->required();
  o->g.add_flags(cmd);
  cmd->callback([o] {
    const PointCloud cloud = read_cloud(o->input);
    const BuiltGraph b = build_stage_graph(cloud, o->g);
    std::ofstream out(o->out);
    if (!out) throw Error(o->out + ": cannot open for writing");
    out << "a,b,cost\n";
    std::size_t edges = 0;
    for (NodeId n = 0; n < static_cast<NodeId>(b.graph.node_count()); ++n) {
      const auto nbrs = b.graph.neighbors(n);
      const auto costs = b.graph.costs(n);
      for (std::size_t i = 0; i < nbrs.size(); ++i) {
        if (nbrs[i] <= n) continue;
        out << n << ',' << nbrs[i] << ',' << format_double(costs[i]) << '\n';
        ++edges;
      }
    }
    if (!out) throw Error(o->out + ": write failed");
    std::printf("nodes: %zu  edges: %zu  weighting: %s\n", b.graph.node_count(), edges,
                weighting_name(b.graph.weighting));
  });
}

void add_find_trunks(CLI::App& app) {
  auto* cmd = app.add_subcommand("find-trunks", "Detect trunk locations with no priors");
  struct Opts {
    std::string input, out;
    TrunkDetectionConfig cfg;
    double coarse_edge_radius = 0.0;  // <= 0 picks 1.5 * coarse voxel
  };
  auto o = std::make_shared<Opts>();
  cmd->add_option("input", o->input, "Input cloud (.csv/.bin)")->required();
  cmd->add_option("--out", o->out, "Trunk CSV (x,y,z,tree_id)")->required();
  cmd->add_option("--coarse-voxel", o->cfg.coarse_voxel, "Coarse voxel edge length [m]")
      ->capture_default_str();
  cmd->add_option("--coarse-edge-radius", o->coarse_edge_radius,
                  "Coarse graph edge radius [m]; 0 = 1.5 * coarse voxel");
  cmd->add_option("--source-spacing", o->cfg.source_spacing, "Canopy source subsample spacing [m]")
      ->capture_default_str();
  cmd->add_option("--min-height", o->cfg.source_min_height,
                  "Minimum source height above local ground [m]")
      ->capture_default_str();
  cmd->add_option("--local-min-radius", o->cfg.local_min_radius,
                  "Score local-minimum neighborhood radius [m]")
      ->capture_default_str();
  cmd->add_option("--merge-dist", o->cfg.merge_distance, "Merge radius for nearby minima [m]")
      ->capture_default_str();
  cmd->add_option("--ground-radius", o->cfg.ground_radius, "Lateral ground-minimum radius [m]")
      ->capture_default_str();
  cmd->add_option("--ground-tol", o->cfg.ground_tolerance,
                  "Height tolerance above local ground [m]")
      ->capture_default_str();
  cmd->add_option("--threads", o->cfg.threads, "Worker threads; 0 = hardware concurrency")
      ->capture_default_str();
  cmd->callback([o] {
    const PointCloud cloud = read_cloud(o->input);
    TrunkDetectionConfig cfg = o->cfg;
    cfg.edge_radius = o->coarse_edge_radius > 0.0 ? o->coarse_edge_radius : 1.5 * cfg.coarse_voxel;
    const TrunkDetectionResult res = detect_trunks(cloud, cfg);
    write_trunks(res.trunks, o->out);
    if (res.trunks.empty() && !res.diagnostic.empty()) {
      std::fprintf(stderr, "find-trunks: no trunks found: %s\n", res.diagnostic.c_str());
    }
    std::printf("trunks: %zu\n", res.trunks.size());
  });
}

void add_segment(CLI::App& app) {
  auto* cmd = app.add_subcommand("segment", "Assign each point to a tree by path cost to trunks");
  struct Opts {
    std::string input, trunks, out;
    GraphStageOpts g;
    double anchor_radius = 0.0;
    bool fallback = true;
  };
  auto o = std::make_shared<Opts>();
  cmd->add_option("input", o->input, "Input cloud (.csv/.bin)")->required();
  cmd->add_option("--trunks", o->trunks, "Trunk CSV (x,y,z,tree_id)")->required();
  cmd->add_option("--out", o->out, "Labeled output cloud")->required();
  o->g.add_flags(cmd);
  cmd->add_option("--anchor-radius", o->anchor_radius,
                  "Max trunk-to-node anchoring distance [m]; 0 = edge radius");
  cmd->add_flag("--fallback,!--no-fallback", o->fallback,
                "Assign graph-orphaned points to the nearest trunk")
      ->capture_default_str();
  cmd->callback([o] {
    PointCloud cloud = read_cloud(o->input);
    const std::vector<TrunkPoint> trunks = read_trunks(o->trunks);
    SegmentParams params;
    params.ground_radius = o->g.ground_radius;
    params.ground_tolerance = o->g.ground_tolerance;
    params.voxel_size = o->g.voxel_size;
    params.edge_radius = o->g.edge_radius;
    params.weighting = parse_weighting(o->g.weighting);
    params.feature_mask = FeatureMask::parse(o->g.features);
    params.enrich_radius = o->g.neighborhood;
    params.anchor_radius = o->anchor_radius;
    params.fallback = o->fallback;
    params.threads = o->g.threads;
    const std::vector<std::int32_t> labels = segment_trees(cloud, trunks, params);
    std::size_t unknown = 0;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      cloud.points[i].tree_id = labels[i];
      if (labels[i] == kUnknownTreeId) ++unknown;
    }
    cloud.has_tree_ids = true;
    if (cloud.has_classes) reconcile_ground(cloud);
    write_cloud(cloud, o->out);
    std::printf("points: %zu  trunks: %zu  unassigned: %zu\n", cloud.size(), trunks.size(),
                unknown);
  });
}

void add_classify(CLI::App& app) {
  auto* cmd =
      app.add_subcommand("classify", "Split non-ground points into woody and leafy matter");
  struct Opts {
    std::string input, trunks, out;
    GraphStageOpts g;
    double anchor_radius = 0.0;
    ClassifyParams params;
  };
  auto o = std::make_shared<Opts>();
  cmd->add_option("input", o->input, "Input cloud (.csv/.bin)")->required();
  cmd->add_option("--trunks", o->trunks, "Trunk CSV (x,y,z,tree_id)")->required();
  cmd->add_option("--out", o->out, "Labeled output cloud")->required();
  o->g.add_flags(cmd);
  cmd->add_option("--anchor-radius", o->anchor_radius,
                  "Max trunk-to-node anchoring distance [m]; 0 = edge radius");
  cmd->add_option("--threshold", o->params.threshold, "Woody decision threshold on the score")
      ->capture_default_str();
  cmd->add_option("--smooth-radius", o->params.smoothing_radius,
                  "Score smoothing radius around each point [m]")
      ->capture_default_str();
  cmd->callback([o] {
    PointCloud cloud = read_cloud(o->input);
    const std::vector<TrunkPoint> trunks = read_trunks(o->trunks);
    const BuiltGraph b = build_stage_graph(cloud, o->g);
    const double anchor = o->anchor_radius > 0.0 ? o->anchor_radius : o->g.edge_radius;
    const std::vector<NodeId> anchors = anchor_trunks(b.graph, trunks, anchor);
    const PathAggregate agg = aggregate_paths(b.graph, anchors, o->g.threads);
    const MatterScores scores = score_matter(b.graph, agg);
    if (!scores.diagnostic.empty()) {
      std::fprintf(stderr, "classify: %s\n", scores.diagnostic.c_str());
    }
    ClassifyParams cparams = o->params;
    cparams.threads = o->g.threads;
    const std::vector<MatterClass> classes =
        classify_matter(cloud, b.graph, scores.node_scores, b.partition.is_ground, cparams);
    std::size_t woody = 0, leafy = 0, unknown = 0;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      cloud.points[i].matter = classes[i];
      if (classes[i] == MatterClass::ground) {
        cloud.points[i].tree_id = kGroundTreeId;
      } else if (cloud.points[i].tree_id == kGroundTreeId) {
        cloud.points[i].tree_id = kUnknownTreeId;
      }
      woody += classes[i] == MatterClass::woody;
      leafy += classes[i] == MatterClass::leafy;
      unknown += classes[i] == MatterClass::unknown;
    }
    cloud.has_classes = true;
    cloud.has_tree_ids = true;
    write_cloud(cloud, o->out);
    std::printf("points: %zu  woody: %zu  leafy: %zu  ground: %zu  unknown: %zu\n", cloud.size(),
                woody, leafy, cloud.size() - woody - leafy - unknown, unknown);
  });
}

void add_calibrate(CLI::App& app) {
  auto* cmd = app.add_subcommand(
      "calibrate", "Fit the woody threshold from a cloud with known matter classes");
  struct Opts {
    std::string labeled, trunks, csv;
    GraphStageOpts g;
    double anchor_radius = 0.0;
    double smoothing_radius = 0.3;
  };
  auto o = std::make_shared<Opts>();
  cmd->add_option("--labeled", o->labeled, "Cloud with ground-truth matter classes")->required();
  cmd->add_option("--trunks", o->trunks, "Trunk CSV (x,y,z,tree_id)")->required();
  o->g.add_flags(cmd);
  cmd->add_option("--anchor-radius", o->anchor_radius,
                  "Max trunk-to-node anchoring distance [m]; 0 = edge radius");
  cmd->add_option("--smooth-radius", o->smoothing_radius,
                  "Score smoothing radius around each point [m]")
      ->capture_default_str();
  cmd->add_option("--csv", o->csv, "Also write the report as metric,value CSV");
  cmd->callback([o] {
    const PointCloud cloud = read_cloud(o->labeled);
    if (!cloud.has_classes) throw Error(o->labeled + ": no matter class column to calibrate on");
    const std::vector<TrunkPoint> trunks = read_trunks(o->trunks);
    const BuiltGraph b = build_stage_graph(cloud, o->g);
    const double anchor = o->anchor_radius > 0.0 ? o->anchor_radius : o->g.edge_radius;
    const std::vector<NodeId> anchors = anchor_trunks(b.graph, trunks, anchor);
    const PathAggregate agg = aggregate_paths(b.graph, anchors, o->g.threads);
    const MatterScores scores = score_matter(b.graph, agg);
    const std::vector<double> point_scores =
        smooth_scores(cloud, b.graph, scores.node_scores, o->smoothing_radius, o->g.threads);
    std::vector<MatterClass> truth(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) truth[i] = cloud.points[i].matter;
    const CalibrationReport rep = calibrate_threshold(point_scores, truth);
    const MetricRows rows = {
        {"woody_points", std::to_string(rep.woody_points)},
        {"leafy_points", std::to_string(rep.leafy_points)},
        {"woody_score_mean", format_double(rep.woody_mean)},
        {"woody_score_stddev", format_double(rep.woody_stddev)},
        {"leafy_score_mean", format_double(rep.leafy_mean)},
        {"leafy_score_stddev", format_double(rep.leafy_stddev)},
        {"midpoint_threshold", format_double(rep.midpoint_threshold)},
        {"best_f1_threshold", format_double(rep.best_f1_threshold)},
        {"best_f1", format_double(rep.best_f1)},
    };
    print_table(rows);
    if (!o->csv.empty()) write_metric_csv(rows, o->csv);
  });
}

void add_simulate(CLI::App& app) {
  auto* cmd = app.add_subcommand("simulate", "Generate a labeled synthetic orchard scan");
  struct Opts {
    std::string out, trunks_out;
    OrchardSpec spec;
  };
  auto o = std::make_shared<Opts>();
  cmd->add_option("--out", o->out, "Output cloud (.csv/.bin)")->required();
  cmd->add_option("--trunks-out", o->trunks_out, "Ground-truth trunk CSV");
  cmd->add_option("--rows", o->spec.rows, "Tree rows")->capture_default_str();
  cmd->add_option("--per-row", o->spec.trees_per_row, "Trees per row")->capture_default_str();
  cmd->add_option("--row-spacing", o->spec.row_spacing, "Row spacing [m]")->capture_default_str();
  cmd->add_option("--tree-spacing", o->spec.tree_spacing, "In-row tree spacing [m]")
      ->capture_default_str();
  cmd->add_option("--noise", o->spec.noise_sigma, "Gaussian noise sigma [m]")
      ->capture_default_str();
  cmd->add_option("--seed", o->spec.seed, "Generator seed")->capture_default_str();
  cmd->add_option("--height-min", o->spec.height_min, "Minimum tree height [m]")
      ->capture_default_str();
  cmd->add_option("--height-max", o->spec.height_max, "Maximum tree height [m]")
      ->capture_default_str();
  cmd->add_option("--branching-depth", o->spec.branching_depth, "Skeleton recursion depth")
      ->capture_default_str();
  cmd->add_option("--canopy-radius", o->spec.canopy_radius, "Lateral canopy cap [m]")
      ->capture_default_str();
  cmd->add_option("--leaf-sigma", o->spec.leaf_sigma, "Leaf cluster spread [m]")
      ->capture_default_str();
  cmd->add_option("--wood-density", o->spec.wood_density, "Bark surface sample multiplier")
      ->capture_default_str();
  cmd->add_option("--leaf-density", o->spec.leaf_density, "Leaf cluster sample multiplier")
      ->capture_default_str();
  cmd->add_option("--canopy-falloff", o->spec.canopy_falloff, "Thinning toward the canopy top")
      ->capture_default_str();
  cmd->add_option("--ground-spacing", o->spec.ground_spacing, "Ground grid spacing [m]")
      ->capture_default_str();
  cmd->add_option("--ground-margin", o->spec.ground_margin, "Ground margin past the rows [m]")
      ->capture_default_str();
  cmd->add_option("--density-scale", o->spec.density_scale, "Global point density multiplier")
      ->capture_default_str();
  cmd->add_option("--threads", o->spec.threads, "Worker threads; 0 = hardware concurrency")
      ->capture_default_str();
  cmd->callback([o] {
    const SyntheticOrchard orchard = generate_orchard(o->spec);
    write_cloud(orchard.cloud, o->out);
    if (!o->trunks_out.empty()) write_trunks(orchard.trunks, o->trunks_out);
    std::printf("points: %zu  trees: %zu\n", orchard.cloud.size(), orchard.trunks.size());
  });
}

void add_eval(CLI::App& app) {
  auto* cmd = app.add_subcommand("eval", "Score predictions against ground truth");
  cmd->require_subcommand(1);

  struct TrunkOpts {
    std::string pred, truth, csv;
    double max_dist = 1.0;
  };
  auto to = std::make_shared<TrunkOpts>();
  auto* trunks = cmd->add_subcommand("trunks", "Match detected trunks to truth trunks");
  trunks->add_option("--pred", to->pred, "Detected trunk CSV")->required();
  trunks->add_option("--truth", to->truth, "Ground-truth trunk CSV")->required();
  trunks->add_option("--max-dist", to->max_dist, "Match distance threshold [m]")
      ->capture_default_str();
  trunks->add_option("--csv", to->csv, "Also write metrics as CSV");
  trunks->callback([to] {
    const std::vector<TrunkPoint> pred = read_trunks(to->pred);
    const std::vector<TrunkPoint> truth = read_trunks(to->truth);
    const TrunkMatchResult m = match_trunks(pred, truth, to->max_dist);
    const MetricRows rows = {
        {"true_positives", std::to_string(m.tp)},
        {"false_positives", std::to_string(m.fp)},
        {"false_negatives", std::to_string(m.fn)},
        {"precision", format_double(m.precision)},
        {"recall", format_double(m.recall)},
        {"f1", format_double(m.f1)},
        {"mean_tp_distance", format_double(m.mean_tp_distance)},
    };
    print_table(rows);
    if (!to->csv.empty()) write_metric_csv(rows, to->csv);
  });

  struct CloudOpts {
    std::string pred, truth, csv;
  };
  auto so = std::make_shared<CloudOpts>();
  auto* seg = cmd->add_subcommand("segmentation", "Compare per-point tree labels (v-measure)");
  seg->add_option("--pred", so->pred, "Predicted labeled cloud")->required();
  seg->add_option("--truth", so->truth, "Ground-truth labeled cloud")->required();
  seg->add_option("--csv", so->csv, "Also write metrics as CSV");
  seg->callback([so] {
    const PointCloud pred = read_cloud(so->pred);
    const PointCloud truth = read_cloud(so->truth);
    if (pred.size() != truth.size()) {
      throw Error("point counts differ: " + std::to_string(pred.size()) + " vs " +
                  std::to_string(truth.size()));
    }
    if (!pred.has_tree_ids) throw Error(so->pred + ": no tree id column");
    if (!truth.has_tree_ids) throw Error(so->truth + ": no tree id column");
    std::vector<std::int32_t> p(pred.size()), t(truth.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
      p[i] = pred.points[i].tree_id;
      t[i] = truth.points[i].tree_id;
    }
    const auto [pf, tf] = filter_tree_labels(p, t);
    if (pf.empty()) throw Error("no points carry tree labels in both clouds");
    const VMeasure v = v_measure_parts(pf, tf);
    const MetricRows rows = {
        {"compared_points", std::to_string(pf.size())},
        {"homogeneity", format_double(v.homogeneity)},
        {"completeness", format_double(v.completeness)},
        {"v_measure", format_double(v.v)},
    };
    print_table(rows);
    if (!so->csv.empty()) write_metric_csv(rows, so->csv);
  });

  auto co = std::make_shared<CloudOpts>();
  auto* cls = cmd->add_subcommand("classification", "Compare woody/leafy labels (F1 on woody)");
  cls->add_option("--pred", co->pred, "Predicted labeled cloud")->required();
  cls->add_option("--truth", co->truth, "Ground-truth labeled cloud")->required();
  cls->add_option("--csv", co->csv, "Also write metrics as CSV");
  cls->callback([co] {
    const PointCloud pred = read_cloud(co->pred);
    const PointCloud truth = read_cloud(co->truth);
    if (pred.size() != truth.size()) {
      throw Error("point counts differ: " + std::to_string(pred.size()) + " vs " +
                  std::to_string(truth.size()));
    }
    if (!pred.has_classes) throw Error(co->pred + ": no matter class column");
    if (!truth.has_classes) throw Error(co->truth + ": no matter class column");
    std::vector<MatterClass> p(pred.size()), t(truth.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
      p[i] = pred.points[i].matter;
      t[i] = truth.points[i].matter;
    }
    const auto [pf, tf] = filter_matter_labels(p, t);
    if (pf.empty()) throw Error("no points carry woody/leafy labels in both clouds");
    std::string diag;
    const double f1 = binary_f1(pf, tf, MatterClass::woody, &diag);
    if (!diag.empty()) std::fprintf(stderr, "eval classification: %s\n", diag.c_str());
    const MetricRows rows = {
        {"compared_points", std::to_string(pf.size())},
        {"woody_f1", format_double(f1)},
    };
    print_table(rows);
    if (!co->csv.empty()) write_metric_csv(rows, co->csv);
  });
}

void add_analyze(CLI::App& app) {
  auto* cmd = app.add_subcommand(
      "analyze", "Full pipeline: ground, trunks, segmentation, classification, manifest");
  struct Opts {
    std::string input, out, manifest, trunks, truth_trunks, detected_out;
    GraphStageOpts g;
    double anchor_radius = 0.0;
    bool fallback = true;
    bool detect = true;
    TrunkDetectionConfig trunk;
    double coarse_edge_radius = 0.0;
    ClassifyParams classify;
    double match_dist = 1.0;
  };
  auto o = std::make_shared<Opts>();
  cmd->add_option("input", o->input, "Input cloud (.csv/.bin)")->required();
  cmd->add_option("--out", o->out, "Labeled output cloud")->required();
  cmd->add_option("--manifest", o->manifest,
                  "Run manifest JSON path (default: <out>.manifest.json)");
  cmd->add_option("--trunks", o->trunks, "Use these trunks instead of detecting");
  cmd->add_option("--truth-trunks", o->truth_trunks, "Score detected trunks against this CSV");
  cmd->add_option("--detected-trunks-out", o->detected_out, "Write detected trunks here");
  cmd->add_flag("--detect,!--no-detect", o->detect, "Detect trunks when none are provided")
      ->capture_default_str();
  o->g.add_flags(cmd);
  cmd->add_option("--anchor-radius", o->anchor_radius,
                  "Max trunk-to-node anchoring distance [m]; 0 = edge radius "
                  "(widened automatically for detected trunks)");
  cmd->add_flag("--fallback,!--no-fallback", o->fallback,
                "Assign graph-orphaned points to the nearest trunk")
      ->capture_default_str();
  cmd->add_option("--coarse-voxel", o->trunk.coarse_voxel,
                  "Trunk detection coarse voxel edge length [m]")
      ->capture_default_str();
  cmd->add_option("--coarse-edge-radius", o->coarse_edge_radius,
                  "Coarse graph edge radius [m]; 0 = 1.5 * coarse voxel");
  cmd->add_option("--source-spacing", o->trunk.source_spacing,
                  "Canopy source subsample spacing [m]")
      ->capture_default_str();
  cmd->add_option("--min-height", o->trunk.source_min_height,
                  "Minimum source height above local ground [m]")
      ->capture_default_str();
  cmd->add_option("--local-min-radius", o->trunk.local_min_radius,
                  "Score local-minimum neighborhood radius [m]")
      ->capture_default_str();
  cmd->add_option("--merge-dist", o->trunk.merge_distance, "Merge radius for nearby minima [m]")
      ->capture_default_str();
  cmd->add_option("--threshold", o->classify.threshold, "Woody decision threshold")
      ->capture_default_str();
  cmd->add_option("--smooth-radius", o->classify.smoothing_radius,
                  "Score smoothing radius around each point [m]")
      ->capture_default_str();
  cmd->add_option("--match-dist", o->match_dist, "Trunk match distance for metrics [m]")
      ->capture_default_str();
  cmd->callback([o] {
    const PointCloud cloud = read_cloud(o->input);
    std::vector<TrunkPoint> provided;
    if (!o->trunks.empty()) provided = read_trunks(o->trunks);
    std::vector<TrunkPoint> truth;
    if (!o->truth_trunks.empty()) truth = read_trunks(o->truth_trunks);
    AnalyzeParams params;
    params.segment.ground_radius = o->g.ground_radius;
    params.segment.ground_tolerance = o->g.ground_tolerance;
    params.segment.voxel_size = o->g.voxel_size;
    params.segment.edge_radius = o->g.edge_radius;
    params.segment.weighting = parse_weighting(o->g.weighting);
    params.segment.feature_mask = FeatureMask::parse(o->g.features);
    params.segment.enrich_radius = o->g.neighborhood;
    params.segment.anchor_radius = o->anchor_radius;
    params.segment.fallback = o->fallback;
    params.trunk = o->trunk;
    params.trunk.ground_radius = o->g.ground_radius;
    params.trunk.ground_tolerance = o->g.ground_tolerance;
    if (o->coarse_edge_radius > 0.0) {
      params.trunk.edge_radius = o->coarse_edge_radius;
    } else {
      params.trunk.edge_radius = 1.5 * params.trunk.coarse_voxel;
    }
    params.classify = o->classify;
    params.detect = o->detect;
    params.trunk_match_dist = o->match_dist;
    params.threads = o->g.threads;
    const AnalyzeResult res = analyze(cloud, provided, truth, params);
    write_cloud(res.labeled, o->out);
    const std::string manifest_path =
        o->manifest.empty() ? o->out + ".manifest.json" : o->manifest;
    std::ofstream mf(manifest_path);
    if (!mf) throw Error(manifest_path + ": cannot open for writing");
    mf << res.manifest.dump(2) << '\n';
    if (!mf) throw Error(manifest_path + ": write failed");
    if (!o->detected_out.empty() && res.trunks_detected) {
      write_trunks(res.trunks, o->detected_out);
    }
    MetricRows rows = {{"trunks", std::to_string(res.trunks.size())},
                       {"trunk_source", res.trunks_detected ? "detected" : "provided"}};
    for (const auto& [key, value] : res.manifest["metrics"].items()) {
      if (value.is_number()) rows.emplace_back(key, format_double(value.get<double>()));
    }
    rows.emplace_back("total_s",
                      format_double(res.manifest["execution"]["timings_s"]["total_s"]));
    print_table(rows);
  });
}

void add_sweep(CLI::App& app) {
  auto* cmd = app.add_subcommand(
      "sweep", "Run synthetic experiment grids (noise x spacing x seeds) to a results CSV");
  struct Opts {
    std::string spec, out;
  };
  auto o = std::make_shared<Opts>();
  cmd->add_option("--spec", o->spec, "Experiment spec JSON")->required();
  cmd->add_option("--out", o->out, "Long-format results CSV")->required();
  cmd->callback([o] {
    std::ifstream in(o->spec);
    if (!in) throw Error(o->spec + ": cannot open");
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw Error(o->spec + ": " + e.what());
    }
    const SweepSpec spec = parse_sweep_spec(j);
    const std::vector<SweepRow> rows = run_sweep(spec);
    write_sweep_csv(rows, o->out);
    const std::size_t cells = spec.noise.size() * spec.spacing.size() * spec.seeds.size();
    std::printf("cells: %zu  rows: %zu\n", cells, rows.size());
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Voxel-graph analysis of orchard LiDAR point clouds"};
  app.set_version_flag("--version", std::string(kVersion));
  app.set_config("--config", "", "Read option defaults from a TOML file (flags win)");
  app.require_subcommand(1);
  add_preprocess(app);
  add_enrich(app);
  add_graph(app);
  add_find_trunks(app);
  add_segment(app);
  add_classify(app);
  add_calibrate(app);
  add_simulate(app);
  add_eval(app);
  add_analyze(app);
  add_sweep(app);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const treegraph::Error& e) {
    const auto subs = app.get_subcommands();
    std::string tag = "treegraph";
    if (!subs.empty()) {
      tag = subs.front()->get_name();
      const auto nested = subs.front()->get_subcommands();
      if (!nested.empty()) tag += " " + nested.front()->get_name();
    }
    std::fprintf(stderr, "%s: error: %s\n", tag.c_str(), e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "treegraph: unexpected error: %s\n", e.what());
    return 2;
  }
  return 0;
}
