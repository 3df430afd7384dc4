#include "treegraph/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "treegraph/eval.hpp"
#include "treegraph/io.hpp"
#include "treegraph/parallel.hpp"

namespace treegraph {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

template <typename Fn>
auto stage(const char* name, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(std::string(name) + ": " + e.what());
  }
}

nlohmann::ordered_json trunks_json(std::span<const TrunkPoint> trunks) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& t : trunks) {
    arr.push_back({{"tree_id", t.tree_id},
                   {"x", t.position.x},
                   {"y", t.position.y},
                   {"z", t.position.z}});
  }
  return arr;
}

}  // namespace

AnalyzeResult analyze(const PointCloud& cloud, std::span<const TrunkPoint> provided_trunks,
                      std::span<const TrunkPoint> truth_trunks, const AnalyzeParams& params_in) {
  AnalyzeParams params = params_in;
  params.propagate_threads();

  AnalyzeResult res;
  nlohmann::ordered_json timings;
  const auto t_total = Clock::now();

  std::string trunk_diagnostic;
  if (!provided_trunks.empty()) {
    res.trunks.assign(provided_trunks.begin(), provided_trunks.end());
  } else if (params.detect) {
    const auto t0 = Clock::now();
    TrunkDetectionResult det = stage("find-trunks", [&] { return detect_trunks(cloud, params.trunk); });
    res.trunks = std::move(det.trunks);
    trunk_diagnostic = std::move(det.diagnostic);
    res.trunks_detected = true;
    timings["find_trunks_s"] = seconds_since(t0);
  } else {
    throw Error("configuration: no trunks provided and detection disabled");
  }
  if (res.trunks.empty()) {
    throw Error("find-trunks: no trunks found" +
                (trunk_diagnostic.empty() ? std::string() : " (" + trunk_diagnostic + ")"));
  }

  // Detected trunks are coarse-grid centroids; widen the anchor radius so the
  // fine graph accepts them (see anchor_radius in SegmentParams).
  SegmentParams seg_params = params.segment;
  if (seg_params.anchor_radius <= 0.0 && res.trunks_detected) {
    seg_params.anchor_radius = std::max(params.segment.edge_radius, 1.5 * params.trunk.coarse_voxel);
  }

  const auto t_seg = Clock::now();
  SegmentationResult seg =
      stage("segment", [&] { return segment_trees_full(cloud, res.trunks, seg_params); });
  res.tree_ids = seg.labels;
  timings["segment_s"] = seconds_since(t_seg);

  const auto t_cls = Clock::now();
  std::string score_diagnostic;
  res.classes = stage("classify", [&] {
    std::vector<MatterClass> classes(cloud.size(), MatterClass::unknown);
    if (seg.graph.node_count() == 0) {  // all-ground cloud
      for (const PointId id : seg.partition.ground_ids) classes[id] = MatterClass::ground;
      return classes;
    }
    MatterScores scores = score_matter(seg.graph, seg.aggregate);
    score_diagnostic = scores.diagnostic;
    return classify_matter(cloud, seg.graph, scores.node_scores, seg.partition.is_ground,
                           params.classify);
  });
  timings["classify_s"] = seconds_since(t_cls);
  timings["total_s"] = seconds_since(t_total);

  res.labeled = cloud;
  res.labeled.has_tree_ids = true;
  res.labeled.has_classes = true;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    res.labeled.points[i].tree_id = res.tree_ids[i];
    res.labeled.points[i].matter = res.classes[i];
  }

  nlohmann::ordered_json& m = res.manifest;
  m["version"] = kVersion;
  m["parameters"] = {
      {"ground_radius", params.segment.ground_radius},
      {"ground_tolerance", params.segment.ground_tolerance},
      {"voxel_size", params.segment.voxel_size},
      {"edge_radius", params.segment.edge_radius},
      {"weighting", weighting_name(params.segment.weighting)},
      {"enrich_radius",
       params.segment.enrich_radius > 0.0 ? params.segment.enrich_radius
                                          : 3.0 * params.segment.voxel_size},
      {"anchor_radius",
       seg_params.anchor_radius > 0.0 ? seg_params.anchor_radius : params.segment.edge_radius},
      {"fallback", params.segment.fallback},
      {"detect", params.detect},
      {"coarse_voxel", params.trunk.coarse_voxel},
      {"coarse_edge_radius", params.trunk.edge_radius},
      {"source_spacing", params.trunk.source_spacing},
      {"source_min_height", params.trunk.source_min_height},
      {"local_min_radius", params.trunk.local_min_radius},
      {"merge_distance", params.trunk.merge_distance},
      {"threshold", params.classify.threshold},
      {"smoothing_radius", params.classify.smoothing_radius},
      {"trunk_match_dist", params.trunk_match_dist},
  };
  m["input"] = {{"points", cloud.size()},
                {"has_tree_ids", cloud.has_tree_ids},
                {"has_classes", cloud.has_classes}};
  m["trunk_source"] = res.trunks_detected ? "detected" : "provided";
  m["trunks"] = trunks_json(res.trunks);
  nlohmann::ordered_json diagnostics = nlohmann::ordered_json::object();
  if (!trunk_diagnostic.empty()) diagnostics["find_trunks"] = trunk_diagnostic;
  if (!score_diagnostic.empty()) diagnostics["classify"] = score_diagnostic;
  if (seg.graph.weight_diagnostics.zero_norm_pairs > 0) {
    diagnostics["zero_norm_feature_pairs"] = seg.graph.weight_diagnostics.zero_norm_pairs;
  }
  m["diagnostics"] = diagnostics;

  nlohmann::ordered_json metrics = nlohmann::ordered_json::object();
  if (cloud.has_tree_ids) {
    std::vector<std::int32_t> truth_ids(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) truth_ids[i] = cloud.points[i].tree_id;
    const auto [pf, tf] = filter_tree_labels(res.tree_ids, truth_ids);
    if (!pf.empty()) {
      metrics["v_measure"] = v_measure(pf, tf);
      const std::vector<std::int32_t> base =
          closest_trunk_baseline(cloud, res.trunks, seg.partition.is_ground);
      const auto [bf, btf] = filter_tree_labels(base, truth_ids);
      if (!bf.empty()) metrics["baseline_v_measure"] = v_measure(bf, btf);
    }
  }
  if (cloud.has_classes) {
    std::vector<MatterClass> truth_classes(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) truth_classes[i] = cloud.points[i].matter;
    const auto [pc, tc] = filter_matter_labels(res.classes, truth_classes);
    if (!pc.empty()) metrics["matter_f1"] = binary_f1(pc, tc, MatterClass::woody);
  }
  if (!truth_trunks.empty()) {
    const TrunkMatchResult match = match_trunks(res.trunks, truth_trunks, params.trunk_match_dist);
    metrics["trunk_precision"] = match.precision;
    metrics["trunk_recall"] = match.recall;
    metrics["trunk_f1"] = match.f1;
    metrics["trunk_tp_distance"] = match.mean_tp_distance;
    metrics["trunk_tp"] = match.tp;
    metrics["trunk_fp"] = match.fp;
    metrics["trunk_fn"] = match.fn;
  }
  m["metrics"] = metrics;
  m["execution"] = {{"threads", resolve_threads(params.threads)}, {"timings_s", timings}};
  return res;
}

std::vector<SweepRow> run_sweep(const SweepSpec& spec) {
  std::vector<SweepRow> rows;
  SweepSpec grid = spec;
  if (grid.params.segment.anchor_radius <= 0.0) {
    // Generator trunks sit at ground level, below the lowest non-ground node;
    // anchor at the trunk-detection scale unless the spec pinned a radius.
    grid.params.segment.anchor_radius =
        std::max(grid.params.segment.edge_radius, 1.5 * grid.params.trunk.coarse_voxel);
  }
  for (const double noise : spec.noise) {
    for (const double spacing : spec.spacing) {
      for (const std::uint64_t seed : spec.seeds) {
        OrchardSpec cell = spec.base;
        cell.noise_sigma = noise;
        cell.seed = seed;
        if (spacing > 0.0) {
          cell.tree_spacing = spacing;
          cell.row_spacing = spacing;
        }
        const double spacing_out = spacing > 0.0 ? spacing : spec.base.tree_spacing;
        const auto t0 = Clock::now();
        const auto emit = [&](const std::string& metric, double value) {
          rows.push_back({noise, spacing_out, seed, metric, value, 0.0});
        };
        const std::size_t first_row = rows.size();
        try {
          const SyntheticOrchard orchard = generate_orchard(cell);
          // Trunk metrics come from one source per cell: a standalone detection
          // pass when segmentation is driven by truth trunks, or the analyze
          // manifest when detection feeds segmentation directly.
          if (spec.use_truth_trunks && spec.detect_metrics) {
            const TrunkDetectionResult det = detect_trunks(orchard.cloud, grid.params.trunk);
            const TrunkMatchResult match =
                match_trunks(det.trunks, orchard.trunks, grid.params.trunk_match_dist);
            emit("trunk_precision", match.precision);
            emit("trunk_recall", match.recall);
            emit("trunk_f1", match.f1);
            emit("trunk_tp_distance", match.mean_tp_distance);
          }
          const std::span<const TrunkPoint> trunks =
              spec.use_truth_trunks ? std::span<const TrunkPoint>(orchard.trunks)
                                    : std::span<const TrunkPoint>();
          const std::span<const TrunkPoint> truth_for_run =
              spec.use_truth_trunks ? std::span<const TrunkPoint>()
                                    : std::span<const TrunkPoint>(orchard.trunks);
          AnalyzeParams params = grid.params;
          if (!spec.use_truth_trunks) params.detect = true;
          const AnalyzeResult run = analyze(orchard.cloud, trunks, truth_for_run, params);
          for (const auto& [key, value] : run.manifest["metrics"].items()) {
            if (value.is_number()) emit(key, value.get<double>());
          }
        } catch (const Error& e) {
          std::fprintf(stderr, "sweep cell (noise=%g spacing=%g seed=%llu) failed: %s\n", noise,
                       spacing_out, static_cast<unsigned long long>(seed), e.what());
          emit("error", std::numeric_limits<double>::quiet_NaN());
        }
        const double runtime = seconds_since(t0);
        for (std::size_t i = first_row; i < rows.size(); ++i) rows[i].runtime_s = runtime;
      }
    }
  }
  return rows;
}

SweepSpec parse_sweep_spec(const nlohmann::json& j) {
  SweepSpec spec;
  spec.noise = j.value("noise", std::vector<double>{spec.base.noise_sigma});
  spec.spacing = j.value("spacing", std::vector<double>{-1.0});
  spec.seeds = j.value("seeds", std::vector<std::uint64_t>{spec.base.seed});
  spec.base.rows = j.value("rows", spec.base.rows);
  spec.base.trees_per_row = j.value("trees_per_row", spec.base.trees_per_row);
  spec.base.row_spacing = j.value("row_spacing", spec.base.row_spacing);
  spec.base.tree_spacing = j.value("tree_spacing", spec.base.tree_spacing);
  spec.base.density_scale = j.value("density_scale", spec.base.density_scale);
  spec.base.leaf_density = j.value("leaf_density", spec.base.leaf_density);
  spec.base.wood_density = j.value("wood_density", spec.base.wood_density);
  spec.base.canopy_falloff = j.value("canopy_falloff", spec.base.canopy_falloff);
  spec.use_truth_trunks = j.value("use_truth_trunks", spec.use_truth_trunks);
  spec.detect_metrics = j.value("detect_metrics", spec.detect_metrics);
  if (j.contains("weighting")) {
    spec.params.segment.weighting = parse_weighting(j["weighting"].get<std::string>());
  }
  spec.params.segment.voxel_size = j.value("voxel_size", spec.params.segment.voxel_size);
  spec.params.segment.edge_radius = j.value("edge_radius", spec.params.segment.edge_radius);
  spec.params.segment.anchor_radius = j.value("anchor_radius", spec.params.segment.anchor_radius);
  spec.params.classify.threshold = j.value("threshold", spec.params.classify.threshold);
  spec.params.classify.smoothing_radius =
      j.value("smoothing_radius", spec.params.classify.smoothing_radius);
  spec.params.trunk.coarse_voxel = j.value("coarse_voxel", spec.params.trunk.coarse_voxel);
  spec.params.trunk.source_spacing = j.value("source_spacing", spec.params.trunk.source_spacing);
  spec.params.trunk.merge_distance = j.value("merge_distance", spec.params.trunk.merge_distance);
  spec.params.threads = j.value("threads", spec.params.threads);
  return spec;
}

void write_sweep_csv(std::span<const SweepRow> rows, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(path.string() + ": cannot open for writing");
  out << "noise,spacing,seed,metric,value,runtime_s\n";
  for (const auto& r : rows) {
    out << format_double(r.noise) << ',' << format_double(r.spacing) << ',' << r.seed << ','
        << r.metric << ',' << format_double(r.value) << ',' << format_double(r.runtime_s) << '\n';
  }
  if (!out) throw Error(path.string() + ": write failed");
}

}  // namespace treegraph
