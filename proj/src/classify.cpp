#include "treegraph/classify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "treegraph/parallel.hpp"
#include "treegraph/spatial_index.hpp"

namespace treegraph {

MatterScores score_matter(const TreeGraph& graph, const PathAggregate& aggregate) {
  if (aggregate.count_max.size() != graph.node_count()) {
    throw Error("score_matter: aggregate does not match graph");
  }
  MatterScores out;
  out.max_count = aggregate.max_count_max;
  out.node_scores.assign(graph.node_count(), 0.0);
  if (out.max_count <= 1) {
    out.diagnostic = "degenerate participation: every node lies on at most one path";
    return out;
  }
  const double log_pm = std::log(static_cast<double>(out.max_count));
  for (std::size_t v = 0; v < graph.node_count(); ++v) {
    const std::uint64_t c = aggregate.count_max[v];
    if (c > 1) out.node_scores[v] = std::log(static_cast<double>(c)) / log_pm;
  }
  return out;
}

MatterScores score_matter(const TreeGraph& graph, std::span<const TrunkPoint> trunks,
                          int threads) {
  if (trunks.empty()) throw Error("score_matter: at least one trunk is required");
  const std::vector<NodeId> anchors = anchor_trunks(graph, trunks, graph.edge_radius);
  const PathAggregate agg = aggregate_paths(graph, anchors, threads);
  return score_matter(graph, agg);
}

std::vector<double> smooth_scores(const PointCloud& cloud, const TreeGraph& graph,
                                  std::span<const double> node_scores, double radius,
                                  int threads) {
  if (node_scores.size() != graph.node_count()) {
    throw Error("smooth_scores: score count does not match graph");
  }
  if (!(radius > 0.0)) throw Error("smooth_scores: radius must be positive");
  const SpatialIndex index(graph.positions, radius);
  std::vector<double> out(cloud.size(), std::numeric_limits<double>::quiet_NaN());
  parallel_chunks(cloud.size(), threads, [&](std::size_t begin, std::size_t end) {
    std::vector<std::uint32_t> hits;
    for (std::size_t i = begin; i < end; ++i) {
      index.radius_neighbors(cloud.points[i].position(), radius, hits);
      if (hits.empty()) continue;
      double sum = 0.0;  // ids ascend, so the summation order is fixed
      for (const std::uint32_t h : hits) sum += node_scores[h];
      out[i] = sum / static_cast<double>(hits.size());
    }
  });
  return out;
}

std::vector<MatterClass> classify_matter(const PointCloud& cloud, const TreeGraph& graph,
                                         std::span<const double> node_scores,
                                         std::span<const std::uint8_t> is_ground,
                                         const ClassifyParams& params) {
  if (is_ground.size() != cloud.size()) throw Error("classify_matter: ground mask size mismatch");
  const std::vector<double> smoothed =
      smooth_scores(cloud, graph, node_scores, params.smoothing_radius, params.threads);
  std::vector<MatterClass> classes(cloud.size(), MatterClass::unknown);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (is_ground[i] != 0) {
      classes[i] = MatterClass::ground;
    } else if (!std::isnan(smoothed[i])) {
      classes[i] = smoothed[i] >= params.threshold ? MatterClass::woody : MatterClass::leafy;
    }
  }
  return classes;
}

CalibrationReport calibrate_threshold(std::span<const double> point_scores,
                                      std::span<const MatterClass> truth) {
  if (point_scores.size() != truth.size()) throw Error("calibrate: size mismatch");
  CalibrationReport rep;
  std::vector<std::pair<double, bool>> samples;  // (score, is_woody)
  double wsum = 0.0, lsum = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (std::isnan(point_scores[i])) continue;
    if (truth[i] == MatterClass::woody) {
      ++rep.woody_points;
      wsum += point_scores[i];
      samples.emplace_back(point_scores[i], true);
    } else if (truth[i] == MatterClass::leafy) {
      ++rep.leafy_points;
      lsum += point_scores[i];
      samples.emplace_back(point_scores[i], false);
    }
  }
  if (rep.woody_points == 0 || rep.leafy_points == 0) {
    throw Error("calibrate: need scored points of both classes");
  }
  rep.woody_mean = wsum / static_cast<double>(rep.woody_points);
  rep.leafy_mean = lsum / static_cast<double>(rep.leafy_points);
  double wvar = 0.0, lvar = 0.0;
  for (const auto& [score, woody] : samples) {
    const double d = score - (woody ? rep.woody_mean : rep.leafy_mean);
    (woody ? wvar : lvar) += d * d;
  }
  rep.woody_stddev = std::sqrt(wvar / static_cast<double>(rep.woody_points));
  rep.leafy_stddev = std::sqrt(lvar / static_cast<double>(rep.leafy_points));
  rep.midpoint_threshold = 0.5 * (rep.woody_mean + rep.leafy_mean);

  // F1 sweep: classify woody iff score >= t, for t over the observed scores.
  // Scanning scores descending updates TP/FP incrementally.
  std::sort(samples.begin(), samples.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });
  const double total_woody = static_cast<double>(rep.woody_points);
  double tp = 0.0, fp = 0.0;
  rep.best_f1 = -1.0;
  std::size_t i = 0;
  while (i < samples.size()) {
    const double t = samples[i].first;
    for (; i < samples.size() && samples[i].first == t; ++i) {
      (samples[i].second ? tp : fp) += 1.0;
    }
    const double fn = total_woody - tp;
    const double f1 = (2.0 * tp + fp + fn) > 0.0 ? 2.0 * tp / (2.0 * tp + fp + fn) : 0.0;
    if (f1 > rep.best_f1) {
      rep.best_f1 = f1;
      rep.best_f1_threshold = t;
    }
  }
  return rep;
}

}  // namespace treegraph
