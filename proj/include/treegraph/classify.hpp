// Woody/leafy matter classification from path participation counts.
#pragma once

#include <span>
#include <string>
#include <vector>

#include "treegraph/graph.hpp"
#include "treegraph/types.hpp"

namespace treegraph {

struct MatterScores {
  std::vector<double> node_scores;  // S_x in [0, 1]; 0 for unreached nodes
  std::uint64_t max_count = 0;      // p_M (cross-source max participation)
  std::string diagnostic;           // set for the degenerate p_M <= 1 case
};

// S_x = log(p_x) / log(p_M), with p_x the cross-source max participation.
MatterScores score_matter(const TreeGraph& graph, const PathAggregate& aggregate);
// Anchors the trunks (within edge radius) and aggregates over all nodes.
MatterScores score_matter(const TreeGraph& graph, std::span<const TrunkPoint> trunks,
                          int threads = 0);

// Per-point mean of node scores within `radius`; NaN when no node is in range.
std::vector<double> smooth_scores(const PointCloud& cloud, const TreeGraph& graph,
                                  std::span<const double> node_scores, double radius,
                                  int threads = 0);

struct ClassifyParams {
  double threshold = 0.216;
  double smoothing_radius = 0.3;
  int threads = 0;
};

// Ground points keep class ground; points with no node within the smoothing
// radius come back unknown; otherwise woody iff smoothed score >= threshold.
std::vector<MatterClass> classify_matter(const PointCloud& cloud, const TreeGraph& graph,
                                         std::span<const double> node_scores,
                                         std::span<const std::uint8_t> is_ground,
                                         const ClassifyParams& params = {});

// Per-class score statistics on labeled data plus two threshold suggestions.
struct CalibrationReport {
  std::uint64_t woody_points = 0;
  std::uint64_t leafy_points = 0;
  double woody_mean = 0.0;
  double woody_stddev = 0.0;
  double leafy_mean = 0.0;
  double leafy_stddev = 0.0;
  double midpoint_threshold = 0.0;  // midpoint of the class means
  double best_f1_threshold = 0.0;   // argmax of woody F1 over observed scores
  double best_f1 = 0.0;
};

CalibrationReport calibrate_threshold(std::span<const double> point_scores,
                                      std::span<const MatterClass> truth);

}  // namespace treegraph
