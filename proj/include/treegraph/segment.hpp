// Per-tree segmentation: every point goes to the trunk with the cheapest
// graph path, with a straight-line closest-trunk fallback for orphans.
#pragma once

#include <span>
#include <vector>

#include "treegraph/graph.hpp"
#include "treegraph/preprocess.hpp"
#include "treegraph/types.hpp"

namespace treegraph {

struct SegmentParams {
  double ground_radius = 1.0;
  double ground_tolerance = 0.15;
  double voxel_size = 0.1;
  double edge_radius = 0.15;
  EdgeWeighting weighting = EdgeWeighting::none;
  FeatureMask feature_mask = FeatureMask::all();
  double enrich_radius = 0.0;  // <= 0 picks 3 * voxel_size
  // Trunks farther than this from every node fail to anchor; <= 0 picks
  // edge_radius (the contract default). The pipeline widens it for detected
  // trunks, which are quantized to the coarse ground grid.
  double anchor_radius = 0.0;
  bool fallback = true;
  int threads = 0;
};

// Full intermediate state, reused by the classification stage so the graph
// and aggregation are built once per run.
struct SegmentationResult {
  std::vector<std::int32_t> labels;  // per point: 0 ground, trunk ids, -1 unknown
  GroundPartition partition;
  VoxelGrid grid;
  FeatureSet features;  // populated only for weighted graphs
  TreeGraph graph;
  std::vector<TrunkPoint> trunks;  // sorted by tree id, aligned with anchors
  std::vector<NodeId> anchors;
  PathAggregate aggregate;
  std::vector<std::int32_t> node_labels;
};

SegmentationResult segment_trees_full(const PointCloud& cloud, std::span<const TrunkPoint> trunks,
                                      const SegmentParams& params = {});

std::vector<std::int32_t> segment_trees(const PointCloud& cloud, std::span<const TrunkPoint> trunks,
                                        const SegmentParams& params = {});

// Nearest trunk by straight-line distance; ground points get id 0. Ties go to
// the smaller tree id.
std::vector<std::int32_t> closest_trunk_baseline(const PointCloud& cloud,
                                                 std::span<const TrunkPoint> trunks,
                                                 std::span<const std::uint8_t> is_ground);
// Convenience variant computing the ground partition with the given params.
std::vector<std::int32_t> closest_trunk_baseline(const PointCloud& cloud,
                                                 std::span<const TrunkPoint> trunks,
                                                 double ground_radius = 1.0,
                                                 double ground_tolerance = 0.15);

}  // namespace treegraph
