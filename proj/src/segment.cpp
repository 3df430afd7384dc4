#include "treegraph/segment.hpp"

#include <algorithm>
#include <limits>

namespace treegraph {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::int32_t nearest_trunk_id(const Vec3& p, std::span<const TrunkPoint> trunks_by_id) {
  double best = kInf;
  std::int32_t best_id = kUnknownTreeId;
  for (const auto& t : trunks_by_id) {  // ascending tree id: ties keep the smaller
    const double d = squared_distance(p, t.position);
    if (d < best) {
      best = d;
      best_id = t.tree_id;
    }
  }
  return best_id;
}

}  // namespace

SegmentationResult segment_trees_full(const PointCloud& cloud, std::span<const TrunkPoint> trunks,
                                      const SegmentParams& params) {
  if (trunks.empty()) throw Error("segment: at least one trunk is required");
  SegmentationResult res;
  res.trunks.assign(trunks.begin(), trunks.end());
  std::sort(res.trunks.begin(), res.trunks.end(),
            [](const TrunkPoint& a, const TrunkPoint& b) { return a.tree_id < b.tree_id; });

  res.partition = remove_ground(cloud, params.ground_radius, params.ground_tolerance);
  res.labels.assign(cloud.size(), kUnknownTreeId);
  for (const PointId id : res.partition.ground_ids) res.labels[id] = kGroundTreeId;
  if (res.partition.nonground_ids.empty()) return res;  // all ground

  res.grid = voxelize(cloud, res.partition.nonground_ids, params.voxel_size);

  GraphOptions opts;
  opts.edge_radius = params.edge_radius;
  opts.weighting = params.weighting;
  opts.feature_mask = params.feature_mask;
  opts.threads = params.threads;
  const FeatureSet* features = nullptr;
  if (params.weighting != EdgeWeighting::none) {
    res.features = compute_features(cloud, res.grid, params.enrich_radius, params.threads);
    features = &res.features;
  }
  res.graph = build_graph(res.grid, opts, features);

  const double anchor_radius =
      params.anchor_radius > 0.0 ? params.anchor_radius : params.edge_radius;
  res.anchors = anchor_trunks(res.graph, res.trunks, anchor_radius);
  res.aggregate = aggregate_paths(res.graph, res.anchors, params.threads);

  const std::size_t n = res.graph.node_count();
  res.node_labels.assign(n, kUnknownTreeId);
  for (std::size_t v = 0; v < n; ++v) {
    const std::int32_t source = res.aggregate.best_source[v];
    if (source >= 0) {
      res.node_labels[v] = res.trunks[static_cast<std::size_t>(source)].tree_id;
    } else if (params.fallback) {
      res.node_labels[v] = nearest_trunk_id(res.graph.positions[v], res.trunks);
    }
  }

  const std::vector<std::int32_t> point_labels =
      propagate_to_points(res.grid, res.node_labels, cloud.size(), kUnknownTreeId);
  for (const PointId id : res.partition.nonground_ids) res.labels[id] = point_labels[id];
  return res;
}

std::vector<std::int32_t> segment_trees(const PointCloud& cloud, std::span<const TrunkPoint> trunks,
                                        const SegmentParams& params) {
  return segment_trees_full(cloud, trunks, params).labels;
}

std::vector<std::int32_t> closest_trunk_baseline(const PointCloud& cloud,
                                                 std::span<const TrunkPoint> trunks,
                                                 std::span<const std::uint8_t> is_ground) {
  if (trunks.empty()) throw Error("closest_trunk_baseline: at least one trunk is required");
  if (is_ground.size() != cloud.size()) {
    throw Error("closest_trunk_baseline: ground mask size mismatch");
  }
  std::vector<TrunkPoint> by_id(trunks.begin(), trunks.end());
  std::sort(by_id.begin(), by_id.end(),
            [](const TrunkPoint& a, const TrunkPoint& b) { return a.tree_id < b.tree_id; });
  std::vector<std::int32_t> labels(cloud.size(), kUnknownTreeId);
  for (PointId id = 0; id < cloud.size(); ++id) {
    labels[id] = is_ground[id] != 0 ? kGroundTreeId
                                    : nearest_trunk_id(cloud.points[id].position(), by_id);
  }
  return labels;
}

std::vector<std::int32_t> closest_trunk_baseline(const PointCloud& cloud,
                                                 std::span<const TrunkPoint> trunks,
                                                 double ground_radius, double ground_tolerance) {
  const GroundPartition partition = remove_ground(cloud, ground_radius, ground_tolerance);
  return closest_trunk_baseline(cloud, trunks, partition.is_ground);
}

}  // namespace treegraph
