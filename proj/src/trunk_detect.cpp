#include "treegraph/trunk_detect.hpp"

#include <algorithm>
#include <limits>

#include "treegraph/graph.hpp"
#include "treegraph/preprocess.hpp"

namespace treegraph {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Farthest-point greedy subsample with minimum spacing. Seeded at the lowest
// candidate id; each round adds the candidate farthest from the selection
// (smaller id on ties) until everything left is within `spacing` of a pick.
std::vector<NodeId> subsample_sources(const std::vector<NodeId>& candidates,
                                      const std::vector<Vec3>& positions, double spacing) {
  std::vector<NodeId> picked;
  if (candidates.empty()) return picked;
  std::vector<double> min_d2(candidates.size(), kInf);
  std::size_t next = 0;  // lowest id first (candidates ascend)
  const double spacing2 = spacing * spacing;
  while (true) {
    const NodeId chosen = candidates[next];
    picked.push_back(chosen);
    double far_d2 = -1.0;
    std::size_t far_at = 0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      const double d2 = squared_distance(positions[static_cast<std::size_t>(candidates[i])],
                                         positions[static_cast<std::size_t>(chosen)]);
      min_d2[i] = std::min(min_d2[i], d2);
      if (min_d2[i] > far_d2) {
        far_d2 = min_d2[i];
        far_at = i;
      }
    }
    if (far_d2 < spacing2) break;
    next = far_at;
  }
  return picked;
}

}  // namespace

TrunkDetectionResult detect_trunks(const PointCloud& cloud, const TrunkDetectionConfig& cfg) {
  if (cloud.empty()) throw Error("detect_trunks: empty cloud");
  if (!(cfg.coarse_voxel > 0.0) || !(cfg.edge_radius > 0.0) || !(cfg.source_spacing > 0.0) ||
      !(cfg.local_min_radius > 0.0) || !(cfg.merge_distance > 0.0)) {
    throw Error("detect_trunks: radii must be positive");
  }

  // Work in a min-corner-anchored frame so results are invariant to rigid XY
  // translation; emitted positions are translated back at the end.
  double ox = kInf, oy = kInf;
  for (const auto& p : cloud.points) {
    ox = std::min(ox, p.x);
    oy = std::min(oy, p.y);
  }
  PointCloud local = cloud;
  for (auto& p : local.points) {
    p.x -= ox;
    p.y -= oy;
  }

  TrunkDetectionResult result;
  const GroundPartition partition = remove_ground(local, cfg.ground_radius, cfg.ground_tolerance);
  if (partition.ground_ids.empty()) {
    result.diagnostic = "no ground points found";
    return result;
  }

  std::vector<PointId> all_ids(local.size());
  for (PointId i = 0; i < local.size(); ++i) all_ids[i] = i;
  const VoxelGrid grid = voxelize(local, all_ids, cfg.coarse_voxel);

  // A node is ground when at least half its members are ground points.
  const std::size_t n = grid.node_count();
  std::vector<std::uint8_t> node_is_ground(n, 0);
  for (std::size_t v = 0; v < n; ++v) {
    std::size_t ground = 0;
    for (const PointId id : grid.members[v]) ground += partition.is_ground[id];
    node_is_ground[v] = 2 * ground >= grid.members[v].size() ? 1 : 0;
  }

  GraphOptions opts;
  opts.edge_radius = cfg.edge_radius;
  opts.threads = cfg.threads;
  const TreeGraph graph = build_graph(grid, opts);

  std::vector<NodeId> candidates;
  for (std::size_t v = 0; v < n; ++v) {
    if (node_is_ground[v] != 0) continue;
    const Vec3& pos = grid.node_positions[v];
    const double ground_z = partition.ground_height(pos.x, pos.y);
    if (ground_z == kInf || pos.z - ground_z < cfg.source_min_height) continue;
    candidates.push_back(static_cast<NodeId>(v));
  }
  if (candidates.empty()) {
    result.diagnostic = "no canopy source nodes above the height floor";
    return result;
  }
  const std::vector<NodeId> sources =
      subsample_sources(candidates, grid.node_positions, cfg.source_spacing);

  const PathAggregate agg = aggregate_paths(graph, sources, node_is_ground, cfg.threads);

  // Ground nodes scored by the cheapest path from any source; trunks show up
  // as local minima of that field.
  std::vector<NodeId> ground_nodes;
  for (std::size_t v = 0; v < n; ++v) {
    if (node_is_ground[v] != 0) ground_nodes.push_back(static_cast<NodeId>(v));
  }
  const SpatialIndex ground_index(
      [&] {
        std::vector<Vec3> pos;
        pos.reserve(ground_nodes.size());
        for (const NodeId v : ground_nodes) pos.push_back(grid.node_positions[static_cast<std::size_t>(v)]);
        return pos;
      }(),
      cfg.local_min_radius);

  std::vector<NodeId> minima;
  std::vector<std::uint32_t> hits;
  for (std::size_t gi = 0; gi < ground_nodes.size(); ++gi) {
    const NodeId v = ground_nodes[gi];
    const double score = agg.min_cost[static_cast<std::size_t>(v)];
    if (score == kInf) continue;
    ground_index.radius_neighbors(grid.node_positions[static_cast<std::size_t>(v)],
                                  cfg.local_min_radius, hits);
    bool is_min = true;
    for (const std::uint32_t h : hits) {
      const NodeId u = ground_nodes[h];
      if (u == v) continue;
      const double other = agg.min_cost[static_cast<std::size_t>(u)];
      if (other < score || (other == score && u < v)) {
        is_min = false;
        break;
      }
    }
    if (is_min) minima.push_back(v);
  }
  if (minima.empty()) {
    result.diagnostic = "no ground node reachable from any source";
    return result;
  }

  // Merge minima closer than the threshold, keeping the lowest score.
  std::sort(minima.begin(), minima.end(), [&agg](NodeId a, NodeId b) {
    const double sa = agg.min_cost[static_cast<std::size_t>(a)];
    const double sb = agg.min_cost[static_cast<std::size_t>(b)];
    if (sa != sb) return sa < sb;
    return a < b;
  });
  std::vector<NodeId> accepted;
  for (const NodeId v : minima) {
    bool keep = true;
    for (const NodeId u : accepted) {
      if (distance(grid.node_positions[static_cast<std::size_t>(v)],
                   grid.node_positions[static_cast<std::size_t>(u)]) <= cfg.merge_distance) {
        keep = false;
        break;
      }
    }
    if (keep) accepted.push_back(v);
  }

  result.trunks.reserve(accepted.size());
  std::int32_t next_id = 1;
  for (const NodeId v : accepted) {
    const Vec3& pos = grid.node_positions[static_cast<std::size_t>(v)];
    result.trunks.push_back({{pos.x + ox, pos.y + oy, pos.z}, next_id++});
  }
  return result;
}

}  // namespace treegraph
