// Radius graph over voxel nodes and aggregated shortest-path searches.
#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "treegraph/features.hpp"
#include "treegraph/preprocess.hpp"
#include "treegraph/types.hpp"

namespace treegraph {

using NodeId = std::int32_t;

enum class EdgeWeighting { none, density, cosine };

EdgeWeighting parse_weighting(const std::string& name);
const char* weighting_name(EdgeWeighting w);

struct GraphOptions {
  double edge_radius = 0.15;
  EdgeWeighting weighting = EdgeWeighting::none;
  FeatureMask feature_mask = FeatureMask::all();
  int threads = 0;
};

// Undirected radius graph in CSR form. Neighbor lists are ascending by node
// id; node order matches the grid's lexicographic cell order.
struct TreeGraph {
  std::vector<Vec3> positions;
  std::vector<std::size_t> adj_offsets;  // size node_count() + 1
  std::vector<NodeId> adj_nodes;
  std::vector<double> adj_costs;
  double edge_radius = 0.15;
  EdgeWeighting weighting = EdgeWeighting::none;
  WeightDiagnostics weight_diagnostics;

  std::size_t node_count() const { return positions.size(); }
  std::span<const NodeId> neighbors(NodeId n) const {
    return {adj_nodes.data() + adj_offsets[static_cast<std::size_t>(n)],
            adj_nodes.data() + adj_offsets[static_cast<std::size_t>(n) + 1]};
  }
  std::span<const double> costs(NodeId n) const {
    return {adj_costs.data() + adj_offsets[static_cast<std::size_t>(n)],
            adj_costs.data() + adj_offsets[static_cast<std::size_t>(n) + 1]};
  }
};

// Weighted builds require features (error otherwise).
TreeGraph build_graph(std::span<const Vec3> node_positions, const GraphOptions& opts = {},
                      const FeatureSet* features = nullptr);
TreeGraph build_graph(const VoxelGrid& grid, const GraphOptions& opts = {},
                      const FeatureSet* features = nullptr);

struct PathResult {
  bool reachable = false;
  std::vector<NodeId> nodes;  // source..target when reachable
  double cost = std::numeric_limits<double>::infinity();
};

// A* with the Euclidean heuristic (admissible since cost >= length). Equal-cost
// ties resolve to the canonical path: the lexicographically smallest node-id
// sequence among all minimum-cost paths.
PathResult shortest_path(const TreeGraph& graph, NodeId source, NodeId target);

// Single-source expansion with canonical predecessors: every node's parent
// chain spells the same lexicographically smallest optimal path that
// shortest_path would return for it. parent is -1 for the source and for
// unreached nodes.
struct ShortestPathTree {
  std::vector<double> dist;     // +inf when unreached
  std::vector<NodeId> parent;
};

ShortestPathTree dijkstra_tree(const TreeGraph& graph, NodeId source);

// Number of target-terminated canonical paths traversing each node.
std::vector<std::uint64_t> count_paths(const ShortestPathTree& tree,
                                       std::span<const std::uint8_t> target_mask);

struct PathAggregate {
  // Participation counts: per-source sum and cross-source max.
  std::vector<std::uint64_t> count_sum;
  std::vector<std::uint64_t> count_max;
  std::vector<double> min_cost;       // +inf when unreached from every source
  std::vector<std::int32_t> best_source;  // index into the sources list, -1 unreached
  std::uint64_t max_count_sum = 0;
  std::uint64_t max_count_max = 0;
};

// Per-source shortest-path trees merged deterministically in source order
// (strict minimum for costs, so the earliest source wins ties).
PathAggregate aggregate_paths(const TreeGraph& graph, std::span<const NodeId> sources,
                              std::span<const std::uint8_t> target_mask, int threads = 0);
// All nodes as targets.
PathAggregate aggregate_paths(const TreeGraph& graph, std::span<const NodeId> sources,
                              int threads = 0);

// Nearest node within max_dist per trunk, error naming the trunk otherwise.
std::vector<NodeId> anchor_trunks(const TreeGraph& graph, std::span<const TrunkPoint> trunks,
                                  double max_dist);

}  // namespace treegraph
