#include "treegraph/graph.hpp"

#include <algorithm>
#include <cstdio>
#include <mutex>
#include <numeric>
#include <queue>

#include "treegraph/io.hpp"

#include "treegraph/parallel.hpp"
#include "treegraph/spatial_index.hpp"

namespace treegraph {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using HeapEntry = std::pair<double, NodeId>;  // (key, node), min-heap
using MinHeap = std::priority_queue<HeapEntry, std::vector<HeapEntry>, std::greater<>>;

// Canonical predecessors: every node's parent chain must spell the
// lexicographically smallest node-id sequence among its tied optimal paths,
// matching what shortest_path returns for that (source, node) pair. Lex-min
// paths are prefix-closed, so they form a tree; a depth-first walk over the
// tight-edge DAG (dist[v] + cost == dist[u] with (dist, id) strictly
// increasing) that tries successors in ascending id order discovers each node
// along exactly that path, so the first visit fixes the parent. Nodes the
// tight DAG misses (possible only through zero-length edges that reverse id
// order) keep their relaxation parent.
void canonicalize_parents(const TreeGraph& graph, ShortestPathTree& tree, NodeId source) {
  const std::size_t n = graph.node_count();
  std::vector<std::uint8_t> visited(n, 0);
  std::vector<std::uint32_t> edge_pos(n, 0);  // resume point per stacked node
  std::vector<NodeId> stack;
  stack.push_back(source);
  visited[static_cast<std::size_t>(source)] = 1;
  while (!stack.empty()) {
    const NodeId v = stack.back();
    const double dv = tree.dist[static_cast<std::size_t>(v)];
    const auto nbrs = graph.neighbors(v);
    const auto costs = graph.costs(v);
    bool descended = false;
    for (std::uint32_t& e = edge_pos[static_cast<std::size_t>(v)]; e < nbrs.size();) {
      const NodeId u = nbrs[e];
      const double c = costs[e];
      ++e;
      const double du = tree.dist[static_cast<std::size_t>(u)];
      if (visited[static_cast<std::size_t>(u)] != 0) continue;
      if (dv + c != du) continue;
      if (!(dv < du || (dv == du && v < u))) continue;
      visited[static_cast<std::size_t>(u)] = 1;
      tree.parent[static_cast<std::size_t>(u)] = v;
      stack.push_back(u);
      descended = true;
      break;  // adjacency ascends, so the first unvisited tight edge is lex-min
    }
    if (!descended) stack.pop_back();
  }
}

}  // namespace

EdgeWeighting parse_weighting(const std::string& name) {
  if (name == "none") return EdgeWeighting::none;
  if (name == "density") return EdgeWeighting::density;
  if (name == "cosine") return EdgeWeighting::cosine;
  throw Error("unknown weighting '" + name + "' (expected none, density or cosine)");
}

const char* weighting_name(EdgeWeighting w) {
  switch (w) {
    case EdgeWeighting::none: return "none";
    case EdgeWeighting::density: return "density";
    case EdgeWeighting::cosine: return "cosine";
  }
  return "none";
}

TreeGraph build_graph(std::span<const Vec3> node_positions, const GraphOptions& opts,
                      const FeatureSet* features) {
  if (node_positions.empty()) throw Error("build_graph: no nodes");
  if (!(opts.edge_radius > 0.0)) throw Error("build_graph: edge radius must be positive");
  if (opts.weighting != EdgeWeighting::none) {
    if (features == nullptr || features->per_node.size() != node_positions.size()) {
      throw Error("build_graph: weighted build requires one feature vector per node");
    }
  }

  TreeGraph graph;
  graph.positions.assign(node_positions.begin(), node_positions.end());
  graph.edge_radius = opts.edge_radius;
  graph.weighting = opts.weighting;

  const std::size_t n = node_positions.size();
  const SpatialIndex index(graph.positions, opts.edge_radius);
  std::vector<std::vector<NodeId>> nbrs(n);
  parallel_chunks(n, opts.threads, [&](std::size_t begin, std::size_t end) {
    std::vector<std::uint32_t> hits;
    for (std::size_t v = begin; v < end; ++v) {
      index.radius_neighbors(graph.positions[v], opts.edge_radius, hits);
      auto& out = nbrs[v];
      out.reserve(hits.size() > 0 ? hits.size() - 1 : 0);
      for (const std::uint32_t h : hits) {
        if (h != v) out.push_back(static_cast<NodeId>(h));
      }
    }
  });

  graph.adj_offsets.resize(n + 1, 0);
  for (std::size_t v = 0; v < n; ++v) graph.adj_offsets[v + 1] = graph.adj_offsets[v] + nbrs[v].size();
  graph.adj_nodes.resize(graph.adj_offsets[n]);
  graph.adj_costs.resize(graph.adj_offsets[n]);

  FeatureScaling scaling;
  if (opts.weighting == EdgeWeighting::cosine) scaling = FeatureScaling::fit(*features);

  // Costs are computed once per unordered pair (a < b) and mirrored, so the
  // adjacency stays bit-symmetric. Diagnostics counted on the a < b side only.
  parallel_chunks(n, opts.threads, [&](std::size_t begin, std::size_t end) {
    WeightDiagnostics local_diag;
    for (std::size_t v = begin; v < end; ++v) {
      const std::size_t base = graph.adj_offsets[v];
      for (std::size_t e = 0; e < nbrs[v].size(); ++e) {
        const NodeId u = nbrs[v][e];
        graph.adj_nodes[base + e] = u;
        if (static_cast<std::size_t>(u) > v) {
          const double length = distance(graph.positions[v], graph.positions[static_cast<std::size_t>(u)]);
          double weight = 0.0;
          switch (opts.weighting) {
            case EdgeWeighting::none:
              break;
            case EdgeWeighting::density:
              weight = density_weight(features->per_node[v],
                                      features->per_node[static_cast<std::size_t>(u)],
                                      features->max_point_count);
              break;
            case EdgeWeighting::cosine:
              weight = cosine_weight(features->per_node[v],
                                     features->per_node[static_cast<std::size_t>(u)], scaling,
                                     opts.feature_mask, &local_diag);
              break;
          }
          graph.adj_costs[base + e] = length * (1.0 + weight);
        }
      }
    }
    if (local_diag.zero_norm_pairs > 0) {
      static std::mutex m;
      std::lock_guard<std::mutex> lock(m);
      graph.weight_diagnostics.zero_norm_pairs += local_diag.zero_norm_pairs;
    }
  });

  // Mirror costs from the a < b side.
  for (std::size_t v = 0; v < n; ++v) {
    const std::size_t base = graph.adj_offsets[v];
    for (std::size_t e = 0; e < nbrs[v].size(); ++e) {
      const NodeId u = nbrs[v][e];
      if (static_cast<std::size_t>(u) < v) {
        const auto un = graph.neighbors(u);
        const auto it = std::lower_bound(un.begin(), un.end(), static_cast<NodeId>(v));
        graph.adj_costs[base + e] =
            graph.adj_costs[graph.adj_offsets[static_cast<std::size_t>(u)] +
                            static_cast<std::size_t>(it - un.begin())];
      }
    }
  }
  return graph;
}

TreeGraph build_graph(const VoxelGrid& grid, const GraphOptions& opts, const FeatureSet* features) {
  if (opts.edge_radius < grid.cell_size) {
    std::fprintf(stderr,
                 "warning: edge radius %.3g is below the voxel size %.3g; "
                 "graph may be mostly disconnected\n",
                 opts.edge_radius, grid.cell_size);
  }
  return build_graph(grid.node_positions, opts, features);
}

ShortestPathTree dijkstra_tree(const TreeGraph& graph, NodeId source) {
  const std::size_t n = graph.node_count();
  if (source < 0 || static_cast<std::size_t>(source) >= n) {
    throw Error("dijkstra_tree: source node out of range");
  }
  ShortestPathTree tree;
  tree.dist.assign(n, kInf);
  tree.parent.assign(n, -1);
  tree.dist[static_cast<std::size_t>(source)] = 0.0;
  MinHeap heap;
  heap.emplace(0.0, source);
  while (!heap.empty()) {
    const auto [d, v] = heap.top();
    heap.pop();
    if (d != tree.dist[static_cast<std::size_t>(v)]) continue;  // stale entry
    const auto nbrs = graph.neighbors(v);
    const auto costs = graph.costs(v);
    for (std::size_t e = 0; e < nbrs.size(); ++e) {
      const NodeId u = nbrs[e];
      const double nd = d + costs[e];
      if (nd < tree.dist[static_cast<std::size_t>(u)]) {
        tree.dist[static_cast<std::size_t>(u)] = nd;
        tree.parent[static_cast<std::size_t>(u)] = v;
        heap.emplace(nd, u);
      }
    }
  }
  canonicalize_parents(graph, tree, source);
  return tree;
}

std::vector<std::uint64_t> count_paths(const ShortestPathTree& tree,
                                       std::span<const std::uint8_t> target_mask) {
  const std::size_t n = tree.dist.size();
  if (target_mask.size() != n) throw Error("count_paths: mask size mismatch");
  std::vector<std::uint64_t> count(n, 0);
  for (std::size_t v = 0; v < n; ++v) {
    if (target_mask[v] != 0 && tree.dist[v] != kInf) count[v] = 1;
  }
  // Leaf-to-root accumulation over the parent forest: a node flushes into its
  // parent once all of its own children have flushed, so no ordering
  // assumption on dist or ids is needed.
  std::vector<std::uint32_t> pending(n, 0);
  for (std::size_t v = 0; v < n; ++v) {
    if (tree.parent[v] >= 0) ++pending[static_cast<std::size_t>(tree.parent[v])];
  }
  std::vector<std::uint32_t> ready;
  ready.reserve(n);
  for (std::size_t v = 0; v < n; ++v) {
    if (pending[v] == 0) ready.push_back(static_cast<std::uint32_t>(v));
  }
  for (std::size_t i = 0; i < ready.size(); ++i) {
    const std::uint32_t v = ready[i];
    const NodeId p = tree.parent[v];
    if (p < 0) continue;
    count[static_cast<std::size_t>(p)] += count[v];
    if (--pending[static_cast<std::size_t>(p)] == 0) {
      ready.push_back(static_cast<std::uint32_t>(p));
    }
  }
  return count;
}

PathAggregate aggregate_paths(const TreeGraph& graph, std::span<const NodeId> sources,
                              std::span<const std::uint8_t> target_mask, int threads) {
  if (sources.empty()) throw Error("aggregate_paths: no sources");
  const std::size_t n = graph.node_count();
  if (target_mask.size() != n) throw Error("aggregate_paths: mask size mismatch");

  PathAggregate agg;
  agg.count_sum.assign(n, 0);
  agg.count_max.assign(n, 0);
  agg.min_cost.assign(n, kInf);
  agg.best_source.assign(n, -1);

  // Sources are processed in blocks: searches run in parallel, merges are
  // sequential in source order, so the result is independent of threading.
  const std::size_t block = std::max<std::size_t>(4, static_cast<std::size_t>(resolve_threads(threads)));
  std::vector<ShortestPathTree> trees(std::min(block, sources.size()));
  std::vector<std::vector<std::uint64_t>> counts(trees.size());
  for (std::size_t start = 0; start < sources.size(); start += block) {
    const std::size_t count_in_block = std::min(block, sources.size() - start);
    parallel_for(count_in_block, threads, [&](std::size_t k) {
      trees[k] = dijkstra_tree(graph, sources[start + k]);
      counts[k] = count_paths(trees[k], target_mask);
    });
    for (std::size_t k = 0; k < count_in_block; ++k) {
      const std::int32_t source_index = static_cast<std::int32_t>(start + k);
      const auto& tree = trees[k];
      const auto& cnt = counts[k];
      for (std::size_t v = 0; v < n; ++v) {
        agg.count_sum[v] += cnt[v];
        agg.count_max[v] = std::max(agg.count_max[v], cnt[v]);
        if (tree.dist[v] < agg.min_cost[v]) {
          agg.min_cost[v] = tree.dist[v];
          agg.best_source[v] = source_index;
        }
      }
    }
  }
  for (std::size_t v = 0; v < n; ++v) {
    agg.max_count_sum = std::max(agg.max_count_sum, agg.count_sum[v]);
    agg.max_count_max = std::max(agg.max_count_max, agg.count_max[v]);
  }
  return agg;
}

PathAggregate aggregate_paths(const TreeGraph& graph, std::span<const NodeId> sources,
                              int threads) {
  const std::vector<std::uint8_t> all(graph.node_count(), 1);
  return aggregate_paths(graph, sources, all, threads);
}

PathResult shortest_path(const TreeGraph& graph, NodeId source, NodeId target) {
  const std::size_t n = graph.node_count();
  if (source < 0 || static_cast<std::size_t>(source) >= n || target < 0 ||
      static_cast<std::size_t>(target) >= n) {
    throw Error("shortest_path: node out of range");
  }
  PathResult result;
  if (source == target) {
    result.reachable = true;
    result.nodes = {source};
    result.cost = 0.0;
    return result;
  }

  const Vec3 goal = graph.positions[static_cast<std::size_t>(target)];
  std::vector<double> g(n, kInf);
  std::vector<NodeId> parent(n, -1);
  std::vector<std::uint8_t> settled(n, 0);
  g[static_cast<std::size_t>(source)] = 0.0;
  MinHeap heap;  // keyed by f = g + h
  heap.emplace(distance(graph.positions[static_cast<std::size_t>(source)], goal), source);
  double best = kInf;
  // After the target settles, keep expanding until the heap minimum exceeds
  // the optimum so every node on any optimal path has its final g; the
  // canonical backward walk below needs them all settled.
  while (!heap.empty()) {
    const auto [f, v] = heap.top();
    heap.pop();
    if (best < f) break;
    if (settled[static_cast<std::size_t>(v)] != 0) continue;
    settled[static_cast<std::size_t>(v)] = 1;
    if (v == target) best = g[static_cast<std::size_t>(v)];
    const auto nbrs = graph.neighbors(v);
    const auto costs = graph.costs(v);
    for (std::size_t e = 0; e < nbrs.size(); ++e) {
      const NodeId u = nbrs[e];
      if (settled[static_cast<std::size_t>(u)] != 0) continue;
      const double ng = g[static_cast<std::size_t>(v)] + costs[e];
      if (ng < g[static_cast<std::size_t>(u)]) {
        g[static_cast<std::size_t>(u)] = ng;
        parent[static_cast<std::size_t>(u)] = v;
        heap.emplace(ng + distance(graph.positions[static_cast<std::size_t>(u)], goal), u);
      }
    }
  }
  if (g[static_cast<std::size_t>(target)] == kInf) return result;

  result.reachable = true;
  result.cost = g[static_cast<std::size_t>(target)];

  // Lexicographically smallest optimal sequence. An edge u->v is "tight" when
  // g[u] + c == g[v] and (g, id) strictly increases, so tight paths form a
  // DAG and any tight source->target walk reproduces g[target] exactly (its
  // prefix sums are the g values themselves). Mark the nodes that reach the
  // target through tight edges, then walk forward always taking the smallest
  // marked successor; the adjacency lists are id-ascending, so the first hit
  // is the smallest.
  const auto tight = [&](NodeId u, NodeId v, double c) {
    const double du = g[static_cast<std::size_t>(u)];
    const double dv = g[static_cast<std::size_t>(v)];
    return du + c == dv && (du < dv || (du == dv && u < v));
  };
  std::vector<std::uint8_t> reaches(n, 0);
  std::vector<NodeId> stack = {target};
  reaches[static_cast<std::size_t>(target)] = 1;
  while (!stack.empty()) {
    const NodeId v = stack.back();
    stack.pop_back();
    const auto nbrs = graph.neighbors(v);
    const auto costs = graph.costs(v);
    for (std::size_t e = 0; e < nbrs.size(); ++e) {
      const NodeId u = nbrs[e];
      if (settled[static_cast<std::size_t>(u)] == 0 ||
          reaches[static_cast<std::size_t>(u)] != 0) {
        continue;
      }
      if (!tight(u, v, costs[e])) continue;
      reaches[static_cast<std::size_t>(u)] = 1;
      stack.push_back(u);
    }
  }
  if (reaches[static_cast<std::size_t>(source)] != 0) {
    NodeId cur = source;
    result.nodes.push_back(cur);
    while (cur != target) {
      NodeId next = -1;
      const auto nbrs = graph.neighbors(cur);
      const auto costs = graph.costs(cur);
      for (std::size_t e = 0; e < nbrs.size(); ++e) {
        const NodeId u = nbrs[e];
        if (settled[static_cast<std::size_t>(u)] != 0 &&
            reaches[static_cast<std::size_t>(u)] != 0 && tight(cur, u, costs[e])) {
          next = u;
          break;
        }
      }
      if (next < 0) break;
      result.nodes.push_back(next);
      cur = next;
    }
    if (cur == target) return result;
    result.nodes.clear();
  }

  // Accumulated rounding can in principle leave an optimal path without tight
  // prefixes; fall back to the relaxation parents (settle order makes the
  // chain acyclic).
  for (NodeId v = target; v != -1; v = parent[static_cast<std::size_t>(v)]) {
    result.nodes.push_back(v);
    if (v == source) break;
  }
  std::reverse(result.nodes.begin(), result.nodes.end());
  return result;
}

std::vector<NodeId> anchor_trunks(const TreeGraph& graph, std::span<const TrunkPoint> trunks,
                                  double max_dist) {
  if (!(max_dist > 0.0)) throw Error("anchor_trunks: max distance must be positive");
  const SpatialIndex index(graph.positions, max_dist);
  std::vector<NodeId> anchors;
  anchors.reserve(trunks.size());
  std::vector<std::uint32_t> hits;
  for (const auto& trunk : trunks) {
    index.radius_neighbors(trunk.position, max_dist, hits);
    NodeId best = -1;
    double best_d2 = kInf;
    for (const std::uint32_t h : hits) {
      const double d2 = squared_distance(graph.positions[h], trunk.position);
      if (d2 < best_d2) {  // ascending ids, so ties keep the smaller id
        best_d2 = d2;
        best = static_cast<NodeId>(h);
      }
    }
    if (best < 0) {
      throw Error("trunk " + std::to_string(trunk.tree_id) + " at (" +
                  format_double(trunk.position.x) + ", " + format_double(trunk.position.y) +
                  ", " + format_double(trunk.position.z) + "): no graph node within " +
                  format_double(max_dist) + " m");
    }
    anchors.push_back(best);
  }
  return anchors;
}

}  // namespace treegraph
