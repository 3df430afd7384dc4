#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <vector>

#include "test_support.hpp"
#include "treegraph/features.hpp"
#include "treegraph/graph.hpp"
#include "treegraph/preprocess.hpp"

using namespace treegraph;

namespace {

struct AdjList {
  std::vector<std::vector<std::pair<int, double>>> adj;
};

AdjList adjacency_of(const TreeGraph& g) {
  AdjList out;
  out.adj.resize(g.node_count());
  for (NodeId v = 0; v < static_cast<NodeId>(g.node_count()); ++v) {
    const auto nbrs = g.neighbors(v);
    const auto costs = g.costs(v);
    for (std::size_t e = 0; e < nbrs.size(); ++e) {
      out.adj[static_cast<std::size_t>(v)].emplace_back(nbrs[e], costs[e]);
    }
  }
  return out;
}

// Exhaustive oracle: enumerate every simple path and keep the cheapest one,
// breaking cost ties toward the lexicographically smaller node-id sequence.
// Integer edge costs keep all arithmetic exact.
struct BestPath {
  double cost = 0.0;
  std::vector<NodeId> nodes;
};

void enumerate_paths(const AdjList& g, int target, std::vector<NodeId>& path,
                     std::vector<char>& used, double cost, std::optional<BestPath>& best) {
  const int at = path.back();
  if (at == target) {
    if (!best || cost < best->cost ||
        (cost == best->cost &&
         std::lexicographical_compare(path.begin(), path.end(), best->nodes.begin(),
                                      best->nodes.end()))) {
      best = BestPath{cost, path};
    }
    return;
  }
  for (const auto& [to, c] : g.adj[static_cast<std::size_t>(at)]) {
    if (used[static_cast<std::size_t>(to)]) continue;
    used[static_cast<std::size_t>(to)] = 1;
    path.push_back(to);
    enumerate_paths(g, target, path, used, cost + c, best);
    path.pop_back();
    used[static_cast<std::size_t>(to)] = 0;
  }
}

std::optional<BestPath> brute_best_path(const TreeGraph& g, NodeId s, NodeId t) {
  const AdjList adj = adjacency_of(g);
  std::vector<NodeId> path = {s};
  std::vector<char> used(g.node_count(), 0);
  used[static_cast<std::size_t>(s)] = 1;
  std::optional<BestPath> best;
  enumerate_paths(adj, t, path, used, 0.0, best);
  return best;
}

TreeGraph random_int_cost_graph(std::mt19937_64& g, int max_nodes) {
  const int n = testutil::uniform_int(g, 2, max_nodes);
  std::vector<std::tuple<int, int, double>> edges;
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      if (testutil::uniform(g, 0.0, 1.0) < 0.35) {
        edges.emplace_back(a, b, static_cast<double>(testutil::uniform_int(g, 1, 6)));
      }
    }
  }
  return testutil::make_graph(n, edges);
}

}  // namespace

TEST_CASE("two nodes within the edge radius share one edge at geometric cost") {
  const std::vector<Vec3> nodes = {{0, 0, 0}, {0.1, 0, 0}};
  GraphOptions opts;
  opts.edge_radius = 0.15;
  const TreeGraph g = build_graph(nodes, opts);
  REQUIRE(g.neighbors(0).size() == 1);
  REQUIRE(g.neighbors(1).size() == 1);
  CHECK(g.neighbors(0)[0] == 1);
  CHECK(g.neighbors(1)[0] == 0);
  CHECK(g.costs(0)[0] == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(g.costs(1)[0] == g.costs(0)[0]);
}

TEST_CASE("nodes beyond the edge radius stay disconnected") {
  const std::vector<Vec3> nodes = {{0, 0, 0}, {0.2, 0, 0}};
  GraphOptions opts;
  opts.edge_radius = 0.15;
  const TreeGraph g = build_graph(nodes, opts);
  CHECK(g.neighbors(0).empty());
  CHECK(g.neighbors(1).empty());
}

TEST_CASE("build_graph validates its inputs") {
  CHECK_THROWS_AS(build_graph(std::vector<Vec3>{}, GraphOptions{}), Error);
  GraphOptions bad;
  bad.edge_radius = 0.0;
  CHECK_THROWS_AS(build_graph(std::vector<Vec3>{{0, 0, 0}}, bad), Error);
  GraphOptions weighted;
  weighted.weighting = EdgeWeighting::cosine;
  CHECK_THROWS_AS(build_graph(std::vector<Vec3>{{0, 0, 0}}, weighted), Error);
}

TEST_CASE("density weighting scales cost by one plus the count contrast") {
  // Cell A holds one point, cell B three; m_max = 3 so the weight is 2/3.
  const PointCloud c = testutil::cloud_from(
      {{0.05, 0.05, 0.05}, {0.15, 0.05, 0.05}, {0.16, 0.05, 0.05}, {0.17, 0.05, 0.05}});
  std::vector<PointId> ids(c.size());
  std::iota(ids.begin(), ids.end(), 0);
  const VoxelGrid grid = voxelize(c, ids, 0.1);
  REQUIRE(grid.node_count() == 2);
  const FeatureSet fs = compute_features(c, grid, 0.3);
  GraphOptions opts;
  opts.edge_radius = 0.15;
  opts.weighting = EdgeWeighting::density;
  const TreeGraph g = build_graph(grid, opts, &fs);
  const double d = distance(grid.node_positions[0], grid.node_positions[1]);
  REQUIRE(g.neighbors(0).size() == 1);
  CHECK(g.costs(0)[0] == doctest::Approx(d * (1.0 + 2.0 / 3.0)).epsilon(1e-12));
}

TEST_CASE("cosine weight vanishes for identical vectors and grows with dissimilarity") {
  FeatureVector a;
  a.linearity = 0.8;
  a.sphericity = 0.1;
  a.point_count = 10;
  FeatureVector b = a;
  FeatureVector c;
  c.linearity = 0.1;
  c.sphericity = 0.9;
  c.point_count = 40;
  FeatureSet set;
  set.per_node = {a, b, c};
  set.max_point_count = 40;
  const FeatureScaling scaling = FeatureScaling::fit(set);
  const FeatureMask mask = FeatureMask::all();
  WeightDiagnostics diag;
  const double w_same = cosine_weight(a, b, scaling, mask, &diag);
  const double w_diff = cosine_weight(a, c, scaling, mask, &diag);
  CHECK(w_same == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  CHECK(w_diff > w_same);
  CHECK(w_diff <= 2.0);
  CHECK(diag.zero_norm_pairs == 0);

  // A vector that scales to all zeros is flagged and treated as neutral.
  FeatureVector zero;  // all features at the fitted minima
  zero.linearity = 0.1;
  zero.sphericity = 0.1;
  zero.point_count = 10;
  const double w_zero = cosine_weight(zero, a, scaling, mask, &diag);
  CHECK(w_zero == 1.0);
  CHECK(diag.zero_norm_pairs == 1);
}

TEST_CASE("shortest path from a node to itself is the trivial path") {
  const TreeGraph g = testutil::make_graph(3, {{0, 1, 1.0}, {1, 2, 1.0}});
  const PathResult r = shortest_path(g, 1, 1);
  CHECK(r.reachable);
  CHECK(r.nodes == std::vector<NodeId>{1});
  CHECK(r.cost == 0.0);
}

TEST_CASE("disconnected targets are reported unreachable") {
  const TreeGraph g = testutil::make_graph(4, {{0, 1, 1.0}, {2, 3, 1.0}});
  const PathResult r = shortest_path(g, 0, 3);
  CHECK_FALSE(r.reachable);
  CHECK(std::isinf(r.cost));
}

TEST_CASE("equal-cost ties resolve to the lexicographically smallest sequence") {
  SUBCASE("diamond") {
    const TreeGraph g =
        testutil::make_graph(4, {{0, 1, 1.0}, {0, 2, 1.0}, {1, 3, 1.0}, {2, 3, 1.0}});
    const PathResult r = shortest_path(g, 0, 3);
    CHECK(r.nodes == std::vector<NodeId>{0, 1, 3});
    CHECK(r.cost == 2.0);
  }
  SUBCASE("greedy-from-the-back gives the wrong answer here") {
    // Both 0,1,9,10 and 0,2,3,10 cost 3. Stepping backward from 10 over
    // smallest optimal predecessors picks 3 and lands on the larger sequence;
    // the forward-lexicographic rule must pick 0,1,9,10.
    const TreeGraph g = testutil::make_graph(
        11,
        {{0, 1, 1.0}, {1, 9, 1.0}, {9, 10, 1.0}, {0, 2, 1.0}, {2, 3, 1.0}, {3, 10, 1.0}});
    const PathResult r = shortest_path(g, 0, 10);
    CHECK(r.cost == 3.0);
    CHECK(r.nodes == std::vector<NodeId>{0, 1, 9, 10});
  }
  SUBCASE("a shorter-id prefix wins even when it means more hops") {
    // 0-1-2-3 and 0-4-3 both cost 3; lexicographically 0,1,... < 0,4,...
    const TreeGraph g = testutil::make_graph(
        5, {{0, 1, 1.0}, {1, 2, 1.0}, {2, 3, 1.0}, {0, 4, 1.5}, {4, 3, 1.5}});
    const PathResult r = shortest_path(g, 0, 3);
    CHECK(r.nodes == std::vector<NodeId>{0, 1, 2, 3});
  }
}

TEST_CASE("search results match exhaustive enumeration on random graphs") {
  auto rng = testutil::rng(2024);
  int checked_pairs = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const TreeGraph g = random_int_cost_graph(rng, 12);
    const int n = static_cast<int>(g.node_count());
    for (NodeId s = 0; s < n; ++s) {
      for (NodeId t = 0; t < n; ++t) {
        const PathResult got = shortest_path(g, s, t);
        const auto want = brute_best_path(g, s, t);
        if (!want) {
          CHECK_FALSE(got.reachable);
          continue;
        }
        ++checked_pairs;
        REQUIRE(got.reachable);
        CHECK(got.cost == want->cost);  // integer arithmetic: exact
        CHECK(got.nodes == want->nodes);
      }
    }
  }
  CHECK(checked_pairs > 1000);
}

TEST_CASE("the predecessor forest spells the same canonical path for every node") {
  auto rng = testutil::rng(77);
  for (int trial = 0; trial < 40; ++trial) {
    const TreeGraph g = random_int_cost_graph(rng, 12);
    const NodeId s = testutil::uniform_int(rng, 0, static_cast<int>(g.node_count()) - 1);
    const ShortestPathTree tree = dijkstra_tree(g, s);
    for (NodeId v = 0; v < static_cast<NodeId>(g.node_count()); ++v) {
      if (std::isinf(tree.dist[static_cast<std::size_t>(v)])) {
        CHECK(tree.parent[static_cast<std::size_t>(v)] == -1);
        continue;
      }
      std::vector<NodeId> chain;
      for (NodeId a = v; a >= 0; a = tree.parent[static_cast<std::size_t>(a)]) chain.push_back(a);
      std::reverse(chain.begin(), chain.end());
      const PathResult direct = shortest_path(g, s, v);
      REQUIRE(direct.reachable);
      CHECK(chain == direct.nodes);
      CHECK(tree.dist[static_cast<std::size_t>(v)] == direct.cost);
    }
  }
}

TEST_CASE("a star around a central node accumulates leaf paths through the center") {
  // Node 0 is the hub; nodes 1..5 are leaves; the source is leaf 1.
  const TreeGraph g = testutil::make_graph(
      6, {{0, 1, 1.0}, {0, 2, 1.0}, {0, 3, 1.0}, {0, 4, 1.0}, {0, 5, 1.0}});
  const std::vector<NodeId> sources = {1};
  const PathAggregate agg = aggregate_paths(g, sources);
  // Each of the 6 node-terminated paths passes the source; 5 pass the hub
  // (4 leaf paths plus the hub's own), and each other leaf only sees its own.
  CHECK(agg.count_sum == std::vector<std::uint64_t>{5, 6, 1, 1, 1, 1});
  CHECK(agg.max_count_sum == 6);
  CHECK(agg.min_cost[1] == 0.0);
  CHECK(agg.min_cost[0] == 1.0);
  CHECK(agg.min_cost[2] == 2.0);
}

TEST_CASE("single-source aggregation equals per-target path counting") {
  auto rng = testutil::rng(99);
  for (int trial = 0; trial < 6; ++trial) {
    // Random geometric graph, up to 200 nodes, built the production way.
    std::vector<Vec3> pts;
    const int n = testutil::uniform_int(rng, 40, 200);
    for (int i = 0; i < n; ++i) {
      pts.push_back({testutil::uniform(rng, 0, 0.8), testutil::uniform(rng, 0, 0.8),
                     testutil::uniform(rng, 0, 0.2)});
    }
    GraphOptions opts;
    opts.edge_radius = 0.15;
    const TreeGraph g = build_graph(pts, opts);
    const NodeId s = testutil::uniform_int(rng, 0, n - 1);
    const std::vector<NodeId> sources = {s};
    const PathAggregate agg = aggregate_paths(g, sources);

    std::vector<std::uint64_t> want(g.node_count(), 0);
    for (NodeId t = 0; t < static_cast<NodeId>(g.node_count()); ++t) {
      const PathResult r = shortest_path(g, s, t);
      if (!r.reachable) continue;
      for (const NodeId v : r.nodes) ++want[static_cast<std::size_t>(v)];
    }
    CHECK(agg.count_sum == want);
    CHECK(agg.count_max == want);  // one source: max == sum
    // Every reachable node terminates its own path, so participation >= 1.
    for (std::size_t v = 0; v < g.node_count(); ++v) {
      if (!std::isinf(agg.min_cost[v])) CHECK(agg.count_sum[v] >= 1);
    }
  }
}

TEST_CASE("restricting the target set drops other terminations") {
  const TreeGraph g = testutil::make_graph(4, {{0, 1, 1.0}, {1, 2, 1.0}, {2, 3, 1.0}});
  const std::vector<NodeId> sources = {0};
  std::vector<std::uint8_t> mask(4, 0);
  mask[3] = 1;  // only the far end is a target
  const PathAggregate agg = aggregate_paths(g, sources, mask);
  CHECK(agg.count_sum == std::vector<std::uint64_t>{1, 1, 1, 1});
  std::vector<std::uint8_t> none(4, 0);
  const PathAggregate empty = aggregate_paths(g, sources, none);
  CHECK(empty.count_sum == std::vector<std::uint64_t>{0, 0, 0, 0});
  CHECK(empty.max_count_sum == 0);
}

TEST_CASE("multi-source merges: sums add, maxima dominate, costs take the minimum") {
  auto rng = testutil::rng(4242);
  const TreeGraph g = random_int_cost_graph(rng, 12);
  const int n = static_cast<int>(g.node_count());
  const NodeId s0 = 0;
  const NodeId s1 = static_cast<NodeId>(n - 1);
  const std::vector<NodeId> both = {s0, s1};
  const PathAggregate merged = aggregate_paths(g, both);
  const PathAggregate a0 = aggregate_paths(g, std::vector<NodeId>{s0});
  const PathAggregate a1 = aggregate_paths(g, std::vector<NodeId>{s1});
  for (std::size_t v = 0; v < g.node_count(); ++v) {
    CHECK(merged.count_sum[v] == a0.count_sum[v] + a1.count_sum[v]);
    CHECK(merged.count_max[v] == std::max(a0.count_max[v], a1.count_max[v]));
    CHECK(merged.min_cost[v] == std::min(a0.min_cost[v], a1.min_cost[v]));
    if (!std::isinf(merged.min_cost[v])) {
      const int expect = a0.min_cost[v] <= a1.min_cost[v] ? 0 : 1;  // ties keep the earlier
      CHECK(merged.best_source[v] == expect);
    } else {
      CHECK(merged.best_source[v] == -1);
    }
  }
  CHECK(merged.max_count_sum == *std::max_element(merged.count_sum.begin(),
                                                  merged.count_sum.end()));
  CHECK(merged.max_count_max == *std::max_element(merged.count_max.begin(),
                                                  merged.count_max.end()));
}

TEST_CASE("equidistant nodes go to the earlier source in the list") {
  const TreeGraph g = testutil::make_graph(3, {{0, 1, 1.0}, {1, 2, 1.0}});
  const std::vector<NodeId> sources = {2, 0};  // node 1 is 1.0 from both
  const PathAggregate agg = aggregate_paths(g, sources);
  CHECK(agg.best_source[1] == 0);  // index into the sources list, i.e. node 2
  const std::vector<NodeId> flipped = {0, 2};
  const PathAggregate agg2 = aggregate_paths(g, flipped);
  CHECK(agg2.best_source[1] == 0);  // now node 0 wins the same tie
}

TEST_CASE("single-source costs never decrease along a recorded optimal path") {
  auto rng = testutil::rng(314);
  std::vector<Vec3> pts;
  for (int i = 0; i < 120; ++i) {
    pts.push_back({testutil::uniform(rng, 0, 0.7), testutil::uniform(rng, 0, 0.7),
                   testutil::uniform(rng, 0, 0.2)});
  }
  GraphOptions opts;
  opts.edge_radius = 0.15;
  const TreeGraph g = build_graph(pts, opts);
  const std::vector<NodeId> sources = {0};
  const PathAggregate agg = aggregate_paths(g, sources);
  for (NodeId t = 0; t < static_cast<NodeId>(g.node_count()); t += 7) {
    const PathResult r = shortest_path(g, 0, t);
    if (!r.reachable) continue;
    for (std::size_t i = 1; i < r.nodes.size(); ++i) {
      CHECK(agg.min_cost[static_cast<std::size_t>(r.nodes[i - 1])] <=
            agg.min_cost[static_cast<std::size_t>(r.nodes[i])]);
    }
  }
}

TEST_CASE("trunks anchor to the nearest node within range") {
  const std::vector<Vec3> nodes = {{0, 0, 0}, {1, 0, 0}, {1.05, 0, 0}};
  GraphOptions opts;
  opts.edge_radius = 0.15;
  const TreeGraph g = build_graph(nodes, opts);
  std::vector<TrunkPoint> trunks = {{{1.04, 0, 0}, 7}};
  const auto anchors = anchor_trunks(g, trunks, 0.15);
  REQUIRE(anchors.size() == 1);
  CHECK(anchors[0] == 2);  // 0.01 from node 2, 0.04 from node 1

  std::vector<TrunkPoint> far = {{{5, 5, 5}, 9}};
  CHECK_THROWS_WITH_AS(anchor_trunks(g, far, 0.15), doctest::Contains("9"), Error);
}

TEST_CASE("weighting names parse both ways") {
  CHECK(parse_weighting("none") == EdgeWeighting::none);
  CHECK(parse_weighting("density") == EdgeWeighting::density);
  CHECK(parse_weighting("cosine") == EdgeWeighting::cosine);
  CHECK_THROWS_AS(parse_weighting("fancy"), Error);
  CHECK(weighting_name(EdgeWeighting::cosine) == std::string("cosine"));
}
