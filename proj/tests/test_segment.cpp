#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "test_support.hpp"
#include "treegraph/eval.hpp"
#include "treegraph/segment.hpp"
#include "treegraph/synth.hpp"

using namespace treegraph;

namespace {

SegmentParams widened_params() {
  SegmentParams p;
  p.anchor_radius = 0.6;  // generator trunks sit at ground level, below the canopy nodes
  return p;
}

}  // namespace

TEST_CASE("one trunk and a connected cloud puts every canopy point on that tree") {
  OrchardSpec spec;
  spec.rows = 1;
  spec.trees_per_row = 1;
  spec.seed = 17;
  const SyntheticOrchard orchard = generate_orchard(spec);
  const auto labels = segment_trees(orchard.cloud, orchard.trunks, widened_params());
  REQUIRE(labels.size() == orchard.cloud.size());
  const GroundPartition part = remove_ground(orchard.cloud, 1.0, 0.15);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (part.is_ground[i] != 0) {
      CHECK(labels[i] == kGroundTreeId);
    } else {
      CHECK(labels[i] == orchard.trunks[0].tree_id);
    }
  }
}

TEST_CASE("label range is ground, trunk ids, or unknown") {
  OrchardSpec spec;
  spec.rows = 1;
  spec.trees_per_row = 2;
  spec.seed = 29;
  spec.noise_sigma = 0.05;
  const SyntheticOrchard orchard = generate_orchard(spec);
  SegmentParams params = widened_params();
  params.fallback = false;
  const auto labels = segment_trees(orchard.cloud, orchard.trunks, params);
  std::set<std::int32_t> allowed = {kGroundTreeId, kUnknownTreeId};
  for (const auto& t : orchard.trunks) allowed.insert(t.tree_id);
  for (const auto l : labels) CHECK(allowed.count(l) == 1);
}

TEST_CASE("orphan points: unknown without fallback, closest trunk with it") {
  // A small stand plus a detached blob of canopy points 30 m away: the blob
  // voxels connect to nothing, so path assignment cannot reach them.
  OrchardSpec spec;
  spec.rows = 1;
  spec.trees_per_row = 2;
  spec.seed = 4;
  SyntheticOrchard orchard = generate_orchard(spec);
  const std::size_t base_size = orchard.cloud.size();
  auto g = testutil::rng(6);
  for (int i = 0; i < 40; ++i) {
    PointRecord r;
    r.x = 30.0 + testutil::uniform(g, 0, 0.3);
    r.y = testutil::uniform(g, 0, 0.3);
    r.z = 2.0 + testutil::uniform(g, 0, 0.3);
    orchard.cloud.points.push_back(r);
  }

  SegmentParams no_fb = widened_params();
  no_fb.fallback = false;
  const auto strict = segment_trees(orchard.cloud, orchard.trunks, no_fb);
  SegmentParams with_fb = widened_params();
  const auto relaxed = segment_trees(orchard.cloud, orchard.trunks, with_fb);

  // The blob is nearest to the second trunk (larger x).
  const std::int32_t nearest =
      orchard.trunks[0].position.x > orchard.trunks[1].position.x ? orchard.trunks[0].tree_id
                                                                  : orchard.trunks[1].tree_id;
  for (std::size_t i = base_size; i < orchard.cloud.size(); ++i) {
    // The lateral-minimum rule grounds the blob's bottom sliver; both modes
    // must agree on that, and everything else is orphaned.
    if (strict[i] == kGroundTreeId) {
      CHECK(relaxed[i] == kGroundTreeId);
    } else {
      CHECK(strict[i] == kUnknownTreeId);
      CHECK(relaxed[i] == nearest);
    }
  }
  // Points the graph does reach agree between the two modes.
  for (std::size_t i = 0; i < base_size; ++i) {
    if (strict[i] != kUnknownTreeId) CHECK(strict[i] == relaxed[i]);
  }
}

TEST_CASE("closest-trunk baseline matches a brute-force scan") {
  auto g = testutil::rng(55);
  std::vector<Vec3> pts;
  for (int i = 0; i < 300; ++i) {
    pts.push_back({testutil::uniform(g, -5, 5), testutil::uniform(g, -5, 5),
                   testutil::uniform(g, 0.5, 3)});
  }
  PointCloud cloud = testutil::cloud_from(pts);
  const std::vector<TrunkPoint> trunks = {
      {{-2, 0, 0}, 1}, {{2, 1, 0}, 2}, {{0, -3, 0}, 3}};
  const std::vector<std::uint8_t> no_ground(cloud.size(), 0);
  const auto labels = closest_trunk_baseline(cloud, trunks, no_ground);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    std::int32_t want = kUnknownTreeId;
    for (const auto& t : trunks) {
      const double d = distance(cloud[i].position(), t.position);
      if (d < best) {
        best = d;
        want = t.tree_id;
      }
    }
    CHECK(labels[i] == want);
  }
}

TEST_CASE("closest-trunk ties go to the smaller tree id and ground stays ground") {
  const PointCloud cloud = testutil::cloud_from({{0, 0, 1}, {0, 0, 0}});
  const std::vector<TrunkPoint> trunks = {{{-1, 0, 1}, 4}, {{1, 0, 1}, 2}};
  const std::vector<std::uint8_t> ground = {0, 1};
  const auto labels = closest_trunk_baseline(cloud, trunks, ground);
  CHECK(labels[0] == 2);  // equidistant: the smaller id wins
  CHECK(labels[1] == kGroundTreeId);
}

TEST_CASE("with a single trunk the baseline and path segmentation agree everywhere") {
  OrchardSpec spec;
  spec.rows = 1;
  spec.trees_per_row = 1;
  spec.seed = 23;
  spec.noise_sigma = 0.02;
  const SyntheticOrchard orchard = generate_orchard(spec);
  const auto path_labels = segment_trees(orchard.cloud, orchard.trunks, widened_params());
  const auto base_labels = closest_trunk_baseline(orchard.cloud, orchard.trunks);
  CHECK(path_labels == base_labels);
}

TEST_CASE("path assignment picks the cheapest trunk, verified by re-querying costs") {
  OrchardSpec spec;
  spec.rows = 1;
  spec.trees_per_row = 2;
  spec.seed = 31;
  const SyntheticOrchard orchard = generate_orchard(spec);
  const SegmentationResult full =
      segment_trees_full(orchard.cloud, orchard.trunks, widened_params());

  // For every node the aggregation assigned, its best source's distance must
  // not exceed the distance from any other anchored source.
  std::vector<ShortestPathTree> trees;
  for (const NodeId a : full.anchors) trees.push_back(dijkstra_tree(full.graph, a));
  for (std::size_t v = 0; v < full.graph.node_count(); ++v) {
    const std::int32_t label = full.node_labels[v];
    if (label <= 0) continue;
    std::size_t idx = 0;
    while (full.trunks[idx].tree_id != label) ++idx;
    for (std::size_t other = 0; other < trees.size(); ++other) {
      CHECK(trees[idx].dist[v] <= trees[other].dist[v]);
    }
  }
}

TEST_CASE("a trunk too far from every node names itself in the error") {
  OrchardSpec spec;
  spec.rows = 1;
  spec.trees_per_row = 1;
  spec.seed = 2;
  const SyntheticOrchard orchard = generate_orchard(spec);
  const std::vector<TrunkPoint> bogus = {{{500, 500, 0}, 42}};
  CHECK_THROWS_WITH_AS(segment_trees(orchard.cloud, bogus, widened_params()),
                       doctest::Contains("42"), Error);
}

TEST_CASE("segmentation requires at least one trunk") {
  OrchardSpec spec;
  spec.rows = 1;
  spec.trees_per_row = 1;
  const SyntheticOrchard orchard = generate_orchard(spec);
  CHECK_THROWS_AS(segment_trees(orchard.cloud, std::vector<TrunkPoint>{}, widened_params()),
                  Error);
}
