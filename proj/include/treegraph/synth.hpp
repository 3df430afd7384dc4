// Labeled virtual orchard generator: jittered ground grid plus recursively
// branching trees with leaf clusters at the twig tips. Deterministic per seed;
// noise comes from streams independent of the structure, so sweeping sigma
// leaves the underlying geometry bit-identical.
#pragma once

#include <cstdint>
#include <vector>

#include "treegraph/types.hpp"

namespace treegraph {

struct OrchardSpec {
  int rows = 2;
  int trees_per_row = 2;
  double row_spacing = 8.0;  // between rows, along y
  double tree_spacing = 6.0; // along a row, along x
  double noise_sigma = 0.0;
  std::uint64_t seed = 1;

  // Tree shape.
  double height_min = 3.4;
  double height_max = 4.2;
  int branching_depth = 4;  // trunk, limbs, branches, twigs
  double branch_angle_min_deg = 20.0;
  double branch_angle_max_deg = 45.0;
  double canopy_radius = 2.3;  // hard lateral cap per tree
  double leaf_sigma = 0.24;    // leaf cluster spread (offsets truncated at 2.5 sigma)
  // Interior clusters sit on branch axes (every level above the trunk) every
  // this many meters, mixing foliage through the wood like a real canopy;
  // <= 0 leaves foliage only at the twig tips.
  double interior_leaf_spacing = 0.3;
  double interior_leaf_scale = 0.65;  // interior cluster size relative to tip clusters

  // Point budget knobs.
  double wood_density = 1.0;    // scales surface samples per m^2 of bark
  double leaf_density = 1.0;    // scales points per leaf cluster
  double canopy_falloff = 0.0;  // 0..1, thins sampling toward the canopy top
  double ground_spacing = 0.12;
  double ground_margin = 3.0;
  double density_scale = 1.0;   // global multiplier (ground spacing shrinks by sqrt)

  int threads = 0;
};

struct SkeletonSegment {
  Vec3 a;
  Vec3 b;
  double radius = 0.0;
  int depth = 1;
};

struct SyntheticOrchard {
  PointCloud cloud;                 // ground block first, then per-tree blocks
  std::vector<TrunkPoint> trunks;   // ground truth, ids 1..n_trees
  std::vector<std::vector<SkeletonSegment>> skeletons;  // per tree, noise-free
};

SyntheticOrchard generate_orchard(const OrchardSpec& spec);

}  // namespace treegraph
