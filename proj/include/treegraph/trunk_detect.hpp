// Prior-free trunk location: score coarse ground nodes by their cheapest path
// from canopy source nodes, then pick local minima of the score field.
#pragma once

#include <string>
#include <vector>

#include "treegraph/types.hpp"

namespace treegraph {

struct TrunkDetectionConfig {
  double coarse_voxel = 0.4;      // v_t
  double edge_radius = 0.6;       // 1.5 * v_t; must exceed v_t or the coarse graph falls apart
  double source_spacing = 2.0;    // min spacing of the canopy source subsample
  double source_min_height = 1.0; // sources must sit this far above local ground
  double local_min_radius = 1.0;  // neighborhood for the score local-minimum test
  double merge_distance = 1.0;    // minima closer than this merge (lowest score kept)
  double ground_radius = 1.0;     // R_g for the internal ground partition
  double ground_tolerance = 0.15;
  int threads = 0;
};

struct TrunkDetectionResult {
  std::vector<TrunkPoint> trunks;  // sequential tree ids from 1
  // Non-empty when the result is empty for a structural reason (no ground,
  // no sources, nothing reachable).
  std::string diagnostic;
};

TrunkDetectionResult detect_trunks(const PointCloud& cloud, const TrunkDetectionConfig& cfg = {});

}  // namespace treegraph
