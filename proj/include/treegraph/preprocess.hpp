// Ground extraction by lateral local minima and voxel downsampling of points
// into graph nodes.
#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <unordered_map>
#include <vector>

#include "treegraph/spatial_index.hpp"
#include "treegraph/types.hpp"

namespace treegraph {

// Split of a cloud into terrain and canopy ids. ground_height is the 2D
// local-minimum field the decision was made against (grid of cell size
// lateral_radius with 3x3-neighborhood min, so the effective search radius
// lies in [R_g, 2*sqrt(2)*R_g)).
struct GroundPartition {
  std::vector<PointId> ground_ids;     // ascending
  std::vector<PointId> nonground_ids;  // ascending
  std::vector<std::uint8_t> is_ground; // per point

  double lateral_radius = 1.0;
  double tolerance = 0.15;

  // Grid is anchored at the cloud's XY min corner so the partition is
  // invariant under exactly-representable XY translations.
  double origin_x = 0.0;
  double origin_y = 0.0;
  std::unordered_map<std::uint64_t, double> cell_min_z;

  // Min z within the 3x3 lateral neighborhood of (x, y); +inf off-grid.
  double ground_height(double x, double y) const;
};

GroundPartition remove_ground(const PointCloud& cloud, double lateral_radius = 1.0,
                              double tolerance = 0.15);

struct VoxelGrid {
  double cell_size = 0.1;
  std::vector<CellIndex> cells;              // lexicographic (i,j,k) order
  std::vector<std::vector<PointId>> members; // aligned with cells, ids ascending
  std::vector<Vec3> node_positions;          // aligned with cells, mean of members

  std::size_t node_count() const { return cells.size(); }
  // Node index for a cell, -1 when unoccupied.
  std::int32_t node_of(const CellIndex& c) const;

  std::unordered_map<std::uint64_t, std::int32_t, CellHash> lookup;
};

VoxelGrid voxelize(const PointCloud& cloud, std::span<const PointId> ids, double cell_size = 0.1);

// Writes each node's label onto its member points; points outside the grid
// receive `fill`.
std::vector<std::int32_t> propagate_to_points(const VoxelGrid& grid,
                                              std::span<const std::int32_t> node_labels,
                                              std::size_t point_count,
                                              std::int32_t fill = kUnknownTreeId);

// Cell-keyed variant; throws when a label references a cell absent from the
// grid. Unlabeled cells' points receive `fill`.
std::vector<std::int32_t> propagate_to_points(const VoxelGrid& grid,
                                              const std::map<CellIndex, std::int32_t>& labels,
                                              std::size_t point_count,
                                              std::int32_t fill = kUnknownTreeId);

}  // namespace treegraph
