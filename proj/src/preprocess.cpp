#include "treegraph/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace treegraph {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::uint64_t pack2(std::int32_t i, std::int32_t j) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(i)) << 32) |
         static_cast<std::uint64_t>(static_cast<std::uint32_t>(j));
}

std::int32_t floor_div(double v, double cell) {
  return static_cast<std::int32_t>(std::floor(v / cell));
}

}  // namespace

double GroundPartition::ground_height(double x, double y) const {
  const std::int32_t ci = floor_div(x - origin_x, lateral_radius);
  const std::int32_t cj = floor_div(y - origin_y, lateral_radius);
  double best = kInf;
  for (std::int32_t di = -1; di <= 1; ++di) {
    for (std::int32_t dj = -1; dj <= 1; ++dj) {
      const auto it = cell_min_z.find(pack2(ci + di, cj + dj));
      if (it != cell_min_z.end()) best = std::min(best, it->second);
    }
  }
  return best;
}

GroundPartition remove_ground(const PointCloud& cloud, double lateral_radius, double tolerance) {
  if (cloud.empty()) throw Error("remove_ground: empty cloud");
  if (!(lateral_radius > 0.0)) throw Error("remove_ground: lateral radius must be positive");

  GroundPartition part;
  part.lateral_radius = lateral_radius;
  part.tolerance = tolerance;
  part.origin_x = kInf;
  part.origin_y = kInf;
  for (const auto& p : cloud.points) {
    part.origin_x = std::min(part.origin_x, p.x);
    part.origin_y = std::min(part.origin_y, p.y);
  }

  part.cell_min_z.reserve(cloud.size() / 4 + 16);
  for (const auto& p : cloud.points) {
    const std::uint64_t key = pack2(floor_div(p.x - part.origin_x, lateral_radius),
                                    floor_div(p.y - part.origin_y, lateral_radius));
    auto [it, inserted] = part.cell_min_z.try_emplace(key, p.z);
    if (!inserted) it->second = std::min(it->second, p.z);
  }

  part.is_ground.resize(cloud.size());
  for (PointId id = 0; id < cloud.size(); ++id) {
    const auto& p = cloud.points[id];
    const bool ground = p.z <= part.ground_height(p.x, p.y) + tolerance;
    part.is_ground[id] = ground ? 1 : 0;
    (ground ? part.ground_ids : part.nonground_ids).push_back(id);
  }
  return part;
}

std::int32_t VoxelGrid::node_of(const CellIndex& c) const {
  const auto it = lookup.find(pack_cell(c));
  return it == lookup.end() ? -1 : it->second;
}

VoxelGrid voxelize(const PointCloud& cloud, std::span<const PointId> ids, double cell_size) {
  if (!(cell_size > 0.0)) throw Error("voxelize: cell size must be positive");
  VoxelGrid grid;
  grid.cell_size = cell_size;

  std::vector<std::pair<CellIndex, PointId>> tagged;
  tagged.reserve(ids.size());
  for (const PointId id : ids) {
    tagged.emplace_back(cell_of(cloud.points[id].position(), cell_size), id);
  }
  std::sort(tagged.begin(), tagged.end());

  for (std::size_t i = 0; i < tagged.size();) {
    const CellIndex cell = tagged[i].first;
    std::vector<PointId> members;
    Vec3 sum;
    std::size_t j = i;
    for (; j < tagged.size() && tagged[j].first == cell; ++j) {
      members.push_back(tagged[j].second);
      sum += cloud.points[tagged[j].second].position();
    }
    grid.cells.push_back(cell);
    grid.node_positions.push_back(sum / static_cast<double>(members.size()));
    grid.members.push_back(std::move(members));
    i = j;
  }

  grid.lookup.reserve(grid.cells.size());
  for (std::size_t n = 0; n < grid.cells.size(); ++n) {
    grid.lookup.emplace(pack_cell(grid.cells[n]), static_cast<std::int32_t>(n));
  }
  return grid;
}

std::vector<std::int32_t> propagate_to_points(const VoxelGrid& grid,
                                              std::span<const std::int32_t> node_labels,
                                              std::size_t point_count, std::int32_t fill) {
  if (node_labels.size() != grid.node_count()) {
    throw Error("propagate_to_points: label count does not match grid nodes");
  }
  std::vector<std::int32_t> out(point_count, fill);
  for (std::size_t n = 0; n < grid.node_count(); ++n) {
    for (const PointId id : grid.members[n]) out[id] = node_labels[n];
  }
  return out;
}

std::vector<std::int32_t> propagate_to_points(const VoxelGrid& grid,
                                              const std::map<CellIndex, std::int32_t>& labels,
                                              std::size_t point_count, std::int32_t fill) {
  std::vector<std::int32_t> node_labels(grid.node_count(), fill);
  for (const auto& [cell, label] : labels) {
    const std::int32_t n = grid.node_of(cell);
    if (n < 0) {
      throw Error("propagate_to_points: label references missing cell (" +
                  std::to_string(cell.i) + "," + std::to_string(cell.j) + "," +
                  std::to_string(cell.k) + ")");
    }
    node_labels[static_cast<std::size_t>(n)] = label;
  }
  return propagate_to_points(grid, node_labels, point_count, fill);
}

}  // namespace treegraph
