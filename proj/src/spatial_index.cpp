#include "treegraph/spatial_index.hpp"

#include <algorithm>
#include <cmath>

namespace treegraph {

CellIndex cell_of(const Vec3& p, double cell_size) {
  return {static_cast<std::int32_t>(std::floor(p.x / cell_size)),
          static_cast<std::int32_t>(std::floor(p.y / cell_size)),
          static_cast<std::int32_t>(std::floor(p.z / cell_size))};
}

SpatialIndex::SpatialIndex(std::vector<Vec3> positions, double cell_size)
    : positions_(std::move(positions)), cell_size_(cell_size) {
  if (!(cell_size > 0.0)) throw Error("spatial index cell size must be positive");
  cells_.reserve(positions_.size());
  for (std::uint32_t id = 0; id < positions_.size(); ++id) {
    cells_[pack_cell(cell_of(positions_[id], cell_size_))].push_back(id);
  }
}

void SpatialIndex::radius_neighbors(const Vec3& q, double radius,
                                    std::vector<std::uint32_t>& out) const {
  out.clear();
  if (radius < 0.0) return;
  const double r2 = radius * radius;
  const CellIndex c = cell_of(q, cell_size_);
  const int ring = std::max(1, static_cast<int>(std::ceil(radius / cell_size_)));
  for (int di = -ring; di <= ring; ++di) {
    for (int dj = -ring; dj <= ring; ++dj) {
      for (int dk = -ring; dk <= ring; ++dk) {
        const auto it = cells_.find(pack_cell({c.i + di, c.j + dj, c.k + dk}));
        if (it == cells_.end()) continue;
        for (const std::uint32_t id : it->second) {
          if (squared_distance(positions_[id], q) <= r2) out.push_back(id);
        }
      }
    }
  }
  std::sort(out.begin(), out.end());
}

std::vector<std::uint32_t> SpatialIndex::radius_neighbors(const Vec3& q, double radius) const {
  std::vector<std::uint32_t> out;
  radius_neighbors(q, radius, out);
  return out;
}

}  // namespace treegraph
