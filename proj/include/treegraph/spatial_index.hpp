// Uniform hash-grid index for fixed-radius neighbor queries.
#pragma once

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "treegraph/types.hpp"

namespace treegraph {

struct CellIndex {
  std::int32_t i = 0;
  std::int32_t j = 0;
  std::int32_t k = 0;

  friend bool operator==(const CellIndex&, const CellIndex&) = default;
  friend auto operator<=>(const CellIndex&, const CellIndex&) = default;
};

// Collision-free packing; supports coordinates within +/-2^20 cells per axis.
inline std::uint64_t pack_cell(const CellIndex& c) {
  const auto u = [](std::int32_t v) {
    return static_cast<std::uint64_t>(static_cast<std::uint32_t>(v + (1 << 20))) & 0x1fffffull;
  };
  return (u(c.i) << 42) | (u(c.j) << 21) | u(c.k);
}

struct CellHash {
  std::size_t operator()(std::uint64_t key) const {
    return static_cast<std::size_t>(key * 0x9e3779b97f4a7c15ull);
  }
};

CellIndex cell_of(const Vec3& p, double cell_size);

// Immutable point set bucketed at cell_size. Queries return ids in ascending
// order, so downstream consumers are order-deterministic.
class SpatialIndex {
 public:
  SpatialIndex(std::vector<Vec3> positions, double cell_size);

  std::size_t size() const { return positions_.size(); }
  const Vec3& position(std::uint32_t id) const { return positions_[id]; }
  double cell_size() const { return cell_size_; }

  // All ids with |position - q| <= radius, ascending. radius must be
  // <= cell_size for the single-ring scan to be exhaustive; larger radii take
  // the generic path.
  void radius_neighbors(const Vec3& q, double radius, std::vector<std::uint32_t>& out) const;
  std::vector<std::uint32_t> radius_neighbors(const Vec3& q, double radius) const;

 private:
  std::vector<Vec3> positions_;
  double cell_size_;
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>, CellHash> cells_;
};

}  // namespace treegraph
