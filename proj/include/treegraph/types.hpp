// Core point cloud data model shared by every stage.
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace treegraph {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Vec3() = default;
  Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  bool operator==(const Vec3& o) const { return x == o.x && y == o.y && z == o.z; }

  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  Vec3 cross(const Vec3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  double squared_norm() const { return dot(*this); }
  double norm() const { return std::sqrt(squared_norm()); }
  Vec3 normalized() const {
    const double n = norm();
    return n > 0.0 ? *this / n : Vec3{0.0, 0.0, 0.0};
  }
};

inline double distance(const Vec3& a, const Vec3& b) { return (a - b).norm(); }
inline double squared_distance(const Vec3& a, const Vec3& b) { return (a - b).squared_norm(); }

// Matter classes carried per point. Values are the on-disk encoding.
enum class MatterClass : std::uint8_t {
  ground = 0,
  leafy = 1,
  woody = 2,
  unknown = 255,
};

inline bool valid_matter_class(std::uint32_t v) {
  return v == 0 || v == 1 || v == 2 || v == 255;
}

// Tree id conventions: 0 is ground, -1 is unknown/unassigned, >0 are trees.
inline constexpr std::int32_t kGroundTreeId = 0;
inline constexpr std::int32_t kUnknownTreeId = -1;

using PointId = std::uint32_t;

struct PointRecord {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  std::int32_t tree_id = kUnknownTreeId;
  MatterClass matter = MatterClass::unknown;
  std::int32_t source_id = 0;

  Vec3 position() const { return {x, y, z}; }
};

struct Bounds {
  Vec3 min{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
           std::numeric_limits<double>::infinity()};
  Vec3 max{-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
           -std::numeric_limits<double>::infinity()};

  void expand(const Vec3& p) {
    min.x = std::min(min.x, p.x);
    min.y = std::min(min.y, p.y);
    min.z = std::min(min.z, p.z);
    max.x = std::max(max.x, p.x);
    max.y = std::max(max.y, p.y);
    max.z = std::max(max.z, p.z);
  }
};

struct PointCloud {
  std::vector<PointRecord> points;
  // Which optional columns carry real data (mirrors the file schema).
  bool has_tree_ids = false;
  bool has_classes = false;
  bool has_source_ids = false;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  PointRecord& operator[](std::size_t i) { return points[i]; }
  const PointRecord& operator[](std::size_t i) const { return points[i]; }

  Bounds bounds() const {
    Bounds b;
    for (const auto& p : points) b.expand(p.position());
    return b;
  }
};

// A detected or ground-truth trunk location (z is the ground height at the trunk).
struct TrunkPoint {
  Vec3 position;
  std::int32_t tree_id = kUnknownTreeId;
};

inline constexpr const char* kVersion = "0.1.0";

}  // namespace treegraph
