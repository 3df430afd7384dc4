#include "treegraph/features.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <bitset>
#include <cmath>
#include <limits>
#include <sstream>

#include "treegraph/parallel.hpp"

namespace treegraph {
namespace {

constexpr double kDegenerateEigenvalue = 1e-12;

Vec3 canonical_sign(const Vec3& v) {
  const double ax = std::fabs(v.x), ay = std::fabs(v.y), az = std::fabs(v.z);
  double lead = v.x;
  if (ay > ax && ay >= az) {
    lead = v.y;
  } else if (az > ax && az > ay) {
    lead = v.z;
  }
  return lead < 0.0 ? v * -1.0 : v;
}

// Isotropic limit used for cells whose covariance is unusable.
void set_degenerate_eigen(FeatureVector& f) {
  f.eigenvalues = {0.0, 0.0, 0.0};
  f.eigenvectors = {Vec3{1, 0, 0}, Vec3{0, 1, 0}, Vec3{0, 0, 1}};
  f.anisotropy = 0.0;
  f.eigen_entropy = std::log(3.0);
  f.linearity = 0.0;
  f.omnivariance = 1.0 / 3.0;
  f.planarity = 0.0;
  f.sphericity = 1.0;
  f.surface_variation = 1.0 / 3.0;
  f.degenerate = true;
}

void eigen_features(FeatureVector& f, std::span<const Vec3> support) {
  if (support.size() < 3) {
    set_degenerate_eigen(f);
    return;
  }
  Vec3 mean;
  for (const auto& p : support) mean += p;
  mean = mean / static_cast<double>(support.size());

  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : support) {
    const Vec3 d = p - mean;
    const Eigen::Vector3d v(d.x, d.y, d.z);
    cov += v * v.transpose();
  }
  cov /= static_cast<double>(support.size());

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
  // Eigen returns ascending eigenvalues; reorder to l1 >= l2 >= l3.
  const Eigen::Vector3d ev = solver.eigenvalues();
  const Eigen::Matrix3d evec = solver.eigenvectors();
  const double l1 = std::max(0.0, ev(2));
  const double l2 = std::max(0.0, ev(1));
  const double l3 = std::max(0.0, ev(0));
  if (l1 < kDegenerateEigenvalue) {
    set_degenerate_eigen(f);
    return;
  }
  f.eigenvalues = {l1, l2, l3};
  for (int i = 0; i < 3; ++i) {
    const Eigen::Vector3d c = evec.col(2 - i);
    f.eigenvectors[static_cast<std::size_t>(i)] = canonical_sign({c(0), c(1), c(2)});
  }
  const double sum = l1 + l2 + l3;
  const std::array<double, 3> e = {l1 / sum, l2 / sum, l3 / sum};
  f.anisotropy = (l1 - l3) / l1;
  double entropy = 0.0;
  for (const double ei : e) {
    if (ei > 0.0) entropy -= ei * std::log(ei);
  }
  f.eigen_entropy = entropy;
  f.linearity = (l1 - l2) / l1;
  f.omnivariance = std::cbrt(e[0] * e[1] * e[2]);
  f.sphericity = l3 / l1;
  // Complement form keeps linearity + sphericity + planarity == 1 exact in
  // floating point (evaluated as planarity + (linearity + sphericity)).
  f.planarity = 1.0 - (f.linearity + f.sphericity);
  f.surface_variation = e[2];
  f.degenerate = false;
}

// Area of the axis-aligned bounding rectangle of points projected onto the
// plane spanned by (u, v).
double projected_bbox_area(std::span<const Vec3> pts, const Vec3& u, const Vec3& v) {
  double umin = std::numeric_limits<double>::infinity(), umax = -umin;
  double vmin = umin, vmax = -umin;
  for (const auto& p : pts) {
    const double pu = p.dot(u);
    const double pv = p.dot(v);
    umin = std::min(umin, pu);
    umax = std::max(umax, pu);
    vmin = std::min(vmin, pv);
    vmax = std::max(vmax, pv);
  }
  return (umax - umin) * (vmax - vmin);
}

}  // namespace

std::array<double, kFeatureDim> FeatureVector::flatten() const {
  std::array<double, kFeatureDim> out;
  out[kFeatLambda1] = eigenvalues[0];
  out[kFeatLambda2] = eigenvalues[1];
  out[kFeatLambda3] = eigenvalues[2];
  out[kFeatAnisotropy] = anisotropy;
  out[kFeatEigenEntropy] = eigen_entropy;
  out[kFeatLinearity] = linearity;
  out[kFeatOmnivariance] = omnivariance;
  out[kFeatPlanarity] = planarity;
  out[kFeatSphericity] = sphericity;
  out[kFeatSurfaceVariation] = surface_variation;
  out[kFeatMeanX] = mean.x;
  out[kFeatMeanY] = mean.y;
  out[kFeatMeanZ] = mean.z;
  out[kFeatVarX] = variance.x;
  out[kFeatVarY] = variance.y;
  out[kFeatVarZ] = variance.z;
  out[kFeatAreaNormal] = area_normal;
  out[kFeatAreaVertical] = area_vertical;
  out[kFeatPointCount] = static_cast<double>(point_count);
  out[kFeatOccupiedVolume] = occupied_volume;
  out[kFeatDensity] = density;
  out[kFeatConnHorizontal] = conn_horizontal;
  out[kFeatConnVertical] = conn_vertical;
  out[kFeatConnDiagonal] = conn_diagonal;
  return out;
}

FeatureSet compute_features(const PointCloud& cloud, const VoxelGrid& grid, double neighborhood_r,
                            int threads) {
  if (grid.node_count() == 0) throw Error("compute_features: empty grid");
  const double radius = neighborhood_r > 0.0 ? neighborhood_r : 3.0 * grid.cell_size;

  // Index over exactly the points the grid was built from.
  std::vector<Vec3> positions;
  for (const auto& members : grid.members) {
    for (const PointId id : members) positions.push_back(cloud.points[id].position());
  }
  const SpatialIndex index(positions, radius);

  FeatureSet set;
  set.per_node.resize(grid.node_count());
  const double sub = grid.cell_size / 4.0;

  parallel_chunks(grid.node_count(), threads, [&](std::size_t begin, std::size_t end) {
    std::vector<std::uint32_t> hits;
    std::vector<Vec3> support;
    std::vector<Vec3> member_pts;
    for (std::size_t n = begin; n < end; ++n) {
      FeatureVector& f = set.per_node[n];
      const CellIndex cell = grid.cells[n];
      const auto& members = grid.members[n];

      member_pts.clear();
      for (const PointId id : members) member_pts.push_back(cloud.points[id].position());

      index.radius_neighbors(grid.node_positions[n], radius, hits);
      support.clear();
      for (const std::uint32_t h : hits) support.push_back(index.position(h));
      eigen_features(f, support);

      const double m = static_cast<double>(member_pts.size());
      Vec3 mean;
      for (const auto& p : member_pts) mean += p;
      mean = mean / m;
      f.mean = mean;
      Vec3 var;
      for (const auto& p : member_pts) {
        const Vec3 d = p - mean;
        var += {d.x * d.x, d.y * d.y, d.z * d.z};
      }
      f.variance = var / m;

      f.area_normal = projected_bbox_area(member_pts, f.eigenvectors[0], f.eigenvectors[1]);
      f.area_vertical = projected_bbox_area(member_pts, {1, 0, 0}, {0, 1, 0});

      f.point_count = static_cast<std::uint32_t>(members.size());
      std::bitset<64> occupied;
      for (const auto& p : member_pts) {
        const auto rel = [&](double coord, std::int32_t cell_idx) {
          const int s = static_cast<int>(std::floor((coord - cell_idx * grid.cell_size) / sub));
          return std::clamp(s, 0, 3);
        };
        occupied.set(static_cast<std::size_t>(rel(p.x, cell.i) * 16 + rel(p.y, cell.j) * 4 +
                                              rel(p.z, cell.k)));
      }
      f.occupied_volume = static_cast<double>(occupied.count()) * sub * sub * sub;
      f.density = m / (grid.cell_size * grid.cell_size * grid.cell_size);

      for (int di = -1; di <= 1; ++di) {
        for (int dj = -1; dj <= 1; ++dj) {
          for (int dk = -1; dk <= 1; ++dk) {
            if (di == 0 && dj == 0 && dk == 0) continue;
            if (grid.node_of({cell.i + di, cell.j + dj, cell.k + dk}) < 0) continue;
            if (dk == 0 && (di == 0) != (dj == 0)) {
              ++f.conn_horizontal;
            } else if (di == 0 && dj == 0) {
              ++f.conn_vertical;
            } else {
              ++f.conn_diagonal;
            }
          }
        }
      }
    }
  });

  for (const auto& f : set.per_node) set.max_point_count = std::max(set.max_point_count, f.point_count);
  return set;
}

FeatureScaling FeatureScaling::fit(const FeatureSet& features) {
  FeatureScaling s;
  std::array<double, kFeatureDim> max;
  s.min.fill(std::numeric_limits<double>::infinity());
  max.fill(-std::numeric_limits<double>::infinity());
  for (const auto& f : features.per_node) {
    const auto raw = f.flatten();
    for (std::size_t i = 0; i < kFeatureDim; ++i) {
      s.min[i] = std::min(s.min[i], raw[i]);
      max[i] = std::max(max[i], raw[i]);
    }
  }
  for (std::size_t i = 0; i < kFeatureDim; ++i) {
    const double range = max[i] - s.min[i];
    s.inv_range[i] = range > 0.0 ? 1.0 / range : 0.0;
  }
  return s;
}

std::array<double, kFeatureDim> FeatureScaling::apply(
    const std::array<double, kFeatureDim>& raw) const {
  std::array<double, kFeatureDim> out;
  for (std::size_t i = 0; i < kFeatureDim; ++i) out[i] = (raw[i] - min[i]) * inv_range[i];
  return out;
}

FeatureMask FeatureMask::all() {
  FeatureMask m;
  m.enabled.fill(true);
  return m;
}

FeatureMask FeatureMask::parse(const std::string& groups) {
  FeatureMask m;
  m.enabled.fill(false);
  const auto enable = [&m](std::size_t from, std::size_t to) {
    for (std::size_t i = from; i <= to; ++i) m.enabled[i] = true;
  };
  std::stringstream ss(groups);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    if (item == "all") {
      m.enabled.fill(true);
    } else if (item == "eigen") {
      enable(kFeatLambda1, kFeatSurfaceVariation);
    } else if (item == "moments") {
      enable(kFeatMeanX, kFeatVarZ);
    } else if (item == "area") {
      enable(kFeatAreaNormal, kFeatAreaVertical);
    } else if (item == "density") {
      enable(kFeatPointCount, kFeatDensity);
    } else if (item == "connectivity") {
      enable(kFeatConnHorizontal, kFeatConnDiagonal);
    } else {
      throw Error("unknown feature group '" + item + "'");
    }
  }
  return m;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error("cosine_similarity: dimension mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

double cosine_weight(const FeatureVector& a, const FeatureVector& b, const FeatureScaling& scaling,
                     const FeatureMask& mask, WeightDiagnostics* diag) {
  const auto fa = scaling.apply(a.flatten());
  const auto fb = scaling.apply(b.flatten());
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < kFeatureDim; ++i) {
    if (!mask.enabled[i]) continue;
    dot += fa[i] * fb[i];
    na += fa[i] * fa[i];
    nb += fb[i] * fb[i];
  }
  if (na == 0.0 || nb == 0.0) {
    if (diag != nullptr) ++diag->zero_norm_pairs;
    return 1.0;
  }
  return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

double density_weight(const FeatureVector& a, const FeatureVector& b, std::uint32_t m_max) {
  if (m_max == 0) throw Error("density_weight: m_max is zero (empty graph)");
  const double da = a.point_count;
  const double db = b.point_count;
  return std::fabs(da - db) / static_cast<double>(m_max);
}

}  // namespace treegraph
