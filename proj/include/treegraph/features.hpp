// Per-voxel enrichment descriptors and the pairwise edge-weight functions
// derived from them (cosine similarity, density difference).
#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "treegraph/preprocess.hpp"
#include "treegraph/types.hpp"

namespace treegraph {

// Scalar layout of a flattened feature vector.
inline constexpr std::size_t kFeatureDim = 24;

enum FeatureIndex : std::size_t {
  kFeatLambda1 = 0,
  kFeatLambda2,
  kFeatLambda3,
  kFeatAnisotropy,
  kFeatEigenEntropy,
  kFeatLinearity,
  kFeatOmnivariance,
  kFeatPlanarity,
  kFeatSphericity,
  kFeatSurfaceVariation,
  kFeatMeanX,
  kFeatMeanY,
  kFeatMeanZ,
  kFeatVarX,
  kFeatVarY,
  kFeatVarZ,
  kFeatAreaNormal,    // projected area along v3
  kFeatAreaVertical,  // projected area along z
  kFeatPointCount,
  kFeatOccupiedVolume,
  kFeatDensity,
  kFeatConnHorizontal,
  kFeatConnVertical,
  kFeatConnDiagonal,
};

struct FeatureVector {
  // Covariance eigenstructure of the neighborhood support. Eigenvalues are
  // raw variances (m^2), descending; eigenvectors are orthonormal with a
  // deterministic sign (largest-magnitude component positive); v3 = normal.
  std::array<double, 3> eigenvalues{};
  std::array<Vec3, 3> eigenvectors{};
  double anisotropy = 0.0;
  double eigen_entropy = 0.0;
  double linearity = 0.0;
  double omnivariance = 0.0;
  double planarity = 0.0;
  double sphericity = 0.0;
  double surface_variation = 0.0;
  // Per-cell member statistics.
  Vec3 mean;
  Vec3 variance;
  double area_normal = 0.0;
  double area_vertical = 0.0;
  std::uint32_t point_count = 0;
  double occupied_volume = 0.0;
  double density = 0.0;
  std::uint8_t conn_horizontal = 0;  // <= 4
  std::uint8_t conn_vertical = 0;    // <= 2
  std::uint8_t conn_diagonal = 0;    // <= 20
  bool degenerate = false;

  std::array<double, kFeatureDim> flatten() const;
};

struct FeatureSet {
  std::vector<FeatureVector> per_node;  // aligned with grid nodes
  std::uint32_t max_point_count = 0;
};

// Covariance support is every grid point within neighborhood_r of the node;
// the remaining statistics are per-cell. neighborhood_r <= 0 selects the
// default of 3 * cell size.
FeatureSet compute_features(const PointCloud& cloud, const VoxelGrid& grid,
                            double neighborhood_r = 0.0, int threads = 0);

// Min-max scaling of each flattened feature over the whole graph; constant
// features map to 0 (they carry no contrast).
struct FeatureScaling {
  std::array<double, kFeatureDim> min{};
  std::array<double, kFeatureDim> inv_range{};

  static FeatureScaling fit(const FeatureSet& features);
  std::array<double, kFeatureDim> apply(const std::array<double, kFeatureDim>& raw) const;
};

// Subset selection over the flattened scalars, grouped for the CLI.
struct FeatureMask {
  std::array<bool, kFeatureDim> enabled;

  static FeatureMask all();
  // Comma-separated groups out of: eigen, moments, area, density, connectivity.
  static FeatureMask parse(const std::string& groups);
};

struct WeightDiagnostics {
  std::uint64_t zero_norm_pairs = 0;
};

// Plain cosine similarity in [-1, 1]; zero-norm input yields 0.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

// Edge weight 1 - S_C in [0, 2] over scaled (and optionally masked) features.
double cosine_weight(const FeatureVector& a, const FeatureVector& b, const FeatureScaling& scaling,
                     const FeatureMask& mask, WeightDiagnostics* diag = nullptr);

// |m_a - m_b| / m_max in [0, 1].
double density_weight(const FeatureVector& a, const FeatureVector& b, std::uint32_t m_max);

}  // namespace treegraph
