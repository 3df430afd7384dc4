#include "treegraph/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "treegraph/parallel.hpp"
#include "treegraph/rng.hpp"

namespace treegraph {
namespace {

constexpr std::uint64_t kStreamTreeStructure = 1;
constexpr std::uint64_t kStreamTreeNoise = 2;
constexpr std::uint64_t kStreamGroundStructure = 3;
constexpr std::uint64_t kStreamGroundNoise = 4;

constexpr double kWoodPointsPerM2 = 1100.0;
constexpr double kLeafClusterMin = 300.0;
constexpr double kLeafClusterMax = 500.0;
constexpr double kChildRadiusScale = 0.6;
constexpr double kUpwardBias = 0.3;

struct Basis {
  Vec3 u;
  Vec3 v;
};

Basis orthobasis(const Vec3& dir) {
  const Vec3 ref = std::fabs(dir.z) < 0.9 ? Vec3{0, 0, 1} : Vec3{1, 0, 0};
  const Vec3 u = dir.cross(ref).normalized();
  return {u, dir.cross(u)};
}

Vec3 perturb(const Vec3& dir, double polar, double azimuth) {
  const Basis b = orthobasis(dir);
  const Vec3 lateral = b.u * std::cos(azimuth) + b.v * std::sin(azimuth);
  return (dir * std::cos(polar) + lateral * std::sin(polar)).normalized();
}

struct TreeBuild {
  std::vector<PointRecord> points;
  std::vector<SkeletonSegment> skeleton;
};

class TreeGenerator {
 public:
  TreeGenerator(const OrchardSpec& spec, Vec3 base, std::int32_t tree_id, std::uint64_t seed)
      : spec_(spec),
        base_(base),
        tree_id_(tree_id),
        structure_(derive_seed(seed, kStreamTreeStructure, static_cast<std::uint64_t>(tree_id))),
        noise_(derive_seed(seed, kStreamTreeNoise, static_cast<std::uint64_t>(tree_id))) {}

  TreeBuild run() {
    height_ = structure_.uniform(spec_.height_min, spec_.height_max);
    // Skeleton endpoints stay inside the canopy radius with room for the
    // truncated leaf clusters and the bark radius.
    lateral_cap_ = std::max(0.5, spec_.canopy_radius - 2.5 * spec_.leaf_sigma - 0.15);

    const double split_height = std::min(structure_.uniform(1.1, 1.4), 0.45 * height_);
    const double trunk_radius = structure_.uniform(0.09, 0.12);
    const Vec3 top = base_ + Vec3{0, 0, split_height};
    emit_segment({base_, top, trunk_radius, 1});

    const int limbs = structure_.uniform(0.0, 1.0) < 0.6 ? 3 : 2;
    const double limb_len_base = (height_ - split_height);
    for (int i = 0; i < limbs; ++i) {
      const Vec3 dir = child_direction({0, 0, 1}, i, limbs);
      const double len = limb_len_base * structure_.uniform(0.6, 0.8);
      branch(top, dir, len, trunk_radius * kChildRadiusScale, 2);
    }

    apply_noise();
    return std::move(build_);
  }

 private:
  Vec3 child_direction(const Vec3& parent, int index, int siblings) {
    const double polar = structure_.uniform(spec_.branch_angle_min_deg * std::numbers::pi / 180.0,
                                            spec_.branch_angle_max_deg * std::numbers::pi / 180.0);
    const double azimuth = 2.0 * std::numbers::pi * index / siblings +
                           structure_.uniform(-0.4, 0.4);
    const Vec3 dir = perturb(parent, polar, azimuth);
    return (dir + Vec3{0, 0, kUpwardBias}).normalized();
  }

  Vec3 cap_lateral(const Vec3& start, const Vec3& end) const {
    const double dx = end.x - base_.x;
    const double dy = end.y - base_.y;
    const double lat = std::hypot(dx, dy);
    if (lat <= lateral_cap_) return end;
    const double f = lateral_cap_ / lat;
    Vec3 capped{base_.x + dx * f, base_.y + dy * f, end.z};
    // Keep a sliver of segment even when the start already sits at the cap.
    if (distance(start, capped) < 0.05) capped.z += 0.05;
    return capped;
  }

  void branch(const Vec3& start, const Vec3& dir, double length, double radius, int depth) {
    const Vec3 end = cap_lateral(start, start + dir * length);
    emit_segment({start, end, radius, depth});
    // Foliage wraps the outer branches, not just the twig tips; interior
    // clusters sit on the segment axis so leaves and bark interleave.
    if (depth >= 2 && spec_.interior_leaf_spacing > 0.0) {
      const double len = distance(start, end);
      const int k = static_cast<int>(len / spec_.interior_leaf_spacing);
      for (int i = 1; i <= k; ++i) {
        const double t = i * spec_.interior_leaf_spacing / len;
        emit_leaf_cluster(start + (end - start) * t, spec_.interior_leaf_scale);
      }
    }
    if (depth >= spec_.branching_depth) {
      emit_leaf_cluster(end, 1.0);
      return;
    }
    const int kids = structure_.uniform(0.0, 1.0) < 0.35 ? 3 : 2;
    for (int i = 0; i < kids; ++i) {
      const Vec3 cd = child_direction(dir, i, kids);
      const double cl = length * structure_.uniform(0.55, 0.75);
      branch(end, cd, cl, radius * kChildRadiusScale, depth + 1);
    }
  }

  double falloff(double z) const {
    if (spec_.canopy_falloff <= 0.0) return 1.0;
    const double rel = std::clamp((z - base_.z) / height_, 0.0, 1.0);
    return 1.0 - spec_.canopy_falloff * rel;
  }

  void emit_segment(const SkeletonSegment& seg) {
    build_.skeleton.push_back(seg);
    const double len = distance(seg.a, seg.b);
    const double area = len * 2.0 * std::numbers::pi * seg.radius;
    const double mid_z = 0.5 * (seg.a.z + seg.b.z);
    const long count = std::lround(
        std::max(4.0, area * kWoodPointsPerM2 * spec_.wood_density * spec_.density_scale *
                          falloff(mid_z)));
    const Vec3 axis = (seg.b - seg.a).normalized();
    const Basis basis = orthobasis(axis);
    for (long i = 0; i < count; ++i) {
      const double t = structure_.uniform();
      const double phi = structure_.uniform(0.0, 2.0 * std::numbers::pi);
      const Vec3 radial = basis.u * std::cos(phi) + basis.v * std::sin(phi);
      emit_point(seg.a + (seg.b - seg.a) * t + radial * seg.radius, MatterClass::woody);
    }
  }

  void emit_leaf_cluster(const Vec3& center, double scale) {
    const double base_count = structure_.uniform(kLeafClusterMin, kLeafClusterMax) * scale;
    const long count = std::lround(
        std::max(8.0, base_count * spec_.leaf_density * spec_.density_scale * falloff(center.z)));
    const double limit = 2.5 * spec_.leaf_sigma;
    for (long i = 0; i < count; ++i) {
      Vec3 offset;
      do {
        offset = Vec3{structure_.normal(), structure_.normal(), structure_.normal()} *
                 spec_.leaf_sigma;
      } while (offset.norm() > limit);
      emit_point(center + offset, MatterClass::leafy);
    }
  }

  void emit_point(const Vec3& p, MatterClass matter) {
    PointRecord r;
    r.x = p.x;
    r.y = p.y;
    r.z = p.z;
    r.tree_id = tree_id_;
    r.matter = matter;
    build_.points.push_back(r);
  }

  void apply_noise() {
    if (spec_.noise_sigma <= 0.0) return;
    for (auto& p : build_.points) {
      p.x += spec_.noise_sigma * noise_.normal();
      p.y += spec_.noise_sigma * noise_.normal();
      p.z += spec_.noise_sigma * noise_.normal();
    }
  }

  const OrchardSpec& spec_;
  Vec3 base_;
  std::int32_t tree_id_;
  Rng structure_;
  Rng noise_;
  double height_ = 0.0;
  double lateral_cap_ = 0.0;
  TreeBuild build_;
};

}  // namespace

SyntheticOrchard generate_orchard(const OrchardSpec& spec) {
  if (spec.rows < 1 || spec.trees_per_row < 1) throw Error("generate_orchard: need >= 1 tree");
  if (!(spec.row_spacing > 0.0) || !(spec.tree_spacing > 0.0)) {
    throw Error("generate_orchard: spacings must be positive");
  }
  if (spec.noise_sigma < 0.0) throw Error("generate_orchard: negative noise");
  if (spec.branching_depth < 2 || spec.branching_depth > 6) {
    throw Error("generate_orchard: branching depth out of range [2, 6]");
  }
  if (!(spec.density_scale > 0.0)) throw Error("generate_orchard: density scale must be positive");

  const int n_trees = spec.rows * spec.trees_per_row;
  SyntheticOrchard out;
  out.cloud.has_tree_ids = true;
  out.cloud.has_classes = true;
  out.trunks.reserve(static_cast<std::size_t>(n_trees));
  out.skeletons.resize(static_cast<std::size_t>(n_trees));

  std::vector<Vec3> bases(static_cast<std::size_t>(n_trees));
  for (int r = 0; r < spec.rows; ++r) {
    for (int c = 0; c < spec.trees_per_row; ++c) {
      const int t = r * spec.trees_per_row + c;
      bases[static_cast<std::size_t>(t)] = {c * spec.tree_spacing, r * spec.row_spacing, 0.0};
      out.trunks.push_back({bases[static_cast<std::size_t>(t)], t + 1});
    }
  }

  // Ground: jittered grid at z = 0 covering the lattice plus a margin.
  {
    Rng ground(derive_seed(spec.seed, kStreamGroundStructure, 0));
    Rng ground_noise(derive_seed(spec.seed, kStreamGroundNoise, 0));
    const double g = spec.ground_spacing / std::sqrt(spec.density_scale);
    const double x0 = -spec.ground_margin;
    const double x1 = (spec.trees_per_row - 1) * spec.tree_spacing + spec.ground_margin;
    const double y0 = -spec.ground_margin;
    const double y1 = (spec.rows - 1) * spec.row_spacing + spec.ground_margin;
    const long nx = std::lround(std::floor((x1 - x0) / g)) + 1;
    const long ny = std::lround(std::floor((y1 - y0) / g)) + 1;
    for (long j = 0; j < ny; ++j) {
      for (long i = 0; i < nx; ++i) {
        PointRecord r;
        r.x = x0 + i * g + ground.uniform(-0.4 * g, 0.4 * g);
        r.y = y0 + j * g + ground.uniform(-0.4 * g, 0.4 * g);
        r.z = 0.0;
        r.tree_id = kGroundTreeId;
        r.matter = MatterClass::ground;
        if (spec.noise_sigma > 0.0) {
          r.x += spec.noise_sigma * ground_noise.normal();
          r.y += spec.noise_sigma * ground_noise.normal();
          r.z += spec.noise_sigma * ground_noise.normal();
        }
        out.cloud.points.push_back(r);
      }
    }
  }

  std::vector<TreeBuild> builds(static_cast<std::size_t>(n_trees));
  parallel_for(static_cast<std::size_t>(n_trees), spec.threads, [&](std::size_t t) {
    TreeGenerator gen(spec, bases[t], static_cast<std::int32_t>(t) + 1, spec.seed);
    builds[t] = gen.run();
  });
  for (std::size_t t = 0; t < builds.size(); ++t) {
    out.cloud.points.insert(out.cloud.points.end(), builds[t].points.begin(),
                            builds[t].points.end());
    out.skeletons[t] = std::move(builds[t].skeleton);
  }
  return out;
}

}  // namespace treegraph
