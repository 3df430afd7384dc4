#include "treegraph/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <unordered_map>

namespace treegraph {
namespace {

double entropy_from_counts(const std::unordered_map<std::int32_t, std::uint64_t>& counts,
                           double n) {
  double h = 0.0;
  for (const auto& [label, c] : counts) {
    const double p = static_cast<double>(c) / n;
    h -= p * std::log(p);
  }
  return h;
}

}  // namespace

TrunkMatchResult match_trunks(std::span<const TrunkPoint> detected,
                              std::span<const TrunkPoint> truth, double max_dist) {
  if (!(max_dist > 0.0)) throw Error("match_trunks: max distance must be positive");
  struct Pair {
    double d;
    std::size_t det;
    std::size_t tru;
  };
  std::vector<Pair> pairs;
  pairs.reserve(detected.size() * truth.size());
  for (std::size_t i = 0; i < detected.size(); ++i) {
    for (std::size_t j = 0; j < truth.size(); ++j) {
      const double d = distance(detected[i].position, truth[j].position);
      if (d <= max_dist) pairs.push_back({d, i, j});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.d != b.d) return a.d < b.d;
    if (a.det != b.det) return a.det < b.det;
    return a.tru < b.tru;
  });

  std::vector<std::uint8_t> det_used(detected.size(), 0), tru_used(truth.size(), 0);
  TrunkMatchResult res;
  double dist_sum = 0.0;
  for (const auto& p : pairs) {
    if (det_used[p.det] != 0 || tru_used[p.tru] != 0) continue;
    det_used[p.det] = 1;
    tru_used[p.tru] = 1;
    ++res.tp;
    dist_sum += p.d;
  }
  res.fp = static_cast<int>(detected.size()) - res.tp;
  res.fn = static_cast<int>(truth.size()) - res.tp;
  res.mean_tp_distance = res.tp > 0 ? dist_sum / res.tp : 0.0;
  res.precision = res.tp + res.fp > 0 ? static_cast<double>(res.tp) / (res.tp + res.fp) : 0.0;
  res.recall = res.tp + res.fn > 0 ? static_cast<double>(res.tp) / (res.tp + res.fn) : 0.0;
  res.f1 = res.precision + res.recall > 0.0
               ? 2.0 * res.precision * res.recall / (res.precision + res.recall)
               : 0.0;
  return res;
}

VMeasure v_measure_parts(std::span<const std::int32_t> pred, std::span<const std::int32_t> truth) {
  if (pred.size() != truth.size()) throw Error("v_measure: labelings differ in size");
  if (pred.empty()) throw Error("v_measure: empty labeling");
  const double n = static_cast<double>(pred.size());

  std::unordered_map<std::int32_t, std::uint64_t> pred_counts, truth_counts;
  std::unordered_map<std::uint64_t, std::uint64_t> joint;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    ++pred_counts[pred[i]];
    ++truth_counts[truth[i]];
    const std::uint64_t key = (static_cast<std::uint64_t>(static_cast<std::uint32_t>(pred[i]))
                               << 32) |
                              static_cast<std::uint32_t>(truth[i]);
    ++joint[key];
  }

  const double h_pred = entropy_from_counts(pred_counts, n);
  const double h_truth = entropy_from_counts(truth_counts, n);
  // Conditional entropies from the joint distribution.
  double h_truth_given_pred = 0.0;
  double h_pred_given_truth = 0.0;
  for (const auto& [key, c] : joint) {
    const std::int32_t p = static_cast<std::int32_t>(static_cast<std::uint32_t>(key >> 32));
    const std::int32_t t = static_cast<std::int32_t>(static_cast<std::uint32_t>(key));
    const double pj = static_cast<double>(c) / n;
    const double p_pred = static_cast<double>(pred_counts[p]) / n;
    const double p_truth = static_cast<double>(truth_counts[t]) / n;
    h_truth_given_pred -= pj * std::log(pj / p_pred);
    h_pred_given_truth -= pj * std::log(pj / p_truth);
  }

  VMeasure out;
  out.homogeneity = h_truth > 0.0 ? 1.0 - h_truth_given_pred / h_truth : 1.0;
  out.completeness = h_pred > 0.0 ? 1.0 - h_pred_given_truth / h_pred : 1.0;
  const double hc = out.homogeneity + out.completeness;
  out.v = hc > 0.0 ? 2.0 * out.homogeneity * out.completeness / hc : 0.0;
  return out;
}

double v_measure(std::span<const std::int32_t> pred, std::span<const std::int32_t> truth) {
  return v_measure_parts(pred, truth).v;
}

double binary_f1(std::span<const MatterClass> pred, std::span<const MatterClass> truth,
                 MatterClass positive, std::string* diagnostic) {
  if (pred.size() != truth.size()) throw Error("binary_f1: labelings differ in size");
  std::uint64_t tp = 0, fp = 0, fn = 0, pos_seen = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] == positive;
    const bool t = truth[i] == positive;
    pos_seen += (p || t) ? 1 : 0;
    if (p && t) {
      ++tp;
    } else if (p) {
      ++fp;
    } else if (t) {
      ++fn;
    }
  }
  if (pos_seen == 0) {
    if (diagnostic != nullptr) *diagnostic = "no positive-class points in either labeling";
    return 1.0;
  }
  const double denom = static_cast<double>(2 * tp + fp + fn);
  return denom > 0.0 ? 2.0 * static_cast<double>(tp) / denom : 0.0;
}

std::pair<std::vector<std::int32_t>, std::vector<std::int32_t>> filter_tree_labels(
    std::span<const std::int32_t> pred, std::span<const std::int32_t> truth) {
  if (pred.size() != truth.size()) throw Error("filter_tree_labels: size mismatch");
  std::pair<std::vector<std::int32_t>, std::vector<std::int32_t>> out;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] > 0 && truth[i] > 0) {
      out.first.push_back(pred[i]);
      out.second.push_back(truth[i]);
    }
  }
  return out;
}

std::pair<std::vector<MatterClass>, std::vector<MatterClass>> filter_matter_labels(
    std::span<const MatterClass> pred, std::span<const MatterClass> truth) {
  if (pred.size() != truth.size()) throw Error("filter_matter_labels: size mismatch");
  const auto is_matter = [](MatterClass c) {
    return c == MatterClass::leafy || c == MatterClass::woody;
  };
  std::pair<std::vector<MatterClass>, std::vector<MatterClass>> out;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (is_matter(pred[i]) && is_matter(truth[i])) {
      out.first.push_back(pred[i]);
      out.second.push_back(truth[i]);
    }
  }
  return out;
}

}  // namespace treegraph
