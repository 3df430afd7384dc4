// Scoring protocols: trunk matching, v-measure, binary F1.
#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "treegraph/types.hpp"

namespace treegraph {

struct TrunkMatchResult {
  int tp = 0;
  int fp = 0;
  int fn = 0;
  double mean_tp_distance = 0.0;  // 0 when there are no true positives
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// One-to-one greedy matching over globally distance-sorted pairs; pairs beyond
// max_dist never match.
TrunkMatchResult match_trunks(std::span<const TrunkPoint> detected,
                              std::span<const TrunkPoint> truth, double max_dist = 1.0);

struct VMeasure {
  double homogeneity = 0.0;
  double completeness = 0.0;
  double v = 0.0;
};

// Rosenberg-Hirschberg v-measure. Conventions: H(truth)=0 makes h=1, H(pred)=0
// makes c=1, and v=0 when h+c=0. Empty input is an error.
VMeasure v_measure_parts(std::span<const std::int32_t> pred, std::span<const std::int32_t> truth);
double v_measure(std::span<const std::int32_t> pred, std::span<const std::int32_t> truth);

// Standard F1 over the positive class. When neither labeling contains the
// positive class the score is defined as 1 and `diagnostic` is set.
double binary_f1(std::span<const MatterClass> pred, std::span<const MatterClass> truth,
                 MatterClass positive = MatterClass::woody, std::string* diagnostic = nullptr);

// Keeps index i when both labels are actual trees (> 0).
std::pair<std::vector<std::int32_t>, std::vector<std::int32_t>> filter_tree_labels(
    std::span<const std::int32_t> pred, std::span<const std::int32_t> truth);

// Keeps index i when both classes are leafy or woody.
std::pair<std::vector<MatterClass>, std::vector<MatterClass>> filter_matter_labels(
    std::span<const MatterClass> pred, std::span<const MatterClass> truth);

}  // namespace treegraph
