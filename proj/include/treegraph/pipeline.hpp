// End-to-end composition: preprocess -> trunks -> segment -> classify, plus
// the synthetic experiment sweep driver.
#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "treegraph/classify.hpp"
#include "treegraph/segment.hpp"
#include "treegraph/synth.hpp"
#include "treegraph/trunk_detect.hpp"
#include "treegraph/types.hpp"

namespace treegraph {

struct AnalyzeParams {
  SegmentParams segment;
  TrunkDetectionConfig trunk;
  ClassifyParams classify;
  bool detect = true;          // detect trunks when none are provided
  double trunk_match_dist = 1.0;
  int threads = 0;             // overrides per-stage thread counts when > 0

  void propagate_threads() {
    if (threads > 0) {
      segment.threads = threads;
      trunk.threads = threads;
      classify.threads = threads;
    }
  }
};

struct AnalyzeResult {
  std::vector<TrunkPoint> trunks;        // the trunks the pipeline ran with
  bool trunks_detected = false;
  std::vector<std::int32_t> tree_ids;    // per point
  std::vector<MatterClass> classes;      // per point
  PointCloud labeled;                    // input cloud with labels written back
  nlohmann::ordered_json manifest;
};

// provided_trunks empty -> detect (params.detect must allow it); truth_trunks,
// when non-empty, are only used for detection metrics. Truth labels for
// metrics come from the input cloud's columns.
AnalyzeResult analyze(const PointCloud& cloud, std::span<const TrunkPoint> provided_trunks,
                      std::span<const TrunkPoint> truth_trunks, const AnalyzeParams& params = {});

struct SweepSpec {
  std::vector<double> noise;          // sigma values
  std::vector<double> spacing;        // <= 0 entries keep the base spacings
  std::vector<std::uint64_t> seeds;
  OrchardSpec base;
  AnalyzeParams params;
  bool use_truth_trunks = true;       // drive segmentation from generator trunks
  bool detect_metrics = true;         // also run detection and score it
};

struct SweepRow {
  double noise = 0.0;
  double spacing = 0.0;
  std::uint64_t seed = 0;
  std::string metric;
  double value = 0.0;
  double runtime_s = 0.0;
};

// Runs the full grid; per-cell failures produce a metric="error" row and the
// sweep continues.
std::vector<SweepRow> run_sweep(const SweepSpec& spec);

SweepSpec parse_sweep_spec(const nlohmann::json& j);
void write_sweep_csv(std::span<const SweepRow> rows, const std::filesystem::path& path);

}  // namespace treegraph
