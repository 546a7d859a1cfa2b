#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "idn/scoring.hpp"

namespace idn {

Real iou(const Box& a, const Box& b);

struct Detection {
  std::int64_t image = 0;
  Box human;
  Box object;
  std::size_t composition = 0;
  Real score = 0;
};

struct GroundTruth {
  std::int64_t image = 0;
  Box human;
  Box object;
  std::size_t composition = 0;
};

// Area under the precision envelope (all-point interpolation), given the
// TP/FP flags of detections in descending score order.
Real average_precision(const std::vector<bool>& true_positive, std::size_t n_groundtruth);

// TP flags in descending score order for one composition. Detections are
// visited by score (ties keep input order); each claims the unmatched ground
// truth in its image whose smaller of the two IoUs is largest, provided both
// reach the threshold.
std::vector<bool> match_detections(std::span<const Detection> detections, std::span<const GroundTruth> groundtruth,
                                   Real iou_threshold = 0.5);

struct MapResult {
  // Per composition; empty when the composition has no ground truth.
  std::vector<std::optional<Real>> ap;
  Real full = 0;                         // mean over defined APs
  std::map<std::string, Real> splits;    // mean per catalog split with at least one defined AP
};

MapResult compute_map(std::span<const Detection> detections, std::span<const GroundTruth> groundtruth,
                      const HoiCatalog& catalog, Real iou_threshold = 0.5);

// Flattens detection records into per-composition detections.
std::vector<Detection> to_detections(std::span<const DetectionRecord> records);
// Every verb of every interactive pair, image id = pair index.
std::vector<GroundTruth> groundtruth_from(const Dataset& dataset, const HoiCatalog& catalog);

// "composition,verb,category,split,ap" rows followed by "mean,<split>,<value>" rows.
std::string format_map_csv(const MapResult& result, const HoiCatalog& catalog);

// Per-verb AP of ranking all pairs by score[:, v] against the labels, and their
// mean over verbs with at least one positive.
struct VerbMap {
  std::vector<std::optional<Real>> ap;
  Real mean = 0;
};
VerbMap verb_classification_map(const Tensor& scores, const Dataset& dataset, std::span<const std::size_t> pair_indices);

// D1: mean squared distance from the anchor's f_u to the other pairs' f_u^i.
// D2: mean distance of T_I^v applied to the anchor with one instance swapped
// for pair i's, measured against f_u^i. The anchor is the first pair with v.
struct IptDiagnostic {
  int verb = 0;
  std::optional<Real> d1;
  std::optional<Real> d2;  // both empty when fewer than two pairs carry v
};
IptDiagnostic ipt_diagnostic(const IdnModel& model, const Dataset& dataset, int verb);
std::vector<IptDiagnostic> ipt_diagnostics(const IdnModel& model, const Dataset& dataset);
// "verb,D1,D2" with "absent" for skipped verbs.
std::string format_diagnostic_csv(std::span<const IptDiagnostic> rows);

void write_text(const std::filesystem::path& path, const std::string& content);

}  // namespace idn
