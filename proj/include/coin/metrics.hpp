#pragma once

#include <cstddef>
#include <vector>

#include <json.hpp>

#include "coin/grid.hpp"

namespace coin {

double mask_iou(const BinaryMask& pred, const BinaryMask& gt);   // 1 if both empty
double mask_dice(const BinaryMask& pred, const BinaryMask& gt);  // 1 if both empty

struct PixelRates {
  double fp = 0.0;  // |pred \ gt| / |not gt|
  double fn = 0.0;  // |gt \ pred| / |gt|
};
PixelRates fp_fn_rates(const BinaryMask& pred, const BinaryMask& gt);

// Intersections between every (gt, pred) label pair, plus areas.
struct Overlap {
  std::uint32_t gt_count = 0;
  std::uint32_t pred_count = 0;
  std::vector<std::size_t> gt_area;    // index 1..gt_count
  std::vector<std::size_t> pred_area;  // index 1..pred_count
  std::vector<std::size_t> gt_first;   // scan index of first pixel
  std::vector<std::size_t> pred_first;
  std::vector<std::size_t> inter;      // (gt_count+1) x (pred_count+1)

  std::size_t at(std::uint32_t g, std::uint32_t p) const {
    return inter[static_cast<std::size_t>(g) * (pred_count + 1) + p];
  }
  double iou(std::uint32_t g, std::uint32_t p) const;
};
Overlap compute_overlap(const InstanceMap& pred, const InstanceMap& gt);

// Greedy Kumar AJI. GT instances are visited largest first (ties: earliest
// first pixel); each takes the unused prediction with the highest IoU (ties:
// earliest first pixel). Unused predictions join the union.
double aji(const InstanceMap& pred, const InstanceMap& gt);

struct PanopticQuality {
  double pq = 0.0;
  double sq = 0.0;
  double rq = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
};
PanopticQuality panoptic_quality(const InstanceMap& pred, const InstanceMap& gt);

struct AdjacencySplit {
  std::vector<std::uint32_t> adjacent;
  std::vector<std::uint32_t> non_adjacent;
};
// A cell is adjacent when its radius-dilated mask meets the dilated masks of
// at least min_neighbors other cells.
AdjacencySplit split_adjacent(const InstanceMap& gt, int dilate_radius = 2,
                              int min_neighbors = 1);

struct MetricSet {
  double aji = 0.0;
  double pq = 0.0;
  double sq = 0.0;
  double rq = 0.0;
  double iou = 0.0;
  double dice = 0.0;
  double fp = 0.0;
  double fn = 0.0;
};

struct MetricsReport {
  MetricSet overall;
  MetricSet adjacent;
  MetricSet non_adjacent;
  std::size_t gt_count = 0;
  std::size_t pred_count = 0;
  std::size_t matched = 0;
};

struct MetricsConfig {
  int adjacent_radius = 2;
  int adjacent_min_neighbors = 1;
};

MetricSet metric_set(const InstanceMap& pred, const InstanceMap& gt);
// Predictions join the stratum of the GT cell they overlap most; predictions
// touching no GT cell count only in the overall figures.
MetricsReport evaluate(const InstanceMap& pred, const InstanceMap& gt,
                       const MetricsConfig& config = {});
// Unweighted mean over images; counts are summed.
MetricsReport mean_report(const std::vector<MetricsReport>& reports);

nlohmann::json to_json(const MetricSet& m);
nlohmann::json to_json(const MetricsReport& report);
MetricsReport report_from_json(const nlohmann::json& j);

}  // namespace coin
