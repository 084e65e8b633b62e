#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "coin/grid.hpp"
#include "coin/oracle.hpp"

namespace coin {

enum class ThresholdMode {
  kMeanPlusStd,  // delta = mean + population std
  kStdOverMean,  // delta = std / mean (experimental reading)
};

struct ScoringConfig {
  ThresholdMode mode = ThresholdMode::kMeanPlusStd;
  // Naive baseline: skip scoring; every proposal becomes pseudo foreground.
  bool bypass = false;
};

struct ScoredInstance {
  std::uint32_t id = 0;
  Pixel prompt;
  std::size_t area = 0;
  double confidence = 0.0;
  int label = 0;  // 1 accepted fg, 0 certain bg, -1 rejected
  bool oracle_error = false;
};

struct ThresholdReport {
  double mean = 0.0;
  double std = 0.0;
  double delta = 0.0;
};

struct ImageScores {
  std::string image_id;
  std::vector<ScoredInstance> instances;
  ThresholdReport threshold;

  std::size_t accepted() const;  // labels 1 and 0
  std::size_t rejected() const;
};

// IoU of the two masks; 0 when both are empty.
double score_instance(const BinaryMask& instance, const BinaryMask& proposal);

ThresholdReport adaptive_threshold(const std::vector<double>& confidences,
                                   ThresholdMode mode = ThresholdMode::kMeanPlusStd);

// 1 if c > delta, -1 if 0 < c <= delta, 0 if c == 0.
int classify_confidence(double confidence, double delta);
std::vector<int> classify_instances(const std::vector<double>& confidences, double delta);
// Threshold and classify in one step. In mean_plus_std mode, scores within
// rounding distance of delta are decided exactly over the rationals.
std::vector<int> classify_scores(const std::vector<double>& confidences,
                                 ThresholdMode mode = ThresholdMode::kMeanPlusStd);

// Prompts every instance at its center point. Oracle errors give confidence 0
// and are logged.
ImageScores score_image(const std::string& image_id, const InstanceMap& instances,
                        MaskProposalOracle& oracle, const ScoringConfig& config = {});

struct PseudoLabelPair {
  BinaryMask binary;  // 0, 1 or kIgnore
  BinaryMask edge;    // 0, 1 or kIgnore
};

// labels[i] belongs to instance id i+1.
PseudoLabelPair build_pseudo_masks(const InstanceMap& instances, const std::vector<int>& labels);
PseudoLabelPair build_pseudo_masks(const InstanceMap& instances, const ImageScores& scores);
// Naive baseline: union of all proposals is foreground, nothing is ignored,
// and edges come from the proposals' boundaries.
PseudoLabelPair naive_pseudo_masks(const std::string& image_id, const InstanceMap& instances,
                                   MaskProposalOracle& oracle);

// Scored instances pooled over images, with the ground truth they are judged
// against.
struct ScoredImage {
  const ImageScores* scores = nullptr;
  const InstanceMap* instances = nullptr;
  const InstanceMap* gt = nullptr;
};

struct TopKPoint {
  double fraction = 0.0;
  std::size_t k = 0;
  double scored = 0.0;  // mean per-instance AJI of the top-k by confidence
  double random = 0.0;  // same over random draws of k instances
  double scored_pooled = 0.0;
  double random_pooled = 0.0;
};

// Each instance is paired with the GT cell of highest IoU; its AJI is then
// |inst ∩ gt| / |inst ∪ gt|, or 0 when nothing overlaps. The pooled variants
// sum intersections and unions over the set instead.
std::vector<TopKPoint> topk_confidence_curve(const std::vector<ScoredImage>& images,
                                             const std::vector<double>& fractions,
                                             std::uint64_t seed, int random_draws = 64);
std::vector<double> default_topk_fractions();

nlohmann::json to_json(const ImageScores& scores);
nlohmann::json to_json(const ThresholdReport& t);

}  // namespace coin
