#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

#include "coin/grid.hpp"
#include "coin/metrics.hpp"
#include "coin/morphology.hpp"
#include "coin/oracle.hpp"
#include "coin/propagation.hpp"
#include "coin/scoring.hpp"

namespace coin {

// Per-pixel two-head student: h = relu(W1 x + b1), p_fg = sigmoid(wb.h + bb),
// p_edge = sigmoid(we.h + be).
struct StudentParams {
  int depth = 0;
  int hidden = 0;
  std::vector<float> w1;  // hidden x depth, row-major
  std::vector<float> b1;  // hidden
  std::vector<float> w_bin;
  float b_bin = 0.0f;
  std::vector<float> w_edge;
  float b_edge = 0.0f;

  static StudentParams zeros(int depth, int hidden);
  // Trunk ~ N(0, 1/depth), heads ~ N(0, 1/hidden), biases 0.
  static StudentParams random(int depth, int hidden, std::uint64_t seed);
  void check_finite() const;
  friend bool operator==(const StudentParams&, const StudentParams&) = default;
};

struct StudentGrads {
  std::vector<double> w1, b1, w_bin, w_edge;
  double b_bin = 0.0;
  double b_edge = 0.0;
};

struct StudentOutput {
  Grid<float> p_fg;
  Grid<float> p_edge;
};

StudentOutput student_forward(const StudentParams& params, const FeatureGrid& features);

struct LossReport {
  double total = 0.0;
  double ce_bin = 0.0;
  double dice_bin = 0.0;
  double ce_edge = 0.0;
  double dice_edge = 0.0;
  std::size_t counted = 0;  // non-ignore pixels
  bool all_ignored = false;
};

inline constexpr double kCeClamp = 1e-7;
inline constexpr double kDiceEps = 1.0;

// CE + Dice for each head over non-ignore pixels, summed.
LossReport loss_seg(const Grid<float>& p_fg, const Grid<float>& p_edge, const BinaryMask& bin_target,
                    const BinaryMask& edge_target);

// Forward, loss and backward in double precision.
struct LossAndGrads {
  LossReport loss;
  StudentGrads grads;
};
LossAndGrads loss_and_grads(const StudentParams& params, const FeatureGrid& features,
                            const BinaryMask& bin_target, const BinaryMask& edge_target);

struct TrainSample {
  const FeatureGrid* features = nullptr;
  const BinaryMask* bin_target = nullptr;
  const BinaryMask* edge_target = nullptr;
};

struct EpochReport {
  double mean_loss = 0.0;
  std::size_t steps = 0;
};

// One full-batch gradient step per sample, visiting samples in an order
// shuffled by (seed, epoch).
EpochReport train_epoch(StudentParams& params, const std::vector<TrainSample>& data, double lr,
                        std::uint64_t seed, int epoch);

InstanceMap predict_instances(const StudentParams& params, const FeatureGrid& features,
                              const MorphConfig& morph);

struct DistillConfig {
  int rounds = 3;
  int epochs = 20;
  double lr = 0.1;
  int hidden = 32;
  std::uint64_t seed = 1;
};

struct CoinConfig {
  PropagationConfig propagation;
  MorphConfig morph;
  ScoringConfig scoring;
  DistillConfig distill;
  MetricsConfig metrics;
};

struct RoundSummary {
  int round = 0;  // 0 = Step-1 only
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t instances = 0;
  double train_loss = 0.0;
  bool has_metrics = false;
  MetricsReport test;  // mean over evaluation images
  std::vector<ImageScores> scores;  // training images, this round
};

struct CoinResult {
  StudentParams params;
  std::vector<RoundSummary> rounds;
  // Final predictions for every record, in dataset order.
  std::vector<InstanceMap> predictions;
};

// Step-1 instances: propagate, then split with the watershed.
InstanceMap step1_instances(const ImageRecord& record, const CoinConfig& config, int jobs = 1);

// Trains on records with split "train" and evaluates on split "test" (all
// records when there is no test split). Round 0 reports Step-1 alone.
CoinResult run_coin(const std::vector<ImageRecord>& records, MaskProposalOracle& oracle,
                    const CoinConfig& config, int jobs = 1);

void save_checkpoint(const StudentParams& params, const std::filesystem::path& dir);
StudentParams load_checkpoint(const std::filesystem::path& dir);

}  // namespace coin
