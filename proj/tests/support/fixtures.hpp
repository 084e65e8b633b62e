#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "coin/grid.hpp"
#include "coin/distill.hpp"
#include "coin/metrics.hpp"
#include "coin/propagation.hpp"
#include "coin/synth.hpp"

namespace coin::testing {

using Rng = std::mt19937_64;

BinaryMask disc(int h, int w, double cy, double cx, double r);
BinaryMask random_mask(Rng& rng, int h, int w, double p);
// Every pixel draws a label in 0..max_instances, then labels are compacted.
InstanceMap random_instances(Rng& rng, int h, int w, int max_instances);
FeatureGrid random_features(Rng& rng, int h, int w, int d);

// Distance to the nearest background pixel by scanning all of them; pixels
// outside the image are background.
DistanceMap brute_force_edt(const BinaryMask& mask);

// Greedy AJI computed from per-instance masks, same visiting order as the
// library: GT by area descending then first pixel, candidates by IoU then
// first pixel.
double reference_aji(const InstanceMap& pred, const InstanceMap& gt);

// Best one-to-one matching over every injective assignment restricted to
// IoU > 0.5 pairs.
PanopticQuality reference_pq(const InstanceMap& pred, const InstanceMap& gt);

// Threshold and trichotomy evaluated exactly over the rationals.
std::vector<int> brute_force_labels(const std::vector<double>& confidences);

// Minimum of sum T (1 - S) + lambda sum T log T over plans on a grid with
// `steps` points per free coordinate. Supports up to 4 pixels and 2 classes.
double grid_search_objective(const SimilarityMap& sim, const std::vector<double>& r, double c0,
                             double c1, double lambda, int steps, int zooms = 0);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t parameters = 0;
  int resamples = 0;  // fixtures dropped for a pre-activation within reach of the ReLU kink
};
// Random student, features and targets (some pixels ignored); compares every
// analytic gradient with a central difference of the given step. Relative
// error is |a - f| / max(|a|, |f|, floor).
GradCheckResult gradient_check(std::uint64_t seed, double step = 1e-3, double floor = 1e-4);

// Small fixture for fast unit tests.
SynthConfig small_synth(std::uint64_t seed = 3);

class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Every regular file below root, relative path -> contents.
std::vector<std::pair<std::string, std::string>> read_tree(const std::filesystem::path& root);

}  // namespace coin::testing
