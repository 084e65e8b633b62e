#pragma once

#include <vector>

#include "coin/grid.hpp"
#include "coin/patches.hpp"

namespace coin {

struct ClassCentroids {
  std::vector<float> cell;
  std::vector<float> tissue;
  bool fallback = false;  // produced by two_means because a seed class was empty
  bool uniform = false;   // two_means found a single cluster; the patch keeps the seed class
  bool borrowed = false;  // a class missing from the patch seed took the image-level centroid
};

// Plain 2-means (Lloyd, Euclidean) seeded with the farthest pair of pixels.
// Exact farthest pair up to kExactFarthestPairLimit pixels, double sweep above.
struct TwoMeansResult {
  std::vector<float> centroid_a;  // cluster of the first init point
  std::vector<float> centroid_b;
  std::size_t size_a = 0;
  std::size_t size_b = 0;
};
inline constexpr std::size_t kExactFarthestPairLimit = 4096;
TwoMeansResult two_means(const FeatureGrid& features, int iterations = 10);

ClassCentroids cap_centroids(const FeatureGrid& features, const BinaryMask& seed);
// Patch CAP; a class absent from the patch seed takes the image-level
// centroid. Falls back to cap_centroids when the image level is itself a fallback.
ClassCentroids patch_centroids(const FeatureGrid& patch, const BinaryMask& patch_seed,
                               const ClassCentroids& image);

struct SimilarityMap {
  Grid<float> cell;
  Grid<float> tissue;

  int height() const noexcept { return cell.height(); }
  int width() const noexcept { return cell.width(); }
};

SimilarityMap similarity_map(const FeatureGrid& features, const ClassCentroids& centroids);

struct SinkhornOptions {
  double lambda = 0.1;
  double tol = 1e-6;
  int max_iter = 2000;
  double log_domain_below = 0.05;  // lambda <= this runs in the log domain
};

// Two-column plan stored column-wise: t0 = cell mass, t1 = tissue mass.
struct TransportPlan {
  std::vector<double> t0;
  std::vector<double> t1;
  std::vector<double> r;
  double c0 = 0.0;
  double c1 = 0.0;
  double lambda = 0.0;
  int iterations = 0;
  bool converged = false;
  bool log_domain = false;
  double residual = 0.0;
  std::vector<double> residual_history;  // max marginal violation per iteration

  std::size_t size() const noexcept { return t0.size(); }
  double objective(const SimilarityMap& sim) const;
};

// Target marginal c from the argmax class mass of sim (tie -> tissue),
// floored at kMassFloor and renormalized; r uniform.
inline constexpr double kMassFloor = 1e-3;
std::pair<double, double> target_marginal(const SimilarityMap& sim);

TransportPlan sinkhorn_plan(const SimilarityMap& sim, const SinkhornOptions& options);
// Same solver with explicit marginals; used by the brute-force checks.
TransportPlan sinkhorn_plan(const SimilarityMap& sim, std::vector<double> r, double c0,
                            double c1, const SinkhornOptions& options);

// Entropic objective sum T(1-S) - lambda H(T), H = -sum T log T.
double entropic_objective(const std::vector<double>& t0, const std::vector<double>& t1,
                          const SimilarityMap& sim, double lambda);

struct PropagatedMask {
  Grid<float> cell_score;
  Grid<float> tissue_score;
  BinaryMask foreground;
};

PropagatedMask ot_refine(const SimilarityMap& sim, const TransportPlan& plan);
// Argmax of the raw similarity map (propagation without OT).
PropagatedMask argmax_mask(const SimilarityMap& sim);

struct PropagationConfig {
  SinkhornOptions ot;
  bool use_ot = true;
  int per_axis = 6;
};

struct PatchDiagnostics {
  int index = 0;
  bool fallback = false;
  bool borrowed = false;
  bool used_ot = false;
  int iterations = 0;
  bool converged = true;
  double residual = 0.0;
  double cell_mass = 0.0;
};

struct PropagationResult {
  PropagatedMask mask;
  PatchLayout layout;
  std::vector<PatchDiagnostics> patches;
};

PropagationResult propagate_image(const FeatureGrid& features, const BinaryMask& seed,
                                  const PropagationConfig& config, int jobs = 1);

}  // namespace coin
