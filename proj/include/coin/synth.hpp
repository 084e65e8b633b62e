#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "coin/grid.hpp"
#include "coin/oracle.hpp"

namespace coin {

// Synthetic histology. Each pixel's feature is a blend of four orthonormal
// class vectors plus Gaussian noise:
//   cell     c  inside cells, blurred across the boundary (partial volume)
//   tissue   t  background, tilted toward c by a smooth affinity field
//   membrane m  added on cell boundary pixels
//   texture  x  marks cell-like tissue blobs (b c + (1-b) t + blob_texture x, with
//               b drawn per blob from blob_mix +- blob_mix_spread)
struct SynthConfig {
  std::uint64_t seed = 7;
  int images = 12;
  int test_images = 4;
  int size = 128;
  int cells = 30;
  double radius_min = 4.0;
  double radius_max = 7.0;
  double overlap_prob = 0.3;
  int depth = 16;
  double noise = 0.1;
  double erode = 0.3;   // seed keeps cell pixels deeper than erode * max depth
  double drop = 0.3;    // fraction of cells missing from the seed
  double blur = 0.7;    // boundary blend width, pixels
  double affinity = 0.3;
  double affinity_scale = 6.0;  // smoothing sigma of the affinity field
  int blobs_large = 1;
  int blobs_small = 8;
  double blob_large_min = 14.0;
  double blob_large_max = 22.0;
  double blob_small_min = 3.0;
  double blob_small_max = 6.0;
  double blob_mix = 0.6;
  double blob_mix_spread = 0.0;
  double blob_texture = 0.3;
  double membrane = 0.3;
  double gain = 1.0;  // overall feature scale; cosine similarities ignore it

  void validate() const;
};


// Deterministic in the config. Ids are img000, img001, ...; the last
// test_images records have split "test".
std::vector<ImageRecord> gen_dataset(const SynthConfig& config);
ImageRecord gen_image(const SynthConfig& config, int index);

struct OracleConfig {
  double jitter = 0.05;           // flip rate on the boundary band of a hit
  double failure_fraction = 0.5;  // background blob covers at least this share of the image
  double failure_rate = 0.0;      // chance that an on-cell prompt also fails
  std::uint64_t seed = 11;
};

// Cell prompt: the cell's mask with its inner and outer boundary band flipped
// i.i.d. at the jitter rate. Background prompt (or a simulated failure): a
// disc around the prompt covering at least failure_fraction of the image.
class SyntheticOracle : public MaskProposalOracle {
 public:
  SyntheticOracle(std::map<std::string, InstanceMap> gt, OracleConfig config);
  static std::shared_ptr<SyntheticOracle> from_records(const std::vector<ImageRecord>& records,
                                                       OracleConfig config);
  BinaryMask propose(const std::string& image_id, Pixel prompt) override;
  const OracleConfig& config() const noexcept { return config_; }

 private:
  std::map<std::string, InstanceMap> gt_;
  OracleConfig config_;
};

BinaryMask failure_disc(int height, int width, Pixel center, double fraction);

// splitmix64 finalizer; used to derive per-item seeds.
std::uint64_t mix64(std::uint64_t x);
std::uint64_t hash_string(const std::string& s, std::uint64_t seed);

}  // namespace coin
