#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "coin/grid.hpp"

namespace coin {

// Point-prompted mask proposals. Implementations must be deterministic for a
// fixed (image, prompt) and tolerate concurrent calls.
class MaskProposalOracle {
 public:
  virtual ~MaskProposalOracle() = default;
  virtual BinaryMask propose(const std::string& image_id, Pixel prompt) = 0;
};

struct Prompt {
  std::string image_id;
  Pixel pixel;
};

// prompts.json: [{"image_id": ..., "row": ..., "col": ...}, ...]
void write_prompts(const std::vector<Prompt>& prompts, const std::filesystem::path& path);
std::vector<Prompt> read_prompts(const std::filesystem::path& path);
std::filesystem::path proposal_path(const std::filesystem::path& dir, const Prompt& prompt);

// Reads proposals/<image_id>_<row>_<col>.pgm written by an external model.
// A missing or unreadable file raises IoError/FormatError; scoring turns that
// into a zero confidence.
class FileBridgeOracle : public MaskProposalOracle {
 public:
  FileBridgeOracle(std::filesystem::path proposal_dir, std::map<std::string, std::pair<int, int>> shapes);
  BinaryMask propose(const std::string& image_id, Pixel prompt) override;

 private:
  std::filesystem::path dir_;
  std::map<std::string, std::pair<int, int>> shapes_;
};

// Memoizes another oracle by (image, prompt) so later rounds reuse proposals.
class CachingOracle : public MaskProposalOracle {
 public:
  explicit CachingOracle(std::shared_ptr<MaskProposalOracle> inner) : inner_(std::move(inner)) {}
  BinaryMask propose(const std::string& image_id, Pixel prompt) override;
  std::size_t cache_size() const;
  std::size_t inner_calls() const;

 private:
  std::shared_ptr<MaskProposalOracle> inner_;
  mutable std::mutex mu_;
  std::map<std::pair<std::string, Pixel>, BinaryMask> cache_;
  std::size_t inner_calls_ = 0;
};

}  // namespace coin
