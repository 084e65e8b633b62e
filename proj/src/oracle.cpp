#include "coin/oracle.hpp"

#include <json.hpp>

#include "coin/io.hpp"

namespace coin {

void write_prompts(const std::vector<Prompt>& prompts, const std::filesystem::path& path) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& p : prompts) {
    j.push_back({{"image_id", p.image_id}, {"row", p.pixel.row}, {"col", p.pixel.col}});
  }
  write_text(path, j.dump(1) + "\n");
}

std::vector<Prompt> read_prompts(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  std::vector<Prompt> out;
  try {
    const auto j = nlohmann::json::parse(reinterpret_cast<const char*>(bytes.data()),
                                         reinterpret_cast<const char*>(bytes.data() + bytes.size()));
    for (const auto& e : j) {
      out.push_back({e.at("image_id").get<std::string>(), {e.at("row").get<int>(), e.at("col").get<int>()}});
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return out;
}

std::filesystem::path proposal_path(const std::filesystem::path& dir, const Prompt& prompt) {
  return dir / (prompt.image_id + "_" + std::to_string(prompt.pixel.row) + "_" +
                std::to_string(prompt.pixel.col) + ".pgm");
}

FileBridgeOracle::FileBridgeOracle(std::filesystem::path proposal_dir,
                                   std::map<std::string, std::pair<int, int>> shapes)
    : dir_(std::move(proposal_dir)), shapes_(std::move(shapes)) {}

BinaryMask FileBridgeOracle::propose(const std::string& image_id, Pixel prompt) {
  const auto path = proposal_path(dir_, {image_id, prompt});
  if (!std::filesystem::exists(path)) throw IoError("missing proposal " + path.string());
  BinaryMask m = load_mask(path);
  if (auto it = shapes_.find(image_id); it != shapes_.end()) {
    if (!m.same_shape(it->second.first, it->second.second)) {
      throw FormatError(path.string() + ": proposal shape differs from image");
    }
  }
  return m;
}

BinaryMask CachingOracle::propose(const std::string& image_id, Pixel prompt) {
  const auto key = std::make_pair(image_id, prompt);
  {
    std::lock_guard lock(mu_);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  }
  BinaryMask m = inner_->propose(image_id, prompt);
  std::lock_guard lock(mu_);
  ++inner_calls_;
  return cache_.emplace(key, std::move(m)).first->second;
}

std::size_t CachingOracle::cache_size() const {
  std::lock_guard lock(mu_);
  return cache_.size();
}

std::size_t CachingOracle::inner_calls() const {
  std::lock_guard lock(mu_);
  return inner_calls_;
}

}  // namespace coin
