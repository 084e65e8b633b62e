#include "coin/dataset.hpp"

#include <set>
#include <string>

#include <json.hpp>

#include "coin/io.hpp"

namespace coin {

std::vector<ImageRecord> load_dataset(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  if (!std::filesystem::is_regular_file(manifest_path)) {
    throw DataError("dataset manifest not found: " + manifest_path.string());
  }
  const auto bytes = read_file(manifest_path);
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(reinterpret_cast<const char*>(bytes.data()),
                              reinterpret_cast<const char*>(bytes.data() + bytes.size()));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(manifest_path.string() + ": " + e.what());
  }
  if (!m.contains("images") || !m["images"].is_array()) {
    throw FormatError(manifest_path.string() + ": missing 'images' array");
  }
  std::vector<ImageRecord> out;
  std::set<std::string> seen;
  for (const auto& e : m["images"]) {
    ImageRecord r;
    int h = 0, w = 0, d = 0;
    bool has_gt = false;
    try {
      r.id = e.at("id").get<std::string>();
      h = e.at("H").get<int>();
      w = e.at("W").get<int>();
      d = e.at("D").get<int>();
      r.split = e.value("split", std::string("train"));
      has_gt = e.value("gt", false);
    } catch (const nlohmann::json::exception& ex) {
      throw FormatError(manifest_path.string() + ": bad image entry: " + ex.what());
    }
    if (r.id.empty() || r.id.find('/') != std::string::npos || !seen.insert(r.id).second) {
      throw DataError(manifest_path.string() + ": invalid or duplicate image id '" + r.id + "'");
    }
    const auto feat = dir / (r.id + ".features.cgf");
    if (!std::filesystem::is_regular_file(feat)) throw DataError("missing features file: " + feat.string());
    r.features = load_grid(feat);
    if (r.features.height() != h || r.features.width() != w || r.features.depth() != d) {
      throw DataError(feat.string() + ": shape differs from manifest");
    }
    const auto seed = dir / (r.id + ".seed.pgm");
    if (!std::filesystem::is_regular_file(seed)) throw DataError("missing seed file: " + seed.string());
    r.seed = load_mask(seed);
    if (has_gt) {
      const auto gt = dir / (r.id + ".gt.pgm16");
      if (!std::filesystem::is_regular_file(gt)) throw DataError("missing gt file: " + gt.string());
      r.gt_instances = load_instances(gt);
    }
    r.validate();
    out.push_back(std::move(r));
  }
  return out;
}

void save_dataset(const std::vector<ImageRecord>& records, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json images = nlohmann::json::array();
  for (const auto& r : records) {
    r.validate();
    save_grid(r.features, dir / (r.id + ".features.cgf"));
    save_mask(r.seed, dir / (r.id + ".seed.pgm"));
    if (r.gt_instances) save_instances(*r.gt_instances, dir / (r.id + ".gt.pgm16"));
    images.push_back({{"id", r.id},
                      {"H", r.height()},
                      {"W", r.width()},
                      {"D", r.features.depth()},
                      {"split", r.split},
                      {"gt", r.gt_instances.has_value()}});
  }
  write_text(dir / "manifest.json", nlohmann::json{{"images", images}}.dump(1) + "\n");
}

}  // namespace coin
