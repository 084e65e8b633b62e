#pragma once

#include <filesystem>
#include <vector>

#include "coin/grid.hpp"

namespace coin {

// Directory layout: manifest.json plus, per image, <id>.features.cgf,
// <id>.seed.pgm and optionally <id>.gt.pgm16.
// manifest.json: {"images": [{"id", "H", "W", "D", "split", "gt"}]}
std::vector<ImageRecord> load_dataset(const std::filesystem::path& dir);
void save_dataset(const std::vector<ImageRecord>& records, const std::filesystem::path& dir);

}  // namespace coin
