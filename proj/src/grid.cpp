#include "coin/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace coin {

std::size_t count_foreground(const BinaryMask& mask) {
  return static_cast<std::size_t>(
      std::count(mask.values().begin(), mask.values().end(), std::uint8_t{1}));
}

FeatureGrid::FeatureGrid(int height, int width, int depth, float fill)
    : height_(height), width_(width), depth_(depth) {
  if (height < 0 || width < 0 || depth < 0) {
    throw ArgumentError("feature grid dimensions must be non-negative");
  }
  data_.assign(static_cast<std::size_t>(height) * width * depth, fill);
}

FeatureGrid::FeatureGrid(int height, int width, int depth, std::vector<float> data)
    : height_(height), width_(width), depth_(depth), data_(std::move(data)) {
  if (height < 0 || width < 0 || depth < 0 ||
      data_.size() != static_cast<std::size_t>(height) * width * depth) {
    throw ArgumentError("feature grid data length does not equal H*W*D");
  }
}

void FeatureGrid::check_finite() const {
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      throw NumericError("non-finite feature value at flat index " + std::to_string(i));
    }
  }
}

InstanceMap::InstanceMap(LabelGrid labels) : labels_(std::move(labels)) {
  std::uint32_t max_label = 0;
  for (auto v : labels_.values()) max_label = std::max(max_label, v);
  std::vector<bool> seen(static_cast<std::size_t>(max_label) + 1, false);
  for (auto v : labels_.values()) seen[v] = true;
  for (std::uint32_t id = 1; id <= max_label; ++id) {
    if (!seen[id]) {
      throw DataError("instance labels are not contiguous: id " + std::to_string(id) +
                      " missing below max " + std::to_string(max_label));
    }
  }
  count_ = max_label;
}

InstanceMap InstanceMap::compact(const LabelGrid& labels) {
  std::uint32_t max_label = 0;
  for (auto v : labels.values()) max_label = std::max(max_label, v);
  std::vector<std::uint32_t> remap(static_cast<std::size_t>(max_label) + 1, 0);
  for (auto v : labels.values()) remap[v] = 1;
  std::uint32_t next = 0;
  for (std::uint32_t id = 1; id <= max_label; ++id) {
    if (remap[id] != 0) remap[id] = ++next;
  }
  remap[0] = 0;
  LabelGrid out(labels.height(), labels.width(), 0u);
  auto dst = out.values();
  auto src = labels.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = remap[src[i]];
  InstanceMap map;
  map.labels_ = std::move(out);
  map.count_ = next;
  return map;
}

BinaryMask InstanceMap::mask_of(std::uint32_t id) const {
  BinaryMask m(height(), width(), 0);
  auto dst = m.values();
  auto src = labels_.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] == id ? 1 : 0;
  return m;
}

BinaryMask InstanceMap::foreground() const {
  BinaryMask m(height(), width(), 0);
  auto dst = m.values();
  auto src = labels_.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] != 0 ? 1 : 0;
  return m;
}

std::vector<std::size_t> InstanceMap::areas() const {
  std::vector<std::size_t> a(static_cast<std::size_t>(count_) + 1, 0);
  for (auto v : labels_.values()) ++a[v];
  return a;
}

void ImageRecord::validate() const {
  const int h = features.height();
  const int w = features.width();
  if (!seed.same_shape(h, w)) {
    throw DataError("image " + id + ": seed mask shape differs from features");
  }
  if (gt_instances && (gt_instances->height() != h || gt_instances->width() != w)) {
    throw DataError("image " + id + ": ground truth shape differs from features");
  }
  if (rgb && (rgb->height != h || rgb->width != w)) {
    throw DataError("image " + id + ": rgb shape differs from features");
  }
}

}  // namespace coin
