#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "coin/errors.hpp"

namespace coin {

struct Pixel {
  int row = 0;
  int col = 0;

  friend auto operator<=>(const Pixel&, const Pixel&) = default;
};

// Dense row-major 2-D grid. Value type, cheap to move, safe to share once built.
template <typename T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;
  Grid(int height, int width, T fill = T{})
      : height_(height), width_(width) {
    if (height < 0 || width < 0) {
      throw ArgumentError("grid dimensions must be non-negative");
    }
    data_.assign(static_cast<std::size_t>(height) * width, fill);
  }
  Grid(int height, int width, std::vector<T> data)
      : height_(height), width_(width), data_(std::move(data)) {
    if (height < 0 || width < 0 ||
        data_.size() != static_cast<std::size_t>(height) * width) {
      throw ArgumentError("grid data length does not match dimensions");
    }
  }

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  bool in_bounds(int r, int c) const noexcept {
    return r >= 0 && c >= 0 && r < height_ && c < width_;
  }
  bool in_bounds(Pixel p) const noexcept { return in_bounds(p.row, p.col); }
  std::size_t index(int r, int c) const noexcept {
    return static_cast<std::size_t>(r) * width_ + c;
  }

  T& operator()(int r, int c) noexcept { return data_[index(r, c)]; }
  const T& operator()(int r, int c) const noexcept { return data_[index(r, c)]; }
  T& operator[](Pixel p) noexcept { return data_[index(p.row, p.col)]; }
  const T& operator[](Pixel p) const noexcept { return data_[index(p.row, p.col)]; }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  const std::vector<T>& vector() const noexcept { return data_; }

  bool same_shape(int h, int w) const noexcept { return height_ == h && width_ == w; }
  template <typename U>
  bool same_shape(const Grid<U>& other) const noexcept {
    return height_ == other.height() && width_ == other.width();
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<T> data_;
};

// Per-pixel {0,1}. Pseudo-label targets reuse the same storage with kIgnore.
using BinaryMask = Grid<std::uint8_t>;
using LabelGrid = Grid<std::uint32_t>;
using DistanceMap = Grid<float>;

inline constexpr std::uint8_t kIgnore = 255;

std::size_t count_foreground(const BinaryMask& mask);

// H x W x D float32 embeddings, channel-innermost.
class FeatureGrid {
 public:
  FeatureGrid() = default;
  FeatureGrid(int height, int width, int depth, float fill = 0.0f);
  FeatureGrid(int height, int width, int depth, std::vector<float> data);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int depth() const noexcept { return depth_; }
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(height_) * width_;
  }

  std::span<const float> at(int r, int c) const noexcept {
    return {data_.data() + offset(r, c), static_cast<std::size_t>(depth_)};
  }
  std::span<float> at(int r, int c) noexcept {
    return {data_.data() + offset(r, c), static_cast<std::size_t>(depth_)};
  }
  std::span<const float> pixel(std::size_t i) const noexcept {
    return {data_.data() + i * depth_, static_cast<std::size_t>(depth_)};
  }

  std::span<const float> values() const noexcept { return data_; }
  std::span<float> values() noexcept { return data_; }

  // Throws NumericError on the first NaN/Inf.
  void check_finite() const;

  friend bool operator==(const FeatureGrid&, const FeatureGrid&) = default;

 private:
  std::size_t offset(int r, int c) const noexcept {
    return (static_cast<std::size_t>(r) * width_ + c) * depth_;
  }

  int height_ = 0;
  int width_ = 0;
  int depth_ = 0;
  std::vector<float> data_;
};

// Label grid with 0 = background and instances 1..N, every id present.
class InstanceMap {
 public:
  InstanceMap() = default;
  InstanceMap(int height, int width) : labels_(height, width, 0u) {}

  // Validates the contiguity invariant; throws DataError when violated.
  explicit InstanceMap(LabelGrid labels);

  // Renumbers arbitrary non-negative labels to 1..N by ascending old id.
  static InstanceMap compact(const LabelGrid& labels);

  int height() const noexcept { return labels_.height(); }
  int width() const noexcept { return labels_.width(); }
  std::uint32_t count() const noexcept { return count_; }
  const LabelGrid& labels() const noexcept { return labels_; }
  std::uint32_t operator()(int r, int c) const noexcept { return labels_(r, c); }
  std::uint32_t operator[](Pixel p) const noexcept { return labels_[p]; }

  BinaryMask mask_of(std::uint32_t id) const;
  BinaryMask foreground() const;
  // areas[id] for id in 0..N.
  std::vector<std::size_t> areas() const;

  friend bool operator==(const InstanceMap&, const InstanceMap&) = default;

 private:
  LabelGrid labels_;
  std::uint32_t count_ = 0;
};

struct RgbImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;  // H*W*3, row-major
};

struct ImageRecord {
  std::string id;
  std::string split = "train";
  std::optional<RgbImage> rgb;
  FeatureGrid features;
  BinaryMask seed;
  std::optional<InstanceMap> gt_instances;

  int height() const noexcept { return features.height(); }
  int width() const noexcept { return features.width(); }
  // Throws DataError if grids disagree on H x W.
  void validate() const;
};

}  // namespace coin
