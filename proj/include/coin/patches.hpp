#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "coin/grid.hpp"

namespace coin {

// How an image was cut into per_axis x per_axis tiles. Inputs whose sides are
// not divisible by per_axis are padded on the bottom/right by edge replication.
struct PatchLayout {
  int height = 0;  // original extent
  int width = 0;
  int per_axis = 1;
  int patch_height = 0;
  int patch_width = 0;
  int pad_bottom = 0;
  int pad_right = 0;

  int patch_count() const noexcept { return per_axis * per_axis; }
  int padded_height() const noexcept { return height + pad_bottom; }
  int padded_width() const noexcept { return width + pad_right; }
  // Top-left corner of patch k (row-major order) in padded coordinates.
  Pixel origin(int k) const noexcept {
    return {(k / per_axis) * patch_height, (k % per_axis) * patch_width};
  }
};

PatchLayout make_layout(int height, int width, int per_axis);

template <typename T>
struct Patches {
  PatchLayout layout;
  std::vector<T> tiles;
};

Patches<FeatureGrid> partition_patches(const FeatureGrid& grid, int per_axis);

template <typename T>
Patches<Grid<T>> partition_patches(const Grid<T>& grid, int per_axis) {
  Patches<Grid<T>> out{make_layout(grid.height(), grid.width(), per_axis), {}};
  const auto& L = out.layout;
  for (int k = 0; k < L.patch_count(); ++k) {
    const Pixel o = L.origin(k);
    Grid<T> tile(L.patch_height, L.patch_width);
    for (int r = 0; r < L.patch_height; ++r) {
      const int sr = std::min(o.row + r, grid.height() - 1);
      for (int c = 0; c < L.patch_width; ++c) {
        tile(r, c) = grid(sr, std::min(o.col + c, grid.width() - 1));
      }
    }
    out.tiles.push_back(std::move(tile));
  }
  return out;
}

// Inverse of partition_patches on the original extent; padding is dropped.
template <typename T>
Grid<T> stitch_patches(const PatchLayout& layout, const std::vector<Grid<T>>& tiles) {
  if (static_cast<int>(tiles.size()) != layout.patch_count()) {
    throw ArgumentError("stitch_patches: expected " + std::to_string(layout.patch_count()) +
                        " tiles, got " + std::to_string(tiles.size()));
  }
  Grid<T> out(layout.height, layout.width);
  for (int k = 0; k < layout.patch_count(); ++k) {
    const auto& tile = tiles[static_cast<std::size_t>(k)];
    if (!tile.same_shape(layout.patch_height, layout.patch_width)) {
      throw ArgumentError("stitch_patches: tile shape mismatch");
    }
    const Pixel o = layout.origin(k);
    for (int r = 0; r < layout.patch_height && o.row + r < layout.height; ++r) {
      for (int c = 0; c < layout.patch_width && o.col + c < layout.width; ++c) {
        out(o.row + r, o.col + c) = tile(r, c);
      }
    }
  }
  return out;
}

}  // namespace coin
