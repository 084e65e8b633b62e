#include "coin/patches.hpp"

#include <algorithm>
#include <string>

namespace coin {

PatchLayout make_layout(int height, int width, int per_axis) {
  if (per_axis < 1) {
    throw ArgumentError("per_axis must be >= 1, got " + std::to_string(per_axis));
  }
  if (height < 1 || width < 1) {
    throw ArgumentError("cannot partition an empty grid");
  }
  PatchLayout L;
  L.height = height;
  L.width = width;
  L.per_axis = per_axis;
  L.patch_height = (height + per_axis - 1) / per_axis;
  L.patch_width = (width + per_axis - 1) / per_axis;
  L.pad_bottom = L.patch_height * per_axis - height;
  L.pad_right = L.patch_width * per_axis - width;
  return L;
}

Patches<FeatureGrid> partition_patches(const FeatureGrid& grid, int per_axis) {
  Patches<FeatureGrid> out{make_layout(grid.height(), grid.width(), per_axis), {}};
  const auto& L = out.layout;
  const int d = grid.depth();
  out.tiles.reserve(static_cast<std::size_t>(L.patch_count()));
  for (int k = 0; k < L.patch_count(); ++k) {
    const Pixel o = L.origin(k);
    FeatureGrid tile(L.patch_height, L.patch_width, d);
    for (int r = 0; r < L.patch_height; ++r) {
      const int sr = std::min(o.row + r, grid.height() - 1);
      for (int c = 0; c < L.patch_width; ++c) {
        auto src = grid.at(sr, std::min(o.col + c, grid.width() - 1));
        std::copy(src.begin(), src.end(), tile.at(r, c).begin());
      }
    }
    out.tiles.push_back(std::move(tile));
  }
  return out;
}

}  // namespace coin
