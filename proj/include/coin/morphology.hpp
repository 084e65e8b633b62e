#pragma once

#include <cstdint>
#include <vector>

#include "coin/grid.hpp"

namespace coin {

struct Marker {
  Pixel pixel;
  std::uint32_t id = 0;
};
using MarkerSet = std::vector<Marker>;

struct MorphConfig {
  int connectivity = 4;
  int min_distance = 3;
  int edge_dilate = 1;  // separator thickening in predict_instances
};

// Maximal connected foreground regions, labeled 1..N in scan order of their
// first pixel.
InstanceMap connected_components(const BinaryMask& mask, int connectivity = 4);

// Exact Euclidean distance to the nearest background pixel. Pixels outside
// the image count as background unless outside_is_background is false; a mask
// with no background at all then yields +inf everywhere.
DistanceMap distance_transform(const BinaryMask& mask, bool outside_is_background = true);

// Window maxima of size (2 min_distance + 1)^2 over foreground pixels. A
// plateau (8-connected equal-valued maxima) yields its lowest scan-order pixel;
// markers closer than min_distance to a higher (or earlier, on ties) marker are
// dropped. Ids 1..M follow scan order.
MarkerSet local_maxima_markers(const DistanceMap& dist, int min_distance);

// Priority flood on the inverted distance map from the markers. Connected
// parts of the mask without a marker become their own instances; with no
// markers at all this is connected_components.
InstanceMap watershed_split(const BinaryMask& mask, const MarkerSet& markers,
                            int connectivity = 4);

// Markers from the mask's own distance map, then watershed.
InstanceMap split_instances(const BinaryMask& mask, const MorphConfig& config);

// Foreground pixels with at least one background 4-neighbor (image border
// counts as background).
BinaryMask boundary_edges(const BinaryMask& mask);

// Union of boundary_edges over each instance taken alone, so interfaces
// between touching instances are marked on both sides.
BinaryMask instance_edges(const InstanceMap& instances);

// Interior point with maximal distance to the background; ties go to the
// lowest scan order.
Pixel center_point(const BinaryMask& instance);

// Adds every pixel within Euclidean distance <= radius of the foreground.
BinaryMask dilate(const BinaryMask& mask, int radius);

}  // namespace coin
