#include "coin/morphology.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <queue>
#include <string>
#include <tuple>

namespace coin {
namespace {

constexpr int kDr4[] = {-1, 0, 0, 1};
constexpr int kDc4[] = {0, -1, 1, 0};
constexpr int kDr8[] = {-1, -1, -1, 0, 0, 1, 1, 1};
constexpr int kDc8[] = {-1, 0, 1, -1, 1, -1, 0, 1};

void check_connectivity(int connectivity) {
  if (connectivity != 4 && connectivity != 8) {
    throw ArgumentError("connectivity must be 4 or 8, got " + std::to_string(connectivity));
  }
}

template <typename Fn>
void for_neighbors(int r, int c, int h, int w, int connectivity, Fn&& fn) {
  const int n = connectivity == 8 ? 8 : 4;
  const int* dr = connectivity == 8 ? kDr8 : kDr4;
  const int* dc = connectivity == 8 ? kDc8 : kDc4;
  for (int k = 0; k < n; ++k) {
    const int rr = r + dr[k], cc = c + dc[k];
    if (rr >= 0 && cc >= 0 && rr < h && cc < w) fn(rr, cc);
  }
}

// 1-D lower envelope of parabolas (Felzenszwalb-Huttenlocher) on integer
// squared distances. kInf marks "no site".
constexpr std::int64_t kInf = std::numeric_limits<std::int64_t>::max() / 4;

void edt_1d(const std::vector<std::int64_t>& f, std::vector<std::int64_t>& d,
            std::vector<int>& v, std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] >= kInf) continue;
    const double fq = static_cast<double>(f[q]) + static_cast<double>(q) * q;
    while (k >= 0) {
      const int p = v[k];
      const double s = (fq - (static_cast<double>(f[p]) + static_cast<double>(p) * p)) /
                       (2.0 * q - 2.0 * p);
      if (s <= z[k]) {
        --k;
      } else {
        break;
      }
    }
    ++k;
    v[k] = q;
    z[k] = k == 0 ? -std::numeric_limits<double>::infinity()
                  : (fq - (static_cast<double>(f[v[k - 1]]) +
                           static_cast<double>(v[k - 1]) * v[k - 1])) /
                        (2.0 * q - 2.0 * v[k - 1]);
    z[k + 1] = std::numeric_limits<double>::infinity();
  }
  if (k < 0) {
    std::fill(d.begin(), d.end(), kInf);
    return;
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[j + 1] < q) ++j;
    const std::int64_t dq = q - v[j];
    d[q] = dq * dq + f[v[j]];
  }
}

}  // namespace

InstanceMap connected_components(const BinaryMask& mask, int connectivity) {
  check_connectivity(connectivity);
  const int h = mask.height(), w = mask.width();
  LabelGrid labels(h, w, 0u);
  std::uint32_t next = 0;
  std::vector<Pixel> stack;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (mask(r, c) == 0 || labels(r, c) != 0) continue;
      labels(r, c) = ++next;
      stack.push_back({r, c});
      while (!stack.empty()) {
        const Pixel p = stack.back();
        stack.pop_back();
        for_neighbors(p.row, p.col, h, w, connectivity, [&](int rr, int cc) {
          if (mask(rr, cc) != 0 && labels(rr, cc) == 0) {
            labels(rr, cc) = next;
            stack.push_back({rr, cc});
          }
        });
      }
    }
  }
  return InstanceMap(std::move(labels));
}

DistanceMap distance_transform(const BinaryMask& mask, bool outside_is_background) {
  // One ring of padding carries the out-of-image convention.
  const int h = mask.height() + 2, w = mask.width() + 2;
  std::vector<std::int64_t> g(static_cast<std::size_t>(h) * w, outside_is_background ? 0 : kInf);
  for (int r = 0; r < mask.height(); ++r) {
    for (int c = 0; c < mask.width(); ++c) {
      g[static_cast<std::size_t>(r + 1) * w + c + 1] = mask(r, c) != 0 ? kInf : 0;
    }
  }
  const int n = std::max(h, w);
  std::vector<std::int64_t> f(n), d(n);
  std::vector<int> v(n);
  std::vector<double> z(n + 1);
  for (int c = 0; c < w; ++c) {
    f.resize(h);
    d.resize(h);
    for (int r = 0; r < h; ++r) f[r] = g[static_cast<std::size_t>(r) * w + c];
    edt_1d(f, d, v, z);
    for (int r = 0; r < h; ++r) g[static_cast<std::size_t>(r) * w + c] = d[r];
  }
  f.resize(w);
  d.resize(w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) f[c] = g[static_cast<std::size_t>(r) * w + c];
    edt_1d(f, d, v, z);
    for (int c = 0; c < w; ++c) g[static_cast<std::size_t>(r) * w + c] = d[c];
  }
  DistanceMap out(mask.height(), mask.width(), 0.0f);
  for (int r = 0; r < mask.height(); ++r) {
    for (int c = 0; c < mask.width(); ++c) {
      const std::int64_t d2 = g[static_cast<std::size_t>(r + 1) * w + c + 1];
      out(r, c) = d2 >= kInf ? std::numeric_limits<float>::infinity()
                             : static_cast<float>(std::sqrt(static_cast<double>(d2)));
    }
  }
  return out;
}

MarkerSet local_maxima_markers(const DistanceMap& dist, int min_distance) {
  if (min_distance < 1) throw ArgumentError("min_distance must be >= 1");
  const int h = dist.height(), w = dist.width();
  const int m = min_distance;
  BinaryMask is_max(h, w, 0);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const float v = dist(r, c);
      if (v <= 0.0f) continue;
      bool ok = true;
      for (int rr = std::max(0, r - m); ok && rr <= std::min(h - 1, r + m); ++rr) {
        for (int cc = std::max(0, c - m); cc <= std::min(w - 1, c + m); ++cc) {
          if (dist(rr, cc) > v) {
            ok = false;
            break;
          }
        }
      }
      is_max(r, c) = ok ? 1 : 0;
    }
  }
  // One representative per plateau: the first pixel reached in scan order.
  struct Candidate {
    float value;
    Pixel pixel;
  };
  std::vector<Candidate> cand;
  BinaryMask seen(h, w, 0);
  std::vector<Pixel> stack;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (is_max(r, c) == 0 || seen(r, c) != 0) continue;
      const float v = dist(r, c);
      cand.push_back({v, {r, c}});
      seen(r, c) = 1;
      stack.push_back({r, c});
      while (!stack.empty()) {
        const Pixel p = stack.back();
        stack.pop_back();
        for_neighbors(p.row, p.col, h, w, 8, [&](int rr, int cc) {
          if (is_max(rr, cc) != 0 && seen(rr, cc) == 0 && dist(rr, cc) == v) {
            seen(rr, cc) = 1;
            stack.push_back({rr, cc});
          }
        });
      }
    }
  }
  std::stable_sort(cand.begin(), cand.end(),
                   [](const Candidate& a, const Candidate& b) { return a.value > b.value; });
  std::vector<Pixel> kept;
  const double md2 = static_cast<double>(m) * m;
  for (const auto& cnd : cand) {
    bool close = false;
    for (const Pixel& k : kept) {
      const double dr = cnd.pixel.row - k.row, dc = cnd.pixel.col - k.col;
      if (dr * dr + dc * dc < md2) {
        close = true;
        break;
      }
    }
    if (!close) kept.push_back(cnd.pixel);
  }
  std::sort(kept.begin(), kept.end());
  MarkerSet out;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    out.push_back({kept[i], static_cast<std::uint32_t>(i + 1)});
  }
  return out;
}

InstanceMap watershed_split(const BinaryMask& mask, const MarkerSet& markers, int connectivity) {
  check_connectivity(connectivity);
  const int h = mask.height(), w = mask.width();
  if (markers.empty()) return connected_components(mask, connectivity);
  const DistanceMap dist = distance_transform(mask);
  LabelGrid labels(h, w, 0u);
  // (inverted distance, insertion order) gives a deterministic flood order.
  using Item = std::tuple<float, std::uint64_t, int, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  std::uint64_t order = 0;
  std::uint32_t max_id = 0;
  for (const Marker& mk : markers) {
    if (!mask.in_bounds(mk.pixel) || mask[mk.pixel] == 0) {
      throw ArgumentError("watershed marker " + std::to_string(mk.id) + " lies off the foreground");
    }
    if (mk.id == 0) throw ArgumentError("watershed marker ids must be positive");
    if (labels[mk.pixel] != 0) continue;
    labels[mk.pixel] = mk.id;
    max_id = std::max(max_id, mk.id);
    heap.emplace(-dist[mk.pixel], order++, mk.pixel.row, mk.pixel.col);
  }
  while (!heap.empty()) {
    const auto [pri, ord, r, c] = heap.top();
    heap.pop();
    const std::uint32_t id = labels(r, c);
    for_neighbors(r, c, h, w, connectivity, [&](int rr, int cc) {
      if (mask(rr, cc) != 0 && labels(rr, cc) == 0) {
        labels(rr, cc) = id;
        heap.emplace(-dist(rr, cc), order++, rr, cc);
      }
    });
  }
  // Unreached components (no marker inside) become their own instances.
  BinaryMask rest(h, w, 0);
  bool any_rest = false;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (mask(r, c) != 0 && labels(r, c) == 0) {
        rest(r, c) = 1;
        any_rest = true;
      }
    }
  }
  if (any_rest) {
    const InstanceMap extra = connected_components(rest, connectivity);
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        if (extra(r, c) != 0) labels(r, c) = max_id + extra(r, c);
      }
    }
  }
  return InstanceMap::compact(labels);
}

InstanceMap split_instances(const BinaryMask& mask, const MorphConfig& config) {
  const DistanceMap dist = distance_transform(mask);
  return watershed_split(mask, local_maxima_markers(dist, config.min_distance),
                         config.connectivity);
}

BinaryMask boundary_edges(const BinaryMask& mask) {
  const int h = mask.height(), w = mask.width();
  BinaryMask out(h, w, 0);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (mask(r, c) == 0) continue;
      bool edge = false;
      for (int k = 0; k < 4 && !edge; ++k) {
        const int rr = r + kDr4[k], cc = c + kDc4[k];
        edge = !mask.in_bounds(rr, cc) || mask(rr, cc) == 0;
      }
      out(r, c) = edge ? 1 : 0;
    }
  }
  return out;
}

BinaryMask instance_edges(const InstanceMap& instances) {
  const int h = instances.height(), w = instances.width();
  BinaryMask out(h, w, 0);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const std::uint32_t id = instances(r, c);
      if (id == 0) continue;
      bool edge = false;
      for (int k = 0; k < 4 && !edge; ++k) {
        const int rr = r + kDr4[k], cc = c + kDc4[k];
        edge = rr < 0 || cc < 0 || rr >= h || cc >= w || instances(rr, cc) != id;
      }
      out(r, c) = edge ? 1 : 0;
    }
  }
  return out;
}

Pixel center_point(const BinaryMask& instance) {
  int r0 = instance.height(), r1 = -1, c0 = instance.width(), c1 = -1;
  for (int r = 0; r < instance.height(); ++r) {
    for (int c = 0; c < instance.width(); ++c) {
      if (instance(r, c) == 0) continue;
      r0 = std::min(r0, r);
      r1 = std::max(r1, r);
      c0 = std::min(c0, c);
      c1 = std::max(c1, c);
    }
  }
  if (r1 < 0) throw ArgumentError("center_point of an empty instance");
  // Everything outside the tight box is background already, so the cropped
  // transform equals the full one.
  BinaryMask crop(r1 - r0 + 1, c1 - c0 + 1, 0);
  for (int r = r0; r <= r1; ++r) {
    for (int c = c0; c <= c1; ++c) crop(r - r0, c - c0) = instance(r, c);
  }
  const DistanceMap d = distance_transform(crop);
  Pixel best{r0, c0};
  float best_v = -1.0f;
  for (int r = 0; r < crop.height(); ++r) {
    for (int c = 0; c < crop.width(); ++c) {
      if (crop(r, c) != 0 && d(r, c) > best_v) {
        best_v = d(r, c);
        best = {r + r0, c + c0};
      }
    }
  }
  return best;
}

BinaryMask dilate(const BinaryMask& mask, int radius) {
  if (radius < 0) throw ArgumentError("dilation radius must be >= 0");
  if (radius == 0) return mask;
  std::vector<std::pair<int, int>> offsets;
  for (int dr = -radius; dr <= radius; ++dr) {
    for (int dc = -radius; dc <= radius; ++dc) {
      if (dr * dr + dc * dc <= radius * radius) offsets.emplace_back(dr, dc);
    }
  }
  const int h = mask.height(), w = mask.width();
  BinaryMask out(h, w, 0);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (mask(r, c) == 0) continue;
      for (auto [dr, dc] : offsets) {
        const int rr = r + dr, cc = c + dc;
        if (rr >= 0 && cc >= 0 && rr < h && cc < w) out(rr, cc) = 1;
      }
    }
  }
  return out;
}

}  // namespace coin
