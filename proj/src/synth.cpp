#include "coin/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <sstream>

#include "coin/morphology.hpp"

namespace coin {
namespace {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

struct Basis {
  std::vector<double> cell, tissue, membrane, texture;
};

Basis make_basis(int depth, std::uint64_t seed) {
  if (depth < 4) throw ArgumentError("synth depth must be >= 4");
  Rng rng(mix64(seed ^ 0xB45150ULL));
  std::normal_distribution<double> nd;
  std::vector<std::vector<double>> q;
  while (q.size() < 4) {
    std::vector<double> v(static_cast<std::size_t>(depth));
    for (auto& x : v) x = nd(rng);
    for (const auto& u : q) {
      double d = 0.0;
      for (int k = 0; k < depth; ++k) d += v[k] * u[k];
      for (int k = 0; k < depth; ++k) v[k] -= d * u[k];
    }
    double n = 0.0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    if (n < 1e-6) continue;
    for (auto& x : v) x /= n;
    q.push_back(std::move(v));
  }
  return {q[0], q[1], q[2], q[3]};
}

BinaryMask ellipse(int h, int w, double y0, double x0, double a, double b, double th) {
  BinaryMask m(h, w, 0);
  const double ct = std::cos(th), st = std::sin(th);
  const double reach = std::max(a, b) + 1.0;
  const int r0 = std::max(0, static_cast<int>(std::floor(y0 - reach)));
  const int r1 = std::min(h - 1, static_cast<int>(std::ceil(y0 + reach)));
  const int c0 = std::max(0, static_cast<int>(std::floor(x0 - reach)));
  const int c1 = std::min(w - 1, static_cast<int>(std::ceil(x0 + reach)));
  for (int r = r0; r <= r1; ++r) {
    for (int c = c0; c <= c1; ++c) {
      const double dy = r - y0, dx = c - x0;
      const double u = (dx * ct + dy * st) / a;
      const double v = (-dx * st + dy * ct) / b;
      if (u * u + v * v <= 1.0) m(r, c) = 1;
    }
  }
  return m;
}

BinaryMask dilate_cross(const BinaryMask& m, int iterations) {
  BinaryMask cur = m;
  for (int it = 0; it < iterations; ++it) cur = dilate(cur, 1);
  return cur;
}

struct Placed {
  double y, x, radius;
};

std::string config_echo(const SynthConfig& c) {
  std::ostringstream os;
  os << "size=" << c.size << " cells=" << c.cells << " radius=[" << c.radius_min << ","
     << c.radius_max << "] overlap_prob=" << c.overlap_prob << " seed=" << c.seed;
  return os.str();
}

LabelGrid place_cells(const SynthConfig& cfg, Rng& rng) {
  const int H = cfg.size;
  LabelGrid lab(H, H, 0u);
  BinaryMask fg(H, H, 0);
  std::vector<Placed> cells;
  for (int k = 0; k < cfg.cells; ++k) {
    bool placed = false;
    for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
      const double a = uniform(rng, cfg.radius_min, cfg.radius_max);
      const double b = uniform(rng, cfg.radius_min, cfg.radius_max);
      const double th = uniform(rng, 0.0, std::numbers::pi);
      double y0, x0;
      bool adj = false;
      if (!cells.empty() && uniform(rng, 0.0, 1.0) < cfg.overlap_prob) {
        const Placed& host = cells[std::uniform_int_distribution<std::size_t>(0, cells.size() - 1)(rng)];
        const double ang = uniform(rng, 0.0, 2.0 * std::numbers::pi);
        const double dist = host.radius + (a + b) / 2.0 - 1.0;
        y0 = host.y + dist * std::sin(ang);
        x0 = host.x + dist * std::cos(ang);
        adj = true;
      } else {
        y0 = uniform(rng, cfg.radius_max, H - cfg.radius_max);
        x0 = uniform(rng, cfg.radius_max, H - cfg.radius_max);
      }
      BinaryMask m = ellipse(H, H, y0, x0, a, b, th);
      std::size_t area = count_foreground(m);
      if (area < 5) continue;
      if (adj) {
        std::size_t overlap = 0;
        bool touches = false;
        const BinaryMask near = dilate_cross(fg, 1);
        for (std::size_t i = 0; i < m.size(); ++i) {
          if (m.values()[i] == 0) continue;
          overlap += fg.values()[i];
          touches = touches || near.values()[i] != 0;
        }
        if (overlap * 10 > area * 3 || !touches) continue;
        for (std::size_t i = 0; i < m.size(); ++i) {
          if (fg.values()[i] != 0) m.values()[i] = 0;
        }
        // Keep the largest 4-connected piece so every cell stays connected.
        const InstanceMap parts = connected_components(m, 4);
        if (parts.count() == 0) continue;
        const auto areas = parts.areas();
        const auto best = static_cast<std::uint32_t>(
            std::max_element(areas.begin() + 1, areas.end()) - areas.begin());
        m = parts.mask_of(best);
        area = areas[best];
        if (area < 5) continue;
      } else {
        const BinaryMask near = dilate_cross(fg, 2);
        bool clash = false;
        for (std::size_t i = 0; i < m.size() && !clash; ++i) {
          clash = m.values()[i] != 0 && near.values()[i] != 0;
        }
        if (clash) continue;
      }
      for (std::size_t i = 0; i < m.size(); ++i) {
        if (m.values()[i] != 0) {
          lab.values()[i] = static_cast<std::uint32_t>(cells.size() + 1);
          fg.values()[i] = 1;
        }
      }
      cells.push_back({y0, x0, (a + b) / 2.0});
      placed = true;
    }
    if (!placed) {
      throw DataError("could not place cell " + std::to_string(k + 1) + " after 1000 attempts (" +
                      config_echo(cfg) + ")");
    }
  }
  return lab;
}

Grid<double> smooth_field(int H, double sigma, Rng& rng) {
  std::normal_distribution<double> nd;
  Grid<double> f(H, H, 0.0);
  for (auto& v : f.values()) v = nd(rng);
  const int rad = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(static_cast<std::size_t>(2 * rad + 1));
  double ks = 0.0;
  for (int i = -rad; i <= rad; ++i) {
    k[static_cast<std::size_t>(i + rad)] = std::exp(-0.5 * i * i / (sigma * sigma));
    ks += k[static_cast<std::size_t>(i + rad)];
  }
  for (auto& v : k) v /= ks;
  auto reflect = [H](int i) {
    while (i < 0 || i >= H) i = i < 0 ? -i - 1 : 2 * H - i - 1;
    return i;
  };
  Grid<double> tmp(H, H, 0.0);
  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < H; ++c) {
      double s = 0.0;
      for (int i = -rad; i <= rad; ++i) s += k[static_cast<std::size_t>(i + rad)] * f(r, reflect(c + i));
      tmp(r, c) = s;
    }
  }
  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < H; ++c) {
      double s = 0.0;
      for (int i = -rad; i <= rad; ++i) s += k[static_cast<std::size_t>(i + rad)] * tmp(reflect(r + i), c);
      f(r, c) = s;
    }
  }
  auto [lo, hi] = std::minmax_element(f.values().begin(), f.values().end());
  const double l = *lo, span = std::max(*hi - *lo, 1e-12);
  for (auto& v : f.values()) v = (v - l) / span;
  return f;
}

}  // namespace

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_string(const std::string& s, std::uint64_t seed) {
  std::uint64_t h = mix64(seed);
  for (unsigned char ch : s) h = mix64(h ^ ch);
  return h;
}

void SynthConfig::validate() const {
  auto prob = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string("synth.") + name + " must lie in [0,1]");
  };
  if (images < 1) throw ConfigError("synth.images must be >= 1");
  if (test_images < 0 || test_images >= images) throw ConfigError("synth.test_images must be in [0, images)");
  if (size < 8) throw ConfigError("synth.size must be >= 8");
  if (cells < 0) throw ConfigError("synth.cells must be >= 0");
  if (!(radius_min > 0.0 && radius_max >= radius_min)) throw ConfigError("synth radius range is invalid");
  if (depth < 4) throw ConfigError("synth.depth must be >= 4");
  if (!(noise >= 0.0)) throw ConfigError("synth.noise must be >= 0");
  if (!(blur > 0.0)) throw ConfigError("synth.blur must be > 0");
  if (blobs_large < 0 || blobs_small < 0) throw ConfigError("synth blob counts must be >= 0");
  prob(overlap_prob, "overlap_prob");
  prob(erode, "erode");
  prob(drop, "drop");
  prob(affinity, "affinity");
  prob(blob_mix, "blob_mix");
  if (!(blob_mix_spread >= 0.0)) throw ConfigError("synth.blob_mix_spread must be >= 0");
  if (!(gain > 0.0)) throw ConfigError("synth.gain must be > 0");
}

ImageRecord gen_image(const SynthConfig& cfg, int index) {
  cfg.validate();
  const int H = cfg.size;
  const int D = cfg.depth;
  const Basis basis = make_basis(D, cfg.seed);
  Rng rng(mix64(cfg.seed * 0x100000001B3ULL + static_cast<std::uint64_t>(index)));

  LabelGrid lab = place_cells(cfg, rng);
  InstanceMap gt(std::move(lab));
  const BinaryMask fg = gt.foreground();
  BinaryMask bg(H, H, 0);
  for (std::size_t i = 0; i < fg.size(); ++i) bg.values()[i] = fg.values()[i] ? 0 : 1;
  const DistanceMap din = distance_transform(fg);
  const DistanceMap dout = distance_transform(bg, false);

  const Grid<double> field = smooth_field(H, cfg.affinity_scale, rng);

  BinaryMask blob(H, H, 0);
  Grid<double> mix(H, H, 0.0);
  Rng mix_rng(mix64(cfg.seed * 0x100000001B3ULL + static_cast<std::uint64_t>(index)) ^ 0x6D1C5EEDULL);
  for (int k = 0; k < cfg.blobs_large + cfg.blobs_small; ++k) {
    const bool large = k < cfg.blobs_large;
    const double R = large ? uniform(rng, cfg.blob_large_min, cfg.blob_large_max)
                           : uniform(rng, cfg.blob_small_min, cfg.blob_small_max);
    const double y0 = uniform(rng, 0.0, H), x0 = uniform(rng, 0.0, H);
    const double asp = uniform(rng, 0.6, 1.0), th = uniform(rng, 0.0, std::numbers::pi);
    double m = cfg.blob_mix;
    if (cfg.blob_mix_spread > 0.0) {
      m = std::clamp(m + uniform(mix_rng, -cfg.blob_mix_spread, cfg.blob_mix_spread), 0.0, 1.0);
    }
    const BinaryMask e = ellipse(H, H, y0, x0, R, R * asp, th);
    for (std::size_t i = 0; i < e.size(); ++i) {
      if (!e.values()[i]) continue;
      blob.values()[i] = 1;
      mix.values()[i] = m;
    }
  }

  const BinaryMask edges = instance_edges(gt);
  std::normal_distribution<double> nd;
  FeatureGrid features(H, H, D);
  std::vector<double> base(static_cast<std::size_t>(D));
  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < H; ++c) {
      const double sd = fg(r, c) ? -(din(r, c) - 0.5) : (dout(r, c) - 0.5);
      const double tau = 1.0 / (1.0 + std::exp(sd / cfg.blur));
      if (blob(r, c) && sd > 1.5) {
        for (int k = 0; k < D; ++k) {
          base[k] = mix(r, c) * basis.cell[k] + (1.0 - mix(r, c)) * basis.tissue[k] +
                    cfg.blob_texture * basis.texture[k];
        }
      } else {
        const double a = cfg.affinity * field(r, c);
        for (int k = 0; k < D; ++k) base[k] = (1.0 - a) * basis.tissue[k] + a * basis.cell[k];
      }
      auto out = features.at(r, c);
      const double mem = edges(r, c) ? cfg.membrane : 0.0;
      for (int k = 0; k < D; ++k) {
        const double v = (1.0 - tau) * base[k] + tau * basis.cell[k] + mem * basis.membrane[k];
        out[k] = static_cast<float>(cfg.gain * (v + cfg.noise * nd(rng)));
      }
    }
  }

  BinaryMask seed(H, H, 0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (std::uint32_t id = 1; id <= gt.count(); ++id) {
    if (u01(rng) < cfg.drop) continue;
    const BinaryMask cell = gt.mask_of(id);
    const DistanceMap d = distance_transform(cell);
    float dmax = 0.0f;
    for (std::size_t i = 0; i < d.size(); ++i) dmax = std::max(dmax, d.values()[i]);
    const double cut = cfg.erode * dmax;
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (cell.values()[i] && d.values()[i] > cut) seed.values()[i] = 1;
    }
  }

  ImageRecord rec;
  char id[32];
  std::snprintf(id, sizeof id, "img%03d", index);
  rec.id = id;
  rec.split = index >= cfg.images - cfg.test_images ? "test" : "train";
  rec.features = std::move(features);
  rec.seed = std::move(seed);
  rec.gt_instances = std::move(gt);
  return rec;
}

std::vector<ImageRecord> gen_dataset(const SynthConfig& config) {
  config.validate();
  std::vector<ImageRecord> out;
  out.reserve(static_cast<std::size_t>(config.images));
  for (int i = 0; i < config.images; ++i) out.push_back(gen_image(config, i));
  return out;
}

BinaryMask failure_disc(int height, int width, Pixel center, double fraction) {
  const double need = fraction * static_cast<double>(height) * width;
  // Sort pixels by distance to the prompt and take whole distance shells
  // until the area requirement is met.
  std::vector<std::pair<long, std::size_t>> order;
  order.reserve(static_cast<std::size_t>(height) * width);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const long dr = r - center.row, dc = c - center.col;
      order.emplace_back(dr * dr + dc * dc, static_cast<std::size_t>(r) * width + c);
    }
  }
  std::sort(order.begin(), order.end());
  BinaryMask m(height, width, 0);
  std::size_t taken = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (static_cast<double>(taken) >= need && (i == 0 || order[i].first != order[i - 1].first)) break;
    m.values()[order[i].second] = 1;
    ++taken;
  }
  return m;
}

SyntheticOracle::SyntheticOracle(std::map<std::string, InstanceMap> gt, OracleConfig config)
    : gt_(std::move(gt)), config_(config) {}

std::shared_ptr<SyntheticOracle> SyntheticOracle::from_records(const std::vector<ImageRecord>& records,
                                                               OracleConfig config) {
  std::map<std::string, InstanceMap> gt;
  for (const auto& r : records) {
    if (!r.gt_instances) throw UnsupportedError("synthetic oracle needs ground truth for " + r.id);
    gt.emplace(r.id, *r.gt_instances);
  }
  return std::make_shared<SyntheticOracle>(std::move(gt), config);
}

BinaryMask SyntheticOracle::propose(const std::string& image_id, Pixel prompt) {
  const auto it = gt_.find(image_id);
  if (it == gt_.end()) throw DataError("synthetic oracle has no ground truth for " + image_id);
  const InstanceMap& gt = it->second;
  if (prompt.row < 0 || prompt.col < 0 || prompt.row >= gt.height() || prompt.col >= gt.width()) {
    throw ArgumentError("prompt outside the image");
  }
  Rng rng(mix64(hash_string(image_id, config_.seed) ^
                mix64(static_cast<std::uint64_t>(prompt.row) * 1000003ULL +
                      static_cast<std::uint64_t>(prompt.col))));
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const std::uint32_t id = gt[prompt];
  const bool fail = id == 0 || u01(rng) < config_.failure_rate;
  if (fail) return failure_disc(gt.height(), gt.width(), prompt, config_.failure_fraction);
  BinaryMask m = gt.mask_of(id);
  if (config_.jitter <= 0.0) return m;
  const BinaryMask grown = dilate(m, 1);
  const BinaryMask inner = boundary_edges(m);
  for (std::size_t i = 0; i < m.size(); ++i) {
    const bool band = inner.values()[i] != 0 || (grown.values()[i] != 0 && m.values()[i] == 0);
    if (band && u01(rng) < config_.jitter) m.values()[i] ^= 1;
  }
  return m;
}

}  // namespace coin
