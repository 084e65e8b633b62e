#include "support/fixtures.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

namespace coin::testing {

BinaryMask disc(int h, int w, double cy, double cx, double r) {
  BinaryMask m(h, w, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if ((y - cy) * (y - cy) + (x - cx) * (x - cx) <= r * r) m(y, x) = 1;
    }
  }
  return m;
}

BinaryMask random_mask(Rng& rng, int h, int w, double p) {
  std::bernoulli_distribution b(p);
  BinaryMask m(h, w, 0);
  for (auto& v : m.values()) v = b(rng) ? 1 : 0;
  return m;
}

InstanceMap random_instances(Rng& rng, int h, int w, int max_instances) {
  std::uniform_int_distribution<int> d(0, max_instances);
  LabelGrid g(h, w, 0u);
  for (auto& v : g.values()) v = static_cast<std::uint32_t>(d(rng));
  return InstanceMap::compact(g);
}

FeatureGrid random_features(Rng& rng, int h, int w, int d) {
  std::normal_distribution<float> nd;
  FeatureGrid f(h, w, d);
  for (auto& v : f.values()) v = nd(rng);
  return f;
}

DistanceMap brute_force_edt(const BinaryMask& mask) {
  const int h = mask.height(), w = mask.width();
  DistanceMap out(h, w, 0.0f);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask(y, x)) continue;
      // Nearest out-of-image pixel.
      long best = std::min({static_cast<long>(y + 1), static_cast<long>(x + 1),
                            static_cast<long>(h - y), static_cast<long>(w - x)});
      best *= best;
      for (int yy = 0; yy < h; ++yy) {
        for (int xx = 0; xx < w; ++xx) {
          if (mask(yy, xx)) continue;
          const long d = static_cast<long>(yy - y) * (yy - y) + static_cast<long>(xx - x) * (xx - x);
          best = std::min(best, d);
        }
      }
      out(y, x) = static_cast<float>(std::sqrt(static_cast<double>(best)));
    }
  }
  return out;
}

namespace {

std::size_t first_pixel(const BinaryMask& m) {
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m.values()[i]) return i;
  }
  return m.size();
}

std::pair<std::size_t, std::size_t> inter_union(const BinaryMask& a, const BinaryMask& b) {
  std::size_t i = 0, u = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    i += (a.values()[k] && b.values()[k]) ? 1 : 0;
    u += (a.values()[k] || b.values()[k]) ? 1 : 0;
  }
  return {i, u};
}

}  // namespace

double reference_aji(const InstanceMap& pred, const InstanceMap& gt) {
  std::vector<BinaryMask> g, p;
  for (std::uint32_t id = 1; id <= gt.count(); ++id) g.push_back(gt.mask_of(id));
  for (std::uint32_t id = 1; id <= pred.count(); ++id) p.push_back(pred.mask_of(id));
  if (g.empty() && p.empty()) return 1.0;
  std::vector<std::size_t> order(g.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto na = count_foreground(g[a]), nb = count_foreground(g[b]);
    if (na != nb) return na > nb;
    return first_pixel(g[a]) < first_pixel(g[b]);
  });
  std::vector<bool> used(p.size(), false);
  std::size_t inter = 0, uni = 0;
  for (std::size_t gi : order) {
    long best = -1;
    double best_iou = 0.0;
    for (std::size_t pi = 0; pi < p.size(); ++pi) {
      if (used[pi]) continue;
      const auto [i, u] = inter_union(g[gi], p[pi]);
      if (i == 0) continue;
      const double v = static_cast<double>(i) / static_cast<double>(u);
      if (best < 0 || v > best_iou ||
          (v == best_iou && first_pixel(p[pi]) < first_pixel(p[static_cast<std::size_t>(best)]))) {
        best = static_cast<long>(pi);
        best_iou = v;
      }
    }
    if (best < 0) {
      uni += count_foreground(g[gi]);
      continue;
    }
    used[static_cast<std::size_t>(best)] = true;
    const auto [i, u] = inter_union(g[gi], p[static_cast<std::size_t>(best)]);
    inter += i;
    uni += u;
  }
  for (std::size_t pi = 0; pi < p.size(); ++pi) {
    if (!used[pi]) uni += count_foreground(p[pi]);
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

PanopticQuality reference_pq(const InstanceMap& pred, const InstanceMap& gt) {
  PanopticQuality q;
  const std::size_t ng = gt.count(), np = pred.count();
  if (ng == 0 && np == 0) {
    q.pq = q.sq = q.rq = 1.0;
    return q;
  }
  std::vector<std::vector<double>> iou(ng, std::vector<double>(np, 0.0));
  for (std::size_t a = 0; a < ng; ++a) {
    for (std::size_t b = 0; b < np; ++b) {
      const auto [i, u] = inter_union(gt.mask_of(static_cast<std::uint32_t>(a + 1)),
                                      pred.mask_of(static_cast<std::uint32_t>(b + 1)));
      iou[a][b] = u == 0 ? 0.0 : static_cast<double>(i) / static_cast<double>(u);
    }
  }
  // assign[a] = matched pred index or -1.
  std::vector<int> assign(ng, -1), best_assign;
  std::size_t best_tp = 0;
  double best_sum = -1.0;
  std::vector<bool> taken(np, false);
  std::function<void(std::size_t)> rec = [&](std::size_t a) {
    if (a == ng) {
      std::size_t tp = 0;
      double sum = 0.0;
      for (std::size_t k = 0; k < ng; ++k) {
        if (assign[k] >= 0) {
          ++tp;
          sum += iou[k][static_cast<std::size_t>(assign[k])];
        }
      }
      if (tp > best_tp || (tp == best_tp && sum > best_sum)) {
        best_tp = tp;
        best_sum = sum;
      }
      return;
    }
    assign[a] = -1;
    rec(a + 1);
    for (std::size_t b = 0; b < np; ++b) {
      if (taken[b] || !(iou[a][b] > 0.5)) continue;
      taken[b] = true;
      assign[a] = static_cast<int>(b);
      rec(a + 1);
      taken[b] = false;
      assign[a] = -1;
    }
  };
  rec(0);
  q.tp = best_tp;
  q.fn = ng - best_tp;
  q.fp = np - best_tp;
  q.sq = best_tp == 0 ? 0.0 : best_sum / static_cast<double>(best_tp);
  q.rq = static_cast<double>(best_tp) /
         (static_cast<double>(best_tp) + 0.5 * static_cast<double>(q.fp + q.fn));
  q.pq = q.sq * q.rq;
  return q;
}

std::vector<int> brute_force_labels(const std::vector<double>& confidences) {
  using boost::multiprecision::cpp_rational;
  const cpp_rational n(static_cast<long long>(confidences.size()));
  cpp_rational mean = 0;
  for (double c : confidences) mean += cpp_rational(c);
  mean /= n;
  cpp_rational var = 0;
  for (double c : confidences) var += (cpp_rational(c) - mean) * (cpp_rational(c) - mean);
  var /= n;
  std::vector<int> out;
  for (double c : confidences) {
    // c > mean + sqrt(var) without the square root.
    const cpp_rational above = cpp_rational(c) - mean;
    if (c == 0.0) {
      out.push_back(0);
    } else if (above > 0 && above * above > var) {
      out.push_back(1);
    } else {
      out.push_back(-1);
    }
  }
  return out;
}

double grid_search_objective(const SimilarityMap& sim, const std::vector<double>& r, double c0,
                             double c1, double lambda, int steps, int zooms) {
  const std::size_t n = r.size();
  (void)c1;
  auto s0 = sim.cell.values();
  auto s1 = sim.tissue.values();
  auto xlogx = [](double t) { return t > 0.0 ? t * std::log(t) : 0.0; };
  auto objective = [&](const std::vector<double>& t0) {
    double v = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double a = t0[i], b = r[i] - t0[i];
      v += a * (1.0 - s0[i]) + b * (1.0 - s1[i]) + lambda * (xlogx(a) + xlogx(b));
    }
    return v;
  };
  // The objective is convex on the feasible set, so each zoom re-grids a
  // box of two coarse cells around the current best point.
  std::vector<double> lo(n, 0.0), hi(r);
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> t0(n, 0.0), arg(n, 0.0);
  std::function<void(std::size_t, double)> rec = [&](std::size_t i, double used) {
    if (i + 1 == n) {
      const double last = c0 - used;
      if (last < -1e-12 || last > r[i] + 1e-12) return;
      t0[i] = std::clamp(last, 0.0, r[i]);
      const double v = objective(t0);
      if (v < best) {
        best = v;
        arg = t0;
      }
      return;
    }
    for (int k = 0; k < steps; ++k) {
      t0[i] = lo[i] + (hi[i] - lo[i]) * static_cast<double>(k) / static_cast<double>(steps - 1);
      rec(i + 1, used + t0[i]);
    }
  };
  rec(0, 0.0);
  for (int z = 0; z < zooms && n > 1; ++z) {
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const double cell = (hi[i] - lo[i]) / static_cast<double>(steps - 1);
      lo[i] = std::max(0.0, arg[i] - 2 * cell);
      hi[i] = std::min(r[i], arg[i] + 2 * cell);
    }
    rec(0, 0.0);
  }
  return best;
}

GradCheckResult gradient_check(std::uint64_t seed, double step, double floor) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  GradCheckResult res;
  for (;;) {
    const int h = 3 + static_cast<int>(rng() % 4), w = 3 + static_cast<int>(rng() % 4);
    const int depth = 2 + static_cast<int>(rng() % 4), hidden = 2 + static_cast<int>(rng() % 5);
    StudentParams params = StudentParams::random(depth, hidden, rng());
    params.b_bin = static_cast<float>(0.3 * normal(rng));
    params.b_edge = static_cast<float>(0.3 * normal(rng));
    for (auto& b : params.b1) b = static_cast<float>(0.3 * normal(rng));
    FeatureGrid f(h, w, depth);
    for (auto& v : f.values()) v = static_cast<float>(normal(rng));
    BinaryMask bin(h, w, 0), edge(h, w, 0);
    for (std::size_t i = 0; i < bin.size(); ++i) {
      const auto k = rng() % 5;
      bin.values()[i] = k == 0 ? kIgnore : static_cast<std::uint8_t>(k % 2);
      edge.values()[i] = k == 0 ? kIgnore : static_cast<std::uint8_t>(rng() % 2);
    }
    // Drop fixtures whose pre-activations sit where a step could cross zero.
    double min_abs = std::numeric_limits<double>::infinity();
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        for (int j = 0; j < hidden; ++j) {
          double z = params.b1[j];
          for (int d = 0; d < depth; ++d) z += static_cast<double>(params.w1[j * depth + d]) * f.at(r, c)[d];
          min_abs = std::min(min_abs, std::abs(z));
        }
      }
    }
    if (min_abs < 0.01) {
      ++res.resamples;
      continue;
    }
    const auto analytic = loss_and_grads(params, f, bin, edge).grads;
    auto probe = [&](float& p, double a) {
      const float orig = p;
      p = static_cast<float>(orig + step);
      const double up = static_cast<double>(p) - orig;
      const double lp = loss_and_grads(params, f, bin, edge).loss.total;
      p = static_cast<float>(orig - step);
      const double down = static_cast<double>(p) - orig;
      const double lm = loss_and_grads(params, f, bin, edge).loss.total;
      p = orig;
      const double fd = (lp - lm) / (up - down);
      const double denom = std::max({std::abs(a), std::abs(fd), floor});
      res.max_rel_error = std::max(res.max_rel_error, std::abs(a - fd) / denom);
      ++res.parameters;
    };
    for (std::size_t i = 0; i < params.w1.size(); ++i) probe(params.w1[i], analytic.w1[i]);
    for (std::size_t i = 0; i < params.b1.size(); ++i) probe(params.b1[i], analytic.b1[i]);
    for (std::size_t i = 0; i < params.w_bin.size(); ++i) probe(params.w_bin[i], analytic.w_bin[i]);
    for (std::size_t i = 0; i < params.w_edge.size(); ++i) probe(params.w_edge[i], analytic.w_edge[i]);
    probe(params.b_bin, analytic.b_bin);
    probe(params.b_edge, analytic.b_edge);
    return res;
  }
}

SynthConfig small_synth(std::uint64_t seed) {
  SynthConfig c;
  c.seed = seed;
  c.images = 3;
  c.test_images = 1;
  c.size = 48;
  c.cells = 6;
  c.blobs_large = 0;
  c.blobs_small = 2;
  return c;
}

TempDir::TempDir(const std::string& tag) {
  static std::uint64_t counter = 0;
  const auto base = std::filesystem::temp_directory_path();
  Rng rng(std::random_device{}());
  path_ = base / ("coin_" + tag + "_" + std::to_string(rng() % 1000000007ULL) + "_" +
                  std::to_string(counter++));
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::vector<std::pair<std::string, std::string>> read_tree(const std::filesystem::path& root) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    out.emplace_back(std::filesystem::relative(e.path(), root).generic_string(), ss.str());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace coin::testing
