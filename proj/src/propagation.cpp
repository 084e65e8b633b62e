#include "coin/propagation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "coin/parallel.hpp"
#include "coin/simd.hpp"

namespace coin {
namespace {

double sq_dist(std::span<const float> x, const std::vector<double>& c) {
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double d = x[k] - c[k];
    s += d * d;
  }
  return s;
}

double sq_dist(std::span<const float> x, std::span<const float> y) {
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double d = static_cast<double>(x[k]) - y[k];
    s += d * d;
  }
  return s;
}

std::pair<std::size_t, std::size_t> farthest_pair(const FeatureGrid& f) {
  const std::size_t n = f.pixel_count();
  std::size_t ia = 0, ib = 0;
  double best = -1.0;
  if (n <= kExactFarthestPairLimit) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double d = sq_dist(f.pixel(i), f.pixel(j));
        if (d > best) {
          best = d;
          ia = i;
          ib = j;
        }
      }
    }
    return {ia, ib};
  }
  auto farthest_from = [&](std::size_t from) {
    std::size_t arg = 0;
    double far = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = sq_dist(f.pixel(i), f.pixel(from));
      if (d > far) {
        far = d;
        arg = i;
      }
    }
    return arg;
  };
  ia = farthest_from(0);
  ib = farthest_from(ia);
  return {std::min(ia, ib), std::max(ia, ib)};
}

std::vector<float> to_float(const std::vector<double>& v) {
  return {v.begin(), v.end()};
}

std::vector<float> mean_where(const FeatureGrid& f, const BinaryMask& m, std::uint8_t want) {
  const std::size_t d = static_cast<std::size_t>(f.depth());
  std::vector<double> acc(d, 0.0);
  std::size_t count = 0;
  auto mv = m.values();
  for (std::size_t i = 0; i < f.pixel_count(); ++i) {
    if ((mv[i] != 0) != (want != 0)) continue;
    auto x = f.pixel(i);
    for (std::size_t k = 0; k < d; ++k) acc[k] += x[k];
    ++count;
  }
  for (auto& a : acc) a /= static_cast<double>(count);
  return to_float(acc);
}

double log_sum_exp2(double a, double b) {
  const double m = std::max(a, b);
  if (m == -std::numeric_limits<double>::infinity()) return m;
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

void check_sim(const SimilarityMap& sim) {
  for (float v : sim.cell.values()) {
    if (!std::isfinite(v)) throw NumericError("similarity map contains a non-finite value");
  }
  for (float v : sim.tissue.values()) {
    if (!std::isfinite(v)) throw NumericError("similarity map contains a non-finite value");
  }
}

TransportPlan solve_standard(const SimilarityMap& sim, const std::vector<double>& r,
                             double c0, double c1, const SinkhornOptions& opt) {
  const auto& K = simd::active();
  const std::size_t n = sim.cell.size();
  auto s0 = sim.cell.values();
  auto s1 = sim.tissue.values();
  std::vector<double> k0(n), k1(n), u(n, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    k0[i] = std::exp(-(1.0 - s0[i]) / opt.lambda);
    k1[i] = std::exp(-(1.0 - s1[i]) / opt.lambda);
  }
  const bool uniform = std::all_of(r.begin(), r.end(), [&](double x) { return x == r[0]; });
  double v0 = 1.0, v1 = 1.0;

  TransportPlan plan;
  for (int it = 1; it <= opt.max_iter; ++it) {
    if (uniform) {
      K.scale_rows(k0.data(), k1.data(), v0, v1, r[0], u.data(), n);
    } else {
      for (std::size_t i = 0; i < n; ++i) u[i] = r[i] / (k0[i] * v0 + k1[i] * v1);
    }
    const simd::ColSums cs = K.col_sums(k0.data(), k1.data(), u.data(), n);
    if (!(cs.c0 > 0.0) || !(cs.c1 > 0.0)) {
      throw NumericError("Sinkhorn column mass vanished (lambda=" + std::to_string(opt.lambda) +
                         "); try a larger lambda");
    }
    v0 = c0 / cs.c0;
    v1 = c1 / cs.c1;
    double res = 0.0;
    if (uniform) {
      res = K.row_residual(k0.data(), k1.data(), u.data(), v0, v1, r[0], n);
    } else {
      for (std::size_t i = 0; i < n; ++i) res += std::abs(u[i] * (k0[i] * v0 + k1[i] * v1) - r[i]);
    }
    res = std::max({res, std::abs(v0 * cs.c0 - c0) + std::abs(v1 * cs.c1 - c1)});
    if (!std::isfinite(res)) throw NumericError("Sinkhorn residual is not finite");
    plan.residual_history.push_back(res);
    plan.iterations = it;
    plan.residual = res;
    if (res < opt.tol) {
      plan.converged = true;
      break;
    }
  }
  plan.t0.resize(n);
  plan.t1.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    plan.t0[i] = u[i] * k0[i] * v0;
    plan.t1[i] = u[i] * k1[i] * v1;
  }
  return plan;
}

TransportPlan solve_log(const SimilarityMap& sim, const std::vector<double>& r, double c0,
                        double c1, const SinkhornOptions& opt) {
  const std::size_t n = sim.cell.size();
  auto s0 = sim.cell.values();
  auto s1 = sim.tissue.values();
  std::vector<double> lk0(n), lk1(n), f(n, 0.0), logr(n);
  for (std::size_t i = 0; i < n; ++i) {
    lk0[i] = -(1.0 - s0[i]) / opt.lambda;
    lk1[i] = -(1.0 - s1[i]) / opt.lambda;
    logr[i] = std::log(r[i]);
  }
  const double logc0 = std::log(c0), logc1 = std::log(c1);
  double g0 = 0.0, g1 = 0.0;

  auto column_lse = [&](const std::vector<double>& lk) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) m = std::max(m, lk[i] + f[i]);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += std::exp(lk[i] + f[i] - m);
    return m + std::log(s);
  };

  TransportPlan plan;
  plan.log_domain = true;
  for (int it = 1; it <= opt.max_iter; ++it) {
    for (std::size_t i = 0; i < n; ++i) f[i] = logr[i] - log_sum_exp2(lk0[i] + g0, lk1[i] + g1);
    const double l0 = column_lse(lk0);
    const double l1 = column_lse(lk1);
    g0 = logc0 - l0;
    g1 = logc1 - l1;
    double res = 0.0, col0 = 0.0, col1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double a = std::exp(f[i] + lk0[i] + g0);
      const double b = std::exp(f[i] + lk1[i] + g1);
      res += std::abs(a + b - r[i]);
      col0 += a;
      col1 += b;
    }
    res = std::max(res, std::abs(col0 - c0) + std::abs(col1 - c1));
    if (!std::isfinite(res)) throw NumericError("log-domain Sinkhorn residual is not finite");
    plan.residual_history.push_back(res);
    plan.iterations = it;
    plan.residual = res;
    if (res < opt.tol) {
      plan.converged = true;
      break;
    }
  }
  plan.t0.resize(n);
  plan.t1.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    plan.t0[i] = std::exp(f[i] + lk0[i] + g0);
    plan.t1[i] = std::exp(f[i] + lk1[i] + g1);
  }
  return plan;
}

}  // namespace

TwoMeansResult two_means(const FeatureGrid& features, int iterations) {
  const std::size_t n = features.pixel_count();
  const std::size_t d = static_cast<std::size_t>(features.depth());
  if (n == 0) throw ArgumentError("two_means on an empty grid");
  auto [ia, ib] = farthest_pair(features);
  std::vector<double> ca(features.pixel(ia).begin(), features.pixel(ia).end());
  std::vector<double> cb(features.pixel(ib).begin(), features.pixel(ib).end());
  std::vector<std::uint8_t> assign(n, 0), prev(n, 2);
  std::size_t na = 0, nb = 0;
  for (int it = 0; it < std::max(1, iterations); ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      assign[i] = sq_dist(features.pixel(i), cb) < sq_dist(features.pixel(i), ca) ? 1 : 0;
    }
    std::vector<double> sa(d, 0.0), sb(d, 0.0);
    na = nb = 0;
    for (std::size_t i = 0; i < n; ++i) {
      auto x = features.pixel(i);
      auto& s = assign[i] ? sb : sa;
      for (std::size_t k = 0; k < d; ++k) s[k] += x[k];
      ++(assign[i] ? nb : na);
    }
    if (na > 0) {
      for (std::size_t k = 0; k < d; ++k) ca[k] = sa[k] / static_cast<double>(na);
    }
    if (nb > 0) {
      for (std::size_t k = 0; k < d; ++k) cb[k] = sb[k] / static_cast<double>(nb);
    }
    if (assign == prev) break;
    prev = assign;
  }
  return {to_float(ca), to_float(cb), na, nb};
}

ClassCentroids cap_centroids(const FeatureGrid& features, const BinaryMask& seed) {
  if (!seed.same_shape(features.height(), features.width())) {
    throw ArgumentError("cap_centroids: seed shape differs from features");
  }
  if (features.pixel_count() == 0) throw ArgumentError("cap_centroids on an empty grid");
  const std::size_t cells = count_foreground(seed);
  const std::size_t n = features.pixel_count();
  ClassCentroids out;
  if (cells > 0 && cells < n) {
    out.cell = mean_where(features, seed, 1);
    out.tissue = mean_where(features, seed, 0);
    return out;
  }
  // The empty class takes the smaller cluster.
  TwoMeansResult tm = two_means(features);
  const bool a_smaller = tm.size_a < tm.size_b;
  auto& smaller = a_smaller ? tm.centroid_a : tm.centroid_b;
  auto& larger = a_smaller ? tm.centroid_b : tm.centroid_a;
  if (cells == 0) {
    out.cell = std::move(smaller);
    out.tissue = std::move(larger);
  } else {
    out.tissue = std::move(smaller);
    out.cell = std::move(larger);
  }
  out.fallback = true;
  out.uniform = tm.size_a == 0 || tm.size_b == 0;
  return out;
}

ClassCentroids patch_centroids(const FeatureGrid& patch, const BinaryMask& patch_seed,
                               const ClassCentroids& image) {
  if (image.fallback) return cap_centroids(patch, patch_seed);
  if (!patch_seed.same_shape(patch.height(), patch.width())) {
    throw ArgumentError("patch_centroids: seed shape differs from features");
  }
  if (image.cell.size() != static_cast<std::size_t>(patch.depth())) {
    throw ArgumentError("patch_centroids: image centroids differ in depth");
  }
  const std::size_t cells = count_foreground(patch_seed);
  if (cells > 0 && cells < patch.pixel_count()) return cap_centroids(patch, patch_seed);
  ClassCentroids out;
  out.borrowed = true;
  if (cells == 0) {
    out.cell = image.cell;
    out.tissue = mean_where(patch, patch_seed, 0);
  } else {
    out.cell = mean_where(patch, patch_seed, 1);
    out.tissue = image.tissue;
  }
  return out;
}

SimilarityMap similarity_map(const FeatureGrid& features, const ClassCentroids& centroids) {
  const std::size_t d = static_cast<std::size_t>(features.depth());
  if (centroids.cell.size() != d || centroids.tissue.size() != d) {
    throw ArgumentError("similarity_map: centroid depth " + std::to_string(centroids.cell.size()) +
                        " differs from feature depth " + std::to_string(d));
  }
  const auto& K = simd::active();
  const float* a = centroids.cell.data();
  const float* b = centroids.tissue.data();
  const double na = std::sqrt(K.dot(a, a, d));
  const double nb = std::sqrt(K.dot(b, b, d));
  SimilarityMap sim{Grid<float>(features.height(), features.width(), 0.0f),
                    Grid<float>(features.height(), features.width(), 0.0f)};
  auto sc = sim.cell.values();
  auto st = sim.tissue.values();
  auto rect = [](double dotv, double nx, double nc) {
    if (nx == 0.0 || nc == 0.0) return 0.0f;
    return static_cast<float>(std::clamp(dotv / (nx * nc), 0.0, 1.0));
  };
  for (std::size_t i = 0; i < features.pixel_count(); ++i) {
    const simd::Dot3 p = K.dot3(features.pixel(i).data(), a, b, d);
    const double nx = std::sqrt(p.xx);
    sc[i] = rect(p.xa, nx, na);
    st[i] = rect(p.xb, nx, nb);
  }
  return sim;
}

std::pair<double, double> target_marginal(const SimilarityMap& sim) {
  auto s0 = sim.cell.values();
  auto s1 = sim.tissue.values();
  const std::size_t n = s0.size();
  std::size_t cells = 0;
  for (std::size_t i = 0; i < n; ++i) cells += s0[i] > s1[i] ? 1 : 0;
  double c0 = std::max(static_cast<double>(cells) / static_cast<double>(n), kMassFloor);
  double c1 = std::max(static_cast<double>(n - cells) / static_cast<double>(n), kMassFloor);
  const double z = c0 + c1;
  return {c0 / z, c1 / z};
}

TransportPlan sinkhorn_plan(const SimilarityMap& sim, const SinkhornOptions& options) {
  const std::size_t n = sim.cell.size();
  if (n == 0) throw ArgumentError("sinkhorn_plan on an empty similarity map");
  auto [c0, c1] = target_marginal(sim);
  return sinkhorn_plan(sim, std::vector<double>(n, 1.0 / static_cast<double>(n)), c0, c1, options);
}

TransportPlan sinkhorn_plan(const SimilarityMap& sim, std::vector<double> r, double c0,
                            double c1, const SinkhornOptions& options) {
  if (!(options.lambda > 0.0) || !std::isfinite(options.lambda)) {
    throw ArgumentError("sinkhorn lambda must be positive and finite");
  }
  if (options.max_iter < 1) throw ArgumentError("sinkhorn max_iter must be >= 1");
  if (!sim.tissue.same_shape(sim.cell)) throw ArgumentError("similarity map planes differ in shape");
  if (r.size() != sim.cell.size()) throw ArgumentError("source marginal length differs from pixel count");
  if (!(c0 > 0.0) || !(c1 > 0.0)) throw ArgumentError("target marginal entries must be positive");
  for (double x : r) {
    if (!(x > 0.0)) throw ArgumentError("source marginal entries must be positive");
  }
  check_sim(sim);
  TransportPlan plan = options.lambda <= options.log_domain_below
                           ? solve_log(sim, r, c0, c1, options)
                           : solve_standard(sim, r, c0, c1, options);
  plan.r = std::move(r);
  plan.c0 = c0;
  plan.c1 = c1;
  plan.lambda = options.lambda;
  return plan;
}

double entropic_objective(const std::vector<double>& t0, const std::vector<double>& t1,
                          const SimilarityMap& sim, double lambda) {
  auto s0 = sim.cell.values();
  auto s1 = sim.tissue.values();
  double cost = 0.0, entropy = 0.0;
  auto term = [&](double t, double s) {
    cost += t * (1.0 - s);
    if (t > 0.0) entropy -= t * std::log(t);
  };
  for (std::size_t i = 0; i < t0.size(); ++i) {
    term(t0[i], s0[i]);
    term(t1[i], s1[i]);
  }
  return cost - lambda * entropy;
}

double TransportPlan::objective(const SimilarityMap& sim) const {
  return entropic_objective(t0, t1, sim, lambda);
}

PropagatedMask ot_refine(const SimilarityMap& sim, const TransportPlan& plan) {
  const std::size_t n = sim.cell.size();
  if (plan.size() != n) {
    throw ArgumentError("ot_refine: plan has " + std::to_string(plan.size()) +
                        " rows but the map has " + std::to_string(n) + " pixels");
  }
  const int h = sim.height(), w = sim.width();
  PropagatedMask out{Grid<float>(h, w, 0.0f), Grid<float>(h, w, 0.0f), BinaryMask(h, w, 0)};
  auto s0 = sim.cell.values();
  auto s1 = sim.tissue.values();
  auto o0 = out.cell_score.values();
  auto o1 = out.tissue_score.values();
  auto fg = out.foreground.values();
  const double scale = static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = std::clamp(plan.t0[i] * scale * s0[i], 0.0, 1.0);
    const double b = std::clamp(plan.t1[i] * scale * s1[i], 0.0, 1.0);
    o0[i] = static_cast<float>(a);
    o1[i] = static_cast<float>(b);
    fg[i] = a > b ? 1 : 0;
  }
  return out;
}

PropagatedMask argmax_mask(const SimilarityMap& sim) {
  PropagatedMask out{sim.cell, sim.tissue, BinaryMask(sim.height(), sim.width(), 0)};
  auto s0 = sim.cell.values();
  auto s1 = sim.tissue.values();
  auto fg = out.foreground.values();
  for (std::size_t i = 0; i < s0.size(); ++i) fg[i] = s0[i] > s1[i] ? 1 : 0;
  return out;
}

PropagationResult propagate_image(const FeatureGrid& features, const BinaryMask& seed,
                                  const PropagationConfig& config, int jobs) {
  if (!seed.same_shape(features.height(), features.width())) {
    throw DataError("propagate_image: seed shape differs from features");
  }
  auto fp = partition_patches(features, config.per_axis);
  auto sp = partition_patches(seed, config.per_axis);
  const std::size_t k = fp.tiles.size();
  std::vector<Grid<float>> cell(k), tissue(k);
  std::vector<BinaryMask> fg(k);
  std::vector<PatchDiagnostics> diag(k);
  const ClassCentroids image = cap_centroids(features, seed);
  parallel_for(k, jobs, [&](std::size_t p) {
    const ClassCentroids cent = patch_centroids(fp.tiles[p], sp.tiles[p], image);
    const SimilarityMap sim = similarity_map(fp.tiles[p], cent);
    PatchDiagnostics& d = diag[p];
    d.index = static_cast<int>(p);
    d.fallback = cent.fallback;
    d.borrowed = cent.borrowed;
    PropagatedMask m;
    if (cent.uniform) {
      const BinaryMask& s = sp.tiles[p];
      m = {sim.cell, sim.tissue, s};
      for (std::size_t i = 0; i < s.size(); ++i) {
        (s.values()[i] ? m.tissue_score : m.cell_score).values()[i] = 0.0f;
      }
      d.cell_mass = s.size() > 0 && s.values()[0] ? 1.0 : 0.0;
    } else if (config.use_ot) {
      const TransportPlan plan = sinkhorn_plan(sim, config.ot);
      d.used_ot = true;
      d.iterations = plan.iterations;
      d.converged = plan.converged;
      d.residual = plan.residual;
      d.cell_mass = plan.c0;
      m = ot_refine(sim, plan);
    } else {
      m = argmax_mask(sim);
      d.cell_mass = target_marginal(sim).first;
    }
    cell[p] = std::move(m.cell_score);
    tissue[p] = std::move(m.tissue_score);
    fg[p] = std::move(m.foreground);
  });
  PropagationResult out;
  out.layout = fp.layout;
  out.mask.cell_score = stitch_patches(fp.layout, cell);
  out.mask.tissue_score = stitch_patches(fp.layout, tissue);
  out.mask.foreground = stitch_patches(fp.layout, fg);
  out.patches = std::move(diag);
  return out;
}

}  // namespace coin
